//! Seeded candidate sampler used as the bundled generator.
//!
//! Each cell is filled by drawing a fixed number of candidate bars from the
//! pitch material around it and keeping the one whose recomputed levels sit
//! closest to the targets.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    clear_region, validate_cell_events, Cell, CellOutput, GenerationRequest, GeneratorError,
    GeneratorPort, RoleProfile,
};
use crate::metrics::{
    bar_cloud, bar_metrics, bar_tension, level_bounds, representative_value, ControlLevels,
    KeyEstimate, MetricKind,
};
use crate::score::{NoteEvent, ScoreWindow, TrackRole};

const VELOCITY: u8 = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGenerator {
    /// Candidate bars drawn per cell.
    pub candidates: usize,
    /// Error weights for density, polyphony, occupation and tension.
    pub weights: [f64; 4],
    /// Onset grid steps per quarter note (4 = sixteenths).
    pub grid_per_quarter: u64,
}

impl Default for BaselineGenerator {
    fn default() -> Self {
        Self {
            candidates: 32,
            weights: [1.0, 1.0, 1.0, 1.0],
            grid_per_quarter: 4,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-cell seed derived from the request seed and the cell alone, so a
/// cell's random stream does not depend on which other cells are selected.
pub fn cell_seed(seed: u64, cell: Cell) -> u64 {
    let counter = ((cell.bar as u64) << 8) | cell.track as u64;
    splitmix64(seed ^ splitmix64(counter))
}

fn role_rank(role: TrackRole) -> u8 {
    match role {
        TrackRole::Bass => 0,
        TrackRole::Harmony | TrackRole::Empty => 1,
        TrackRole::Melody => 2,
    }
}

impl GeneratorPort for BaselineGenerator {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<CellOutput, GeneratorError> {
        let mut working = clear_region(req.window, req.region);
        let mut order: Vec<Cell> = req.region.cells().copied().collect();
        order.sort_by_key(|c| (c.bar, role_rank(req.roles[c.track]), c.track));

        let mut out = CellOutput::new();
        let mut failed = Vec::new();
        for cell in order {
            let target = req.targets.cells.get(&cell).copied().unwrap_or_default();
            let tension = req.targets.tension.get(&cell.bar).copied();
            let ctx = CellContext::new(&working, req.roles, cell, &req.key, self.grid_per_quarter);
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(req.seed, cell));
            let mut best: Option<(f64, Vec<NoteEvent>)> = None;
            for i in 0..self.candidates.max(1) {
                let cand = ctx.candidate(&target, i, &mut rng);
                if validate_cell_events(&working, req.roles, cell, &cand).is_err() {
                    continue;
                }
                let err = self.error(&ctx, &cand, &target, tension, &req.key);
                if best.as_ref().is_none_or(|(e, _)| err < *e) {
                    best = Some((err, cand));
                }
            }
            match best {
                Some((_, events)) => {
                    let track = &mut working.tracks[cell.track].events;
                    track.extend_from_slice(&events);
                    track.sort();
                    out.insert(cell, events);
                }
                None => failed.push(cell),
            }
        }
        if failed.is_empty() {
            Ok(out)
        } else {
            Err(GeneratorError::Exhausted { cells: failed })
        }
    }
}

impl BaselineGenerator {
    fn error(
        &self,
        ctx: &CellContext,
        cand: &[NoteEvent],
        target: &ControlLevels,
        tension: Option<u8>,
        key: &KeyEstimate,
    ) -> f64 {
        let levels = bar_metrics(cand, &ctx.context_notes, ctx.bar.clone()).levels();
        let d = levels.delta(target);
        let mut err = self.weights[0] * f64::from(d.density)
            + self.weights[1] * f64::from(d.polyphony)
            + self.weights[2] * f64::from(d.occupation);
        if let Some(t) = tension {
            let mut cloud = ctx.bar_cloud.clone();
            cloud.extend(cand.iter().map(|e| (e.pitch, e.duration as f64)));
            let level = bar_tension(&cloud, key).map_or(0, |(v, _)| v.tension_level);
            err += self.weights[3] * f64::from(level.abs_diff(t));
        }
        err
    }
}

/// What a cell's candidates are drawn from.
struct CellContext {
    profile: RoleProfile,
    bar: Range<u64>,
    /// Grid onsets still free after notes carried into the bar.
    slots: Vec<u64>,
    /// Ticks already sounding from notes carried into the bar.
    carried_cover: u64,
    /// Same-track notes sounding in the bar from outside the cell.
    context_notes: Vec<NoteEvent>,
    /// The rest of the bar, all tracks, weighted by sounding length.
    bar_cloud: Vec<(u8, f64)>,
    palettes: [Vec<u8>; 4],
}

impl CellContext {
    fn new(
        window: &ScoreWindow,
        roles: &[TrackRole],
        cell: Cell,
        key: &KeyEstimate,
        grid_per_quarter: u64,
    ) -> Self {
        let profile = RoleProfile::of(roles[cell.track]);
        let bar = window.bar_range(cell.bar);
        let context_notes: Vec<NoteEvent> = window.sounding_in_bar(cell.track, cell.bar).copied().collect();
        let free_from = context_notes
            .iter()
            .map(|e| e.end().min(bar.end))
            .max()
            .unwrap_or(bar.start)
            .max(bar.start);
        let step = (u64::from(window.ppq) / grid_per_quarter.max(1)).max(1);
        let slots = (0..)
            .map(|k| bar.start + k * step)
            .take_while(|t| *t < bar.end)
            .filter(|t| *t >= free_from)
            .collect();

        // pitch material: this track elsewhere, other tracks in this bar
        let register = profile.register();
        let mut vocab: BTreeSet<u8> = BTreeSet::new();
        let track = &window.tracks[cell.track];
        vocab.extend(
            track
                .events
                .iter()
                .chain(window.carried[cell.track].iter())
                .filter(|e| window.bar_of(e.onset) != Some(cell.bar))
                .map(|e| e.pitch),
        );
        for t in (0..window.tracks.len()).filter(|t| *t != cell.track) {
            vocab.extend(window.sounding_in_bar(t, cell.bar).map(|e| e.pitch));
        }
        let scale: BTreeSet<u8> = key.scale().into_iter().collect();
        let in_register = |pcs: &BTreeSet<u8>| -> Vec<u8> {
            register.clone().filter(|p| pcs.contains(&(p % 12))).collect()
        };
        let mut material: Vec<u8> = vocab.into_iter().filter(|p| register.contains(p)).collect();
        if material.is_empty() {
            material = in_register(&scale);
        }
        let triad: BTreeSet<u8> = key.tonic_triad().into_iter().collect();
        let mut stable: Vec<u8> = material
            .iter()
            .copied()
            .filter(|p| triad.contains(&(p % 12)))
            .collect();
        if stable.is_empty() {
            stable = in_register(&triad);
        }
        let mut diatonic: Vec<u8> = material.clone();
        diatonic.extend(in_register(&scale));
        diatonic.sort_unstable();
        diatonic.dedup();
        let chromatic: Vec<u8> = register.clone().collect();

        let range = bar.clone();
        let bar_cloud = bar_cloud(window, cell.bar);
        let carried_cover = context_notes.iter().map(|e| e.overlap(&range)).max().unwrap_or(0);

        Self {
            profile,
            bar,
            slots,
            carried_cover,
            context_notes,
            bar_cloud,
            palettes: [stable, material, diatonic, chromatic],
        }
    }

    fn bar_len(&self) -> u64 {
        self.bar.end - self.bar.start
    }

    /// Draw a value inside `level`'s bin: the representative value for even
    /// candidates, uniform within the bin for odd ones.
    fn aim(kind: MetricKind, level: u8, index: usize, cap: f64, rng: &mut ChaCha8Rng) -> f64 {
        let rep = representative_value(kind, level);
        if index % 2 == 0 {
            return rep.min(cap);
        }
        let (lo, hi) = level_bounds(kind, level);
        let hi = if hi.is_finite() { hi } else { 2.0 * rep - lo };
        let hi = hi.min(cap);
        if hi <= lo {
            return lo.min(cap);
        }
        rng.random_range(lo..hi)
    }

    fn candidate(&self, target: &ControlLevels, index: usize, rng: &mut ChaCha8Rng) -> Vec<NoteEvent> {
        if target.density == 0 || target.polyphony == 0 || self.slots.is_empty() {
            return Vec::new();
        }
        let palette = &self.palettes[index % self.palettes.len()];
        if self.profile.is_monophonic() {
            self.monophonic(target, index, palette, rng)
        } else {
            self.chordal(target, index, palette, rng)
        }
    }

    fn onsets(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let count = count.clamp(1, self.slots.len());
        let mut picked: Vec<u64> = index::sample(rng, self.slots.len(), count)
            .into_iter()
            .map(|i| self.slots[i])
            .collect();
        picked.sort_unstable();
        picked
    }

    /// Durations filling roughly `occupation` of the bar without running
    /// into the next onset.
    fn durations(&self, onsets: &[u64], occupation: f64) -> Vec<u64> {
        let gaps: Vec<u64> = onsets
            .iter()
            .enumerate()
            .map(|(i, t)| onsets.get(i + 1).copied().unwrap_or(self.bar.end) - t)
            .collect();
        let wanted = (occupation * self.bar_len() as f64 - self.carried_cover as f64).max(0.0);
        let available: u64 = gaps.iter().sum();
        if available as f64 <= wanted {
            return gaps;
        }
        let ratio = wanted / available as f64;
        gaps.iter()
            .map(|g| ((*g as f64 * ratio).round() as u64).clamp(1, *g))
            .collect()
    }

    fn monophonic(
        &self,
        target: &ControlLevels,
        index: usize,
        palette: &[u8],
        rng: &mut ChaCha8Rng,
    ) -> Vec<NoteEvent> {
        let count = Self::aim(MetricKind::Density, target.density, index, self.slots.len() as f64, rng);
        let onsets = self.onsets(count.floor() as usize, rng);
        let occupation = Self::aim(MetricKind::Occupation, target.occupation, index, 1.0, rng);
        let durations = self.durations(&onsets, occupation);
        let mut previous: Option<u8> = None;
        onsets
            .iter()
            .zip(durations)
            .map(|(onset, duration)| {
                let pitch = step_pitch(palette, previous, rng);
                previous = Some(pitch);
                NoteEvent::new(pitch, *onset, duration, VELOCITY)
            })
            .collect()
    }

    fn chordal(
        &self,
        target: &ControlLevels,
        index: usize,
        palette: &[u8],
        rng: &mut ChaCha8Rng,
    ) -> Vec<NoteEvent> {
        let max_voices = self.profile.max_voices as f64;
        let poly = Self::aim(MetricKind::Polyphony, target.polyphony, index, max_voices, rng).max(1.0);
        let voices = (poly.ceil() as usize).clamp(self.profile.min_voices, self.profile.max_voices);
        let share = ((poly - 1.0) / (voices as f64 - 1.0)).clamp(0.02, 1.0);
        let count = Self::aim(MetricKind::Density, target.density, index, 64.0, rng);
        let chords = ((count / voices as f64).round() as usize).max(1);
        let onsets = self.onsets(chords, rng);
        let occupation = Self::aim(MetricKind::Occupation, target.occupation, index, 1.0, rng);
        let durations = self.durations(&onsets, occupation);

        let mut out = Vec::new();
        for (onset, duration) in onsets.iter().zip(durations) {
            let pitches = chord_pitches(palette, voices, &self.palettes[2], rng);
            for (i, pitch) in pitches.into_iter().enumerate() {
                let d = if i == 0 {
                    duration
                } else {
                    ((duration as f64 * share).round() as u64).clamp(1, duration)
                };
                out.push(NoteEvent::new(pitch, *onset, d, VELOCITY));
            }
        }
        out
    }
}

/// Next melodic pitch: anything in the palette to start, then a pitch within
/// a fifth of the previous one when available.
fn step_pitch(palette: &[u8], previous: Option<u8>, rng: &mut ChaCha8Rng) -> u8 {
    if let Some(prev) = previous {
        let near: Vec<u8> = palette
            .iter()
            .copied()
            .filter(|p| p.abs_diff(prev) <= 7)
            .collect();
        if !near.is_empty() {
            return near[rng.random_range(0..near.len())];
        }
    }
    palette[rng.random_range(0..palette.len())]
}

/// `voices` distinct pitches, the first (held longest) being the lowest.
fn chord_pitches(palette: &[u8], voices: usize, fallback: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut pool: Vec<u8> = palette.to_vec();
    if pool.len() < voices {
        pool.extend(fallback.iter().copied().filter(|p| !palette.contains(p)));
    }
    let take = voices.min(pool.len());
    let mut picked: Vec<u8> = index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}
