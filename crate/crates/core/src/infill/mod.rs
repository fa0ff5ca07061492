//! Regenerate selected (track, bar) cells of a window under control targets.
//!
//! [`infill`] clears the selected cells, asks a [`GeneratorPort`] for new
//! notes, checks them against the role constraints and recomputes every
//! metric on the result. Notes whose onset lies outside the region are never
//! touched.

mod baseline;
pub mod remote;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze_window, analyze_window_in_key, WindowAnalysis};
use crate::metrics::{ControlLevels, KeyEstimate, TensionValue, MAX_LEVEL};
use crate::score::{NoteEvent, ScoreWindow, TrackRole, MAX_TRACKS};

pub use baseline::{cell_seed, BaselineGenerator};

/// One track in one window bar (0-based). Ordered bar-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub track: usize,
    pub bar: usize,
}

impl Cell {
    pub fn new(track: usize, bar: usize) -> Self {
        Self { track, bar }
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.bar, self.track).cmp(&(other.bar, other.track))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "track {} bar {}", self.track, self.bar)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InfillError {
    #[error("the region selects no cells")]
    EmptyRegion,
    #[error("{0} is outside the window")]
    CellOutOfRange(Cell),
    #[error("level {value} for {what} is outside 0-9")]
    LevelOutOfRange { what: String, value: u8 },
    #[error("{0}")]
    TargetShape(String),
    #[error("generation failed for {} cell(s): {reason}", cells.len())]
    GeneratorFailure { cells: Vec<Cell>, reason: String },
}

/// The non-empty set of cells to regenerate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    cells: BTreeSet<Cell>,
}

impl RegionSpec {
    pub fn new(cells: impl IntoIterator<Item = Cell>) -> Result<Self, InfillError> {
        let cells: BTreeSet<Cell> = cells.into_iter().collect();
        if cells.is_empty() {
            return Err(InfillError::EmptyRegion);
        }
        Ok(Self { cells })
    }

    pub fn single(track: usize, bar: usize) -> Self {
        Self {
            cells: BTreeSet::from([Cell::new(track, bar)]),
        }
    }

    /// All three tracks of one bar.
    pub fn whole_bar(bar: usize) -> Self {
        Self {
            cells: (0..MAX_TRACKS).map(|t| Cell::new(t, bar)).collect(),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter()
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        self.cells.contains(cell)
    }

    pub fn contains_onset(&self, window: &ScoreWindow, track: usize, onset: u64) -> bool {
        window
            .bar_of(onset)
            .is_some_and(|bar| self.cells.contains(&Cell::new(track, bar)))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn bars(&self) -> BTreeSet<usize> {
        self.cells.iter().map(|c| c.bar).collect()
    }
}

/// Every cell must address an existing track and window bar. Tracks with
/// the Empty role are valid targets.
pub fn validate_region(window: &ScoreWindow, region: &RegionSpec) -> Result<(), InfillError> {
    if region.is_empty() {
        return Err(InfillError::EmptyRegion);
    }
    match region
        .cells()
        .find(|c| c.track >= window.tracks.len() || c.bar >= window.length)
    {
        Some(c) => Err(InfillError::CellOutOfRange(*c)),
        None => Ok(()),
    }
}

/// User-facing targets: levels per track and a tension level per bar.
/// `None` entries (and missing trailing entries) keep the current value.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlTarget {
    pub tracks: Vec<Option<ControlLevels>>,
    pub tension: Vec<Option<u8>>,
}

/// Targets with every selected cell and bar filled in.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResolvedTargets {
    pub cells: BTreeMap<Cell, ControlLevels>,
    pub tension: BTreeMap<usize, u8>,
}

impl ControlTarget {
    pub fn validate(&self, tracks: usize, bars: usize) -> Result<(), InfillError> {
        if self.tracks.len() > tracks {
            return Err(InfillError::TargetShape(format!(
                "{} track targets for {tracks} tracks",
                self.tracks.len()
            )));
        }
        if self.tension.len() > bars {
            return Err(InfillError::TargetShape(format!(
                "{} tension levels for a {bars}-bar window",
                self.tension.len()
            )));
        }
        for (t, levels) in self.tracks.iter().enumerate() {
            if let Some(l) = levels {
                for (name, v) in [
                    ("density", l.density),
                    ("polyphony", l.polyphony),
                    ("occupation", l.occupation),
                ] {
                    if v > MAX_LEVEL {
                        return Err(InfillError::LevelOutOfRange {
                            what: format!("track {t} {name}"),
                            value: v,
                        });
                    }
                }
            }
        }
        for (bar, level) in self.tension.iter().enumerate() {
            if let Some(v) = level.filter(|v| *v > MAX_LEVEL) {
                return Err(InfillError::LevelOutOfRange {
                    what: format!("bar {bar} tension"),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Fill in defaults from the current analysis for every selected cell.
    pub fn resolve(
        &self,
        current: &WindowAnalysis,
        region: &RegionSpec,
    ) -> Result<ResolvedTargets, InfillError> {
        self.validate(current.cells.len(), current.bars)?;
        let cells = region
            .cells()
            .map(|c| {
                let levels = self
                    .tracks
                    .get(c.track)
                    .copied()
                    .flatten()
                    .unwrap_or_else(|| current.levels(c.track, c.bar));
                (*c, levels)
            })
            .collect();
        let tension = region
            .bars()
            .into_iter()
            .map(|b| {
                let level = self
                    .tension
                    .get(b)
                    .copied()
                    .flatten()
                    .unwrap_or(current.tension[b].tension_level);
                (b, level)
            })
            .collect();
        Ok(ResolvedTargets { cells, tension })
    }
}

/// Pitch range and voice count a role's notes must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoleProfile {
    pub low: u8,
    pub high: u8,
    /// Notes starting together: at least `min_voices`, at most `max_voices`.
    pub min_voices: usize,
    pub max_voices: usize,
}

impl RoleProfile {
    pub fn of(role: TrackRole) -> RoleProfile {
        match role {
            TrackRole::Melody => RoleProfile {
                low: 60,
                high: 84,
                min_voices: 1,
                max_voices: 1,
            },
            TrackRole::Bass => RoleProfile {
                low: 28,
                high: 52,
                min_voices: 1,
                max_voices: 1,
            },
            TrackRole::Harmony | TrackRole::Empty => RoleProfile {
                low: 48,
                high: 72,
                min_voices: 2,
                max_voices: 5,
            },
        }
    }

    pub fn is_monophonic(&self) -> bool {
        self.max_voices == 1
    }

    pub fn register(&self) -> std::ops::RangeInclusive<u8> {
        self.low..=self.high
    }
}

/// Roles used for generation: Empty tracks take the roles nobody claimed,
/// in melody, bass, harmony order.
pub fn effective_roles(roles: &[TrackRole]) -> Vec<TrackRole> {
    let mut missing = TrackRole::ASSIGNABLE
        .into_iter()
        .filter(|r| !roles.contains(r));
    roles
        .iter()
        .map(|r| match r {
            TrackRole::Empty => missing.next().unwrap_or(TrackRole::Harmony),
            other => *other,
        })
        .collect()
}

/// Everything a generator sees.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub window: &'a ScoreWindow,
    /// Effective role per window track.
    pub roles: &'a [TrackRole],
    pub region: &'a RegionSpec,
    pub targets: &'a ResolvedTargets,
    pub key: KeyEstimate,
    pub seed: u64,
}

/// New notes per region cell.
pub type CellOutput = BTreeMap<Cell, Vec<NoteEvent>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("no valid candidate for {} cell(s)", cells.len())]
    Exhausted { cells: Vec<Cell> },
    #[error("remote generator timed out or is unreachable: {0}")]
    Timeout(String),
    #[error("remote protocol error: {0}")]
    Protocol(String),
    #[error("remote output rejected: {0}")]
    InvalidRemoteOutput(String),
}

/// The extension point for note generation. Implementations must be
/// deterministic for a given request and seed, and must only emit notes that
/// pass [`validate_cell_events`] for their cell.
pub trait GeneratorPort {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<CellOutput, GeneratorError>;
}

impl<G: GeneratorPort + ?Sized> GeneratorPort for &G {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<CellOutput, GeneratorError> {
        (**self).generate(request)
    }
}

/// Remove the notes owned by region cells.
pub fn clear_region(window: &ScoreWindow, region: &RegionSpec) -> ScoreWindow {
    let mut out = window.clone();
    for (ti, track) in out.tracks.iter_mut().enumerate() {
        track
            .events
            .retain(|e| !region.contains_onset(window, ti, e.onset));
    }
    out
}

/// Check `events` for `cell` against its role and the notes already in
/// `window` (which must not contain other notes for that cell).
pub fn validate_cell_events(
    window: &ScoreWindow,
    roles: &[TrackRole],
    cell: Cell,
    events: &[NoteEvent],
) -> Result<(), String> {
    let role = *roles
        .get(cell.track)
        .ok_or_else(|| format!("{cell}: no such track"))?;
    let profile = RoleProfile::of(role);
    let range = window.bar_range(cell.bar);
    for e in events {
        if e.onset < range.start || e.end() > range.end {
            return Err(format!("{cell}: note at {}..{} leaves the bar", e.onset, e.end()));
        }
        if e.duration == 0 || !(1..=127).contains(&e.velocity) {
            return Err(format!("{cell}: invalid duration or velocity"));
        }
        if !profile.register().contains(&e.pitch) {
            return Err(format!("{cell}: pitch {} outside the {role} register", e.pitch));
        }
    }
    let mut sorted = events.to_vec();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[0].onset == pair[1].onset && pair[0].pitch == pair[1].pitch {
            return Err(format!("{cell}: duplicate note"));
        }
    }
    let mut i = 0;
    while i < sorted.len() {
        let group = sorted[i..].iter().take_while(|e| e.onset == sorted[i].onset).count();
        if group < profile.min_voices || group > profile.max_voices {
            return Err(format!("{cell}: {group} notes start together, {role} allows {}-{}",
                profile.min_voices, profile.max_voices));
        }
        i += group;
    }
    if max_simultaneous(&sorted) > profile.max_voices {
        return Err(format!("{cell}: more than {} simultaneous notes", profile.max_voices));
    }
    let existing: Vec<&NoteEvent> = window.tracks[cell.track]
        .events
        .iter()
        .chain(window.carried[cell.track].iter())
        .filter(|c| c.overlap(&range) > 0)
        .collect();
    for e in events {
        for c in &existing {
            let overlaps = e.onset < c.end() && c.onset < e.end();
            if overlaps && (c.pitch == e.pitch || profile.is_monophonic()) {
                return Err(format!("{cell}: note at {} collides with existing note", e.onset));
            }
        }
    }
    Ok(())
}

fn max_simultaneous(events: &[NoteEvent]) -> usize {
    let mut points: Vec<(u64, i32)> = events
        .iter()
        .flat_map(|e| [(e.onset, 1), (e.end(), -1)])
        .collect();
    // ends sort before starts at the same tick
    points.sort();
    let mut cur = 0i32;
    let mut best = 0i32;
    for (_, d) in points {
        cur += d;
        best = best.max(cur);
    }
    best as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillResult {
    pub window: ScoreWindow,
    pub key: KeyEstimate,
    pub targets: ResolvedTargets,
    /// Recomputed on `window` with `key`.
    pub analysis: WindowAnalysis,
    pub achieved: BTreeMap<Cell, ControlLevels>,
    pub deltas: BTreeMap<Cell, ControlLevels>,
    /// Achieved tension of every region bar and its distance to the target.
    pub tension: BTreeMap<usize, TensionValue>,
    pub tension_deltas: BTreeMap<usize, u8>,
}

/// Regenerate `region` of `window`. The input is never modified; on
/// failure the caller keeps the original window.
pub fn infill(
    window: &ScoreWindow,
    region: &RegionSpec,
    targets: &ControlTarget,
    seed: u64,
    generator: &dyn GeneratorPort,
) -> Result<InfillResult, InfillError> {
    validate_region(window, region)?;
    let before = analyze_window(window);
    let key = before.key;
    let resolved = targets.resolve(&before, region)?;
    let roles = effective_roles(&window.roles());
    let request = GenerationRequest {
        window,
        roles: &roles,
        region,
        targets: &resolved,
        key,
        seed,
    };
    let all_cells = || region.cells().copied().collect::<Vec<_>>();
    let output = generator
        .generate(&request)
        .map_err(|e| InfillError::GeneratorFailure {
            cells: match &e {
                GeneratorError::Exhausted { cells } => cells.clone(),
                _ => all_cells(),
            },
            reason: e.to_string(),
        })?;
    let new_window = apply_output(window, region, &roles, &output)?;

    let analysis = analyze_window_in_key(&new_window, key);
    let achieved: BTreeMap<Cell, ControlLevels> = region
        .cells()
        .map(|c| (*c, analysis.levels(c.track, c.bar)))
        .collect();
    let deltas = achieved
        .iter()
        .map(|(c, l)| (*c, l.delta(&resolved.cells[c])))
        .collect();
    let tension: BTreeMap<usize, TensionValue> = region
        .bars()
        .into_iter()
        .map(|b| (b, analysis.tension[b]))
        .collect();
    let tension_deltas = tension
        .iter()
        .map(|(b, t)| (*b, t.tension_level.abs_diff(resolved.tension[b])))
        .collect();
    Ok(InfillResult {
        window: new_window,
        key,
        targets: resolved,
        analysis,
        achieved,
        deltas,
        tension,
        tension_deltas,
    })
}

fn apply_output(
    window: &ScoreWindow,
    region: &RegionSpec,
    roles: &[TrackRole],
    output: &CellOutput,
) -> Result<ScoreWindow, InfillError> {
    if let Some(extra) = output.keys().find(|c| !region.contains(c)) {
        return Err(InfillError::GeneratorFailure {
            cells: vec![*extra],
            reason: format!("generator wrote outside the region ({extra})"),
        });
    }
    let mut working = clear_region(window, region);
    for cell in region.cells() {
        let events = output.get(cell).ok_or_else(|| InfillError::GeneratorFailure {
            cells: vec![*cell],
            reason: format!("generator returned nothing for {cell}"),
        })?;
        validate_cell_events(&working, roles, *cell, events).map_err(|reason| {
            InfillError::GeneratorFailure {
                cells: vec![*cell],
                reason,
            }
        })?;
        let track = &mut working.tracks[cell.track].events;
        track.extend_from_slice(events);
        track.sort();
    }
    Ok(working)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{slice_window, Metre, Score, Tempo, Track};

    fn window(bars: u64) -> ScoreWindow {
        let melody = (0..bars).map(|b| NoteEvent::new(72, b * 1920, 960, 90)).collect();
        let bass = (0..bars).map(|b| NoteEvent::new(36, b * 1920, 1920, 90)).collect();
        let score = Score {
            ppq: 480,
            tempo: Tempo::DEFAULT,
            metre: Metre::COMMON,
            tracks: vec![
                Track::new(TrackRole::Melody, 0, melody),
                Track::new(TrackRole::Bass, 1, bass),
                Track::empty(2),
            ],
            end_tick: bars * 1920,
        };
        slice_window(&score, 1).unwrap()
    }

    #[test]
    fn region_validation() {
        let w = window(16);
        assert!(validate_region(&w, &RegionSpec::single(0, 5)).is_ok());
        assert_eq!(
            validate_region(&w, &RegionSpec::single(0, 17)),
            Err(InfillError::CellOutOfRange(Cell::new(0, 17)))
        );
        assert_eq!(RegionSpec::new([]), Err(InfillError::EmptyRegion));
        let all = RegionSpec::whole_bar(3);
        assert_eq!(
            all.cells().copied().collect::<Vec<_>>(),
            vec![Cell::new(0, 3), Cell::new(1, 3), Cell::new(2, 3)]
        );
        // the empty third track is a valid target
        assert!(validate_region(&w, &all).is_ok());
    }

    #[test]
    fn effective_roles_fill_gaps() {
        use TrackRole::*;
        assert_eq!(effective_roles(&[Melody, Empty, Empty]), vec![Melody, Bass, Harmony]);
        assert_eq!(effective_roles(&[Empty, Harmony, Empty]), vec![Melody, Harmony, Bass]);
        assert_eq!(effective_roles(&[Bass, Melody, Harmony]), vec![Bass, Melody, Harmony]);
    }

    #[test]
    fn targets_default_to_current_levels() {
        let w = window(4);
        let analysis = analyze_window(&w);
        let region = RegionSpec::new([Cell::new(0, 1), Cell::new(1, 2)]).unwrap();
        let target = ControlTarget {
            tracks: vec![None, Some(ControlLevels::new(2, 1, 5))],
            tension: vec![None, Some(4)],
        };
        let r = target.resolve(&analysis, &region).unwrap();
        assert_eq!(r.cells[&Cell::new(0, 1)], analysis.levels(0, 1));
        assert_eq!(r.cells[&Cell::new(1, 2)], ControlLevels::new(2, 1, 5));
        assert_eq!(r.tension[&1], 4);
        assert_eq!(r.tension[&2], analysis.tension[2].tension_level);
    }

    #[test]
    fn bad_levels_rejected() {
        let w = window(4);
        let analysis = analyze_window(&w);
        let region = RegionSpec::single(0, 0);
        let high = ControlTarget {
            tracks: vec![Some(ControlLevels::new(12, 1, 1))],
            tension: vec![],
        };
        assert!(matches!(
            high.resolve(&analysis, &region),
            Err(InfillError::LevelOutOfRange { value: 12, .. })
        ));
        let long = ControlTarget {
            tracks: vec![],
            tension: vec![Some(1); 5],
        };
        assert!(matches!(long.resolve(&analysis, &region), Err(InfillError::TargetShape(_))));
    }

    #[test]
    fn cell_validation_rules() {
        let w = window(2);
        let roles = effective_roles(&w.roles());
        let cleared = clear_region(&w, &RegionSpec::single(0, 1));
        let ok = [NoteEvent::new(72, 1920, 480, 80), NoteEvent::new(74, 2400, 480, 80)];
        assert!(validate_cell_events(&cleared, &roles, Cell::new(0, 1), &ok).is_ok());
        let low = [NoteEvent::new(40, 1920, 480, 80)];
        assert!(validate_cell_events(&cleared, &roles, Cell::new(0, 1), &low).is_err());
        let outside = [NoteEvent::new(72, 1900, 480, 80)];
        assert!(validate_cell_events(&cleared, &roles, Cell::new(0, 1), &outside).is_err());
        let chord = [NoteEvent::new(72, 1920, 480, 80), NoteEvent::new(76, 1920, 480, 80)];
        assert!(validate_cell_events(&cleared, &roles, Cell::new(0, 1), &chord).is_err());
        // harmony needs at least two voices per onset
        let single = [NoteEvent::new(60, 1920, 480, 80)];
        assert!(validate_cell_events(&cleared, &roles, Cell::new(2, 1), &single).is_err());
        let triad = [60, 64, 67].map(|p| NoteEvent::new(p, 1920, 480, 80));
        assert!(validate_cell_events(&cleared, &roles, Cell::new(2, 1), &triad).is_ok());
        // melody note colliding with the uncleared bar-1 melody note
        assert!(validate_cell_events(&w, &roles, Cell::new(0, 1), &ok).is_err());
    }
}
