//! Controllability attributes: per-track density, polyphony and occupation,
//! their 0-9 levels, spiral-array tonal tension and key estimation.

mod key;
mod levels;
mod spiral;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::score::{NoteEvent, ScoreWindow};

pub use key::{
    estimate_key, estimate_key_from_histogram, estimate_score_key, pitch_class_histogram,
    KeyError, KeyEstimate, Mode, MAJOR_PROFILE, MINOR_PROFILE,
};
pub use levels::{
    bin_edges, level_bounds, quantize_level, representative_value, ControlLevels, MetricKind,
    MAX_LEVEL,
};
pub use spiral::{
    bar_cloud, bar_tension, cloud_center, cloud_diameter, fifths_index, key_center, spiral_position,
    tension_profile, SpiralPoint, TensionError, TensionValue, SPIRAL_HEIGHT, SPIRAL_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawTrackMetrics {
    /// Note onsets in the bar.
    pub density: f64,
    /// Mean number of simultaneously sounding notes over the ticks where
    /// anything sounds.
    pub polyphony: f64,
    /// Fraction of the bar with at least one sounding note.
    pub occupation: f64,
}

impl RawTrackMetrics {
    pub fn levels(&self) -> ControlLevels {
        ControlLevels::from_raw(self)
    }
}

/// Metrics of one bar. `owned` notes count as onsets when they start inside
/// `bar`; `context` notes (begun before the window) only contribute sound.
pub fn bar_metrics<'a>(
    owned: impl IntoIterator<Item = &'a NoteEvent>,
    context: impl IntoIterator<Item = &'a NoteEvent>,
    bar: Range<u64>,
) -> RawTrackMetrics {
    let mut onsets = 0usize;
    let mut spans: Vec<(u64, u64)> = Vec::new();
    for e in owned {
        if bar.contains(&e.onset) {
            onsets += 1;
        }
        push_span(&mut spans, e, &bar);
    }
    for e in context {
        push_span(&mut spans, e, &bar);
    }
    let total: u64 = spans.iter().map(|(a, b)| b - a).sum();
    let union = union_length(&mut spans);
    let bar_len = bar.end - bar.start;
    RawTrackMetrics {
        density: onsets as f64,
        polyphony: if union == 0 {
            0.0
        } else {
            total as f64 / union as f64
        },
        occupation: union as f64 / bar_len as f64,
    }
}

fn push_span(spans: &mut Vec<(u64, u64)>, e: &NoteEvent, bar: &Range<u64>) {
    let lo = e.onset.max(bar.start);
    let hi = e.end().min(bar.end);
    if hi > lo {
        spans.push((lo, hi));
    }
}

fn union_length(spans: &mut [(u64, u64)]) -> u64 {
    spans.sort_unstable();
    let mut total = 0;
    let mut current: Option<(u64, u64)> = None;
    for &(a, b) in spans.iter() {
        match current {
            Some((ca, cb)) if a <= cb => current = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((a, b)) = current {
        total += b - a;
    }
    total
}

/// Per-bar metrics of one window track.
pub fn raw_metrics(window: &ScoreWindow, track: usize) -> Vec<RawTrackMetrics> {
    (0..window.length)
        .map(|bar| {
            bar_metrics(
                &window.tracks[track].events,
                &window.carried[track],
                window.bar_range(bar),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAR: Range<u64> = 0..1920;

    #[test]
    fn empty_bar_is_all_zero() {
        let m = bar_metrics(&[], &[], BAR);
        assert_eq!(m, RawTrackMetrics::default());
        assert_eq!(m.levels(), ControlLevels::default());
    }

    #[test]
    fn two_quarter_notes() {
        let notes = [NoteEvent::new(60, 0, 480, 80), NoteEvent::new(62, 960, 480, 80)];
        let m = bar_metrics(&notes, &[], BAR);
        assert_eq!(m.density, 2.0);
        assert_eq!(m.polyphony, 1.0);
        assert_eq!(m.occupation, 0.5);
    }

    #[test]
    fn whole_bar_triad() {
        let notes = [60, 64, 67].map(|p| NoteEvent::new(p, 0, 1920, 80));
        let m = bar_metrics(&notes, &[], BAR);
        assert_eq!((m.density, m.polyphony, m.occupation), (3.0, 3.0, 1.0));
    }

    #[test]
    fn carried_notes_sound_but_do_not_count() {
        let carried = [NoteEvent::new(60, 0, 960, 80)];
        let m = bar_metrics(&[], &carried, BAR);
        assert_eq!((m.density, m.polyphony, m.occupation), (0.0, 1.0, 0.5));
    }

    #[test]
    fn notes_outside_bar_clip() {
        let notes = [NoteEvent::new(60, 1440, 960, 80), NoteEvent::new(64, 1920, 480, 80)];
        let m = bar_metrics(&notes, &[], BAR);
        assert_eq!((m.density, m.occupation), (1.0, 0.25));
    }
}
