use serde::{Deserialize, Serialize};

use super::RawTrackMetrics;

pub const MAX_LEVEL: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Density,
    Polyphony,
    Occupation,
    TensileStrain,
}

const DENSITY_EDGES: [f64; 11] = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, f64::INFINITY];
const POLYPHONY_EDGES: [f64; 11] = [0.0, 1.0, 1.2, 1.6, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, f64::INFINITY];
// Top bin is [0.9, 1.0]; anything above saturates into it.
const OCCUPATION_EDGES: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const STRAIN_EDGES: [f64; 11] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, f64::INFINITY];

/// Bin edges for `kind`. Level `l` covers `[edges[l], edges[l + 1])`.
pub fn bin_edges(kind: MetricKind) -> &'static [f64; 11] {
    match kind {
        MetricKind::Density => &DENSITY_EDGES,
        MetricKind::Polyphony => &POLYPHONY_EDGES,
        MetricKind::Occupation => &OCCUPATION_EDGES,
        MetricKind::TensileStrain => &STRAIN_EDGES,
    }
}

/// Level 0-9 of a raw value: the number of interior edges at or below it.
pub fn quantize_level(raw: f64, kind: MetricKind) -> u8 {
    let edges = bin_edges(kind);
    edges[1..10].iter().take_while(|edge| raw >= **edge).count() as u8
}

/// Lower and upper bound of a level's bin.
pub fn level_bounds(kind: MetricKind, level: u8) -> (f64, f64) {
    let edges = bin_edges(kind);
    let l = usize::from(level.min(MAX_LEVEL));
    (edges[l], edges[l + 1])
}

/// A value a generator should aim for to land in `level`: the bin midpoint,
/// or for an open top bin, half the previous bin width above its lower edge.
pub fn representative_value(kind: MetricKind, level: u8) -> f64 {
    let (lo, hi) = level_bounds(kind, level);
    if hi.is_finite() {
        (lo + hi) / 2.0
    } else {
        let (prev_lo, _) = level_bounds(kind, level - 1);
        lo + (lo - prev_lo) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ControlLevels {
    pub density: u8,
    pub polyphony: u8,
    pub occupation: u8,
}

impl ControlLevels {
    pub fn new(density: u8, polyphony: u8, occupation: u8) -> Self {
        Self {
            density,
            polyphony,
            occupation,
        }
    }

    pub fn from_raw(raw: &RawTrackMetrics) -> Self {
        Self {
            density: quantize_level(raw.density, MetricKind::Density),
            polyphony: quantize_level(raw.polyphony, MetricKind::Polyphony),
            occupation: quantize_level(raw.occupation, MetricKind::Occupation),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.density <= MAX_LEVEL && self.polyphony <= MAX_LEVEL && self.occupation <= MAX_LEVEL
    }

    /// Per-metric absolute differences.
    pub fn delta(&self, other: &ControlLevels) -> ControlLevels {
        ControlLevels {
            density: self.density.abs_diff(other.density),
            polyphony: self.polyphony.abs_diff(other.polyphony),
            occupation: self.occupation.abs_diff(other.occupation),
        }
    }
}
