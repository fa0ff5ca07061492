use serde::{Deserialize, Serialize};

use crate::metrics::{
    estimate_key, estimate_score_key, raw_metrics, tension_profile, ControlLevels, KeyEstimate,
    RawTrackMetrics, TensionValue,
};
use crate::score::{Metre, Score, ScoreError, ScoreWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub raw: RawTrackMetrics,
    pub levels: ControlLevels,
}

/// Everything computed for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAnalysis {
    pub origin_bar: usize,
    pub bars: usize,
    pub key: KeyEstimate,
    /// Indexed `[track][bar]`.
    pub cells: Vec<Vec<CellMetrics>>,
    pub tension: Vec<TensionValue>,
}

impl WindowAnalysis {
    pub fn levels(&self, track: usize, bar: usize) -> ControlLevels {
        self.cells[track][bar].levels
    }
}

/// Analyze a window with its own key estimate. A silent window falls back
/// to C major with zero confidence.
pub fn analyze_window(window: &ScoreWindow) -> WindowAnalysis {
    let key = estimate_key(window).unwrap_or_else(|_| KeyEstimate::fallback());
    analyze_window_in_key(window, key)
}

pub fn analyze_window_in_key(window: &ScoreWindow, key: KeyEstimate) -> WindowAnalysis {
    let cells = (0..window.tracks.len())
        .map(|t| {
            raw_metrics(window, t)
                .into_iter()
                .map(|raw| CellMetrics {
                    raw,
                    levels: raw.levels(),
                })
                .collect()
        })
        .collect();
    WindowAnalysis {
        origin_bar: window.origin_bar,
        bars: window.length,
        key,
        cells,
        tension: tension_profile(window, &key),
    }
}

/// What the loader displays about a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSummary {
    pub track_count: usize,
    pub bar_count: usize,
    pub metre: Metre,
    pub tempo_bpm: f64,
    pub ppq: u16,
    pub key: KeyEstimate,
}

impl MetaSummary {
    pub fn of(score: &Score) -> Result<Self, ScoreError> {
        Ok(Self {
            track_count: score.tracks.len(),
            bar_count: score.bar_count()?,
            metre: score.metre,
            tempo_bpm: score.tempo.bpm(),
            ppq: score.ppq,
            key: estimate_score_key(score).unwrap_or_else(|_| KeyEstimate::fallback()),
        })
    }
}
