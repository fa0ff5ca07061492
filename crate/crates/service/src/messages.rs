//! Request and response bodies of the session endpoints. Field names match
//! `docs/protocol.schema.json`.

use infillkit::analysis::{MetaSummary, WindowAnalysis};
use infillkit::wire::BarLevelMsg;
use infillkit::{
    Cell, ControlLevels, ControlTarget, KeyEstimate, NoteEvent, RawTrackMetrics, ScoreWindow,
    TensionValue, TrackRole,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    /// Base64 Standard MIDI File.
    pub midi: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub summary: MetaSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetRolesRequest {
    pub roles: Vec<TrackRole>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetRolesResponse {
    /// One role per track after empty tracks were added.
    pub roles: Vec<TrackRole>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    /// 1-based first bar of the window.
    pub origin_bar: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackView {
    pub track: usize,
    pub role: TrackRole,
    pub channel: u8,
    /// Notes starting inside the window, clipped at its end.
    pub notes: Vec<NoteEvent>,
    /// Notes begun before the window, clipped at its start.
    pub carried: Vec<NoteEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellAnalysisMsg {
    pub track: usize,
    pub bar: usize,
    pub density: u8,
    pub polyphony: u8,
    pub occupation: u8,
    pub raw: RawTrackMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarTensionMsg {
    pub bar: usize,
    pub tensile_strain: f64,
    pub cloud_diameter: f64,
    pub cloud_momentum: f64,
    pub tension_level: u8,
}

impl BarTensionMsg {
    pub fn new(bar: usize, t: &TensionValue) -> Self {
        Self {
            bar,
            tensile_strain: t.tensile_strain,
            cloud_diameter: t.cloud_diameter,
            cloud_momentum: t.cloud_momentum,
            tension_level: t.tension_level,
        }
    }
}

/// Controls of one window. Bars are 0-based window bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisMsg {
    pub summary: MetaSummary,
    pub origin_bar: usize,
    pub bars: usize,
    pub key: KeyEstimate,
    pub roles: Vec<TrackRole>,
    pub tracks: Vec<TrackView>,
    pub cells: Vec<CellAnalysisMsg>,
    pub tension: Vec<BarTensionMsg>,
}

impl AnalysisMsg {
    pub fn new(summary: MetaSummary, window: &ScoreWindow, analysis: &WindowAnalysis) -> Self {
        let tracks = window
            .tracks
            .iter()
            .enumerate()
            .map(|(i, t)| TrackView {
                track: i,
                role: t.role,
                channel: t.channel,
                notes: t.events.clone(),
                carried: window.carried[i].clone(),
            })
            .collect();
        let cells = analysis
            .cells
            .iter()
            .enumerate()
            .flat_map(|(track, bars)| {
                bars.iter().enumerate().map(move |(bar, c)| CellAnalysisMsg {
                    track,
                    bar,
                    density: c.levels.density,
                    polyphony: c.levels.polyphony,
                    occupation: c.levels.occupation,
                    raw: c.raw,
                })
            })
            .collect();
        Self {
            summary,
            origin_bar: analysis.origin_bar,
            bars: analysis.bars,
            key: analysis.key,
            roles: window.roles(),
            tracks,
            cells,
            tension: analysis
                .tension
                .iter()
                .enumerate()
                .map(|(b, t)| BarTensionMsg::new(b, t))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRef {
    pub track: usize,
    pub bar: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackLevelsMsg {
    pub track: usize,
    pub density: u8,
    pub polyphony: u8,
    pub occupation: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Baseline,
    Remote,
}

/// Cells to regenerate plus optional targets. Tracks and bars without a
/// target keep their current levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfillRequestMsg {
    pub cells: Vec<CellRef>,
    #[serde(default)]
    pub levels: Vec<TrackLevelsMsg>,
    #[serde(default)]
    pub tension: Vec<BarLevelMsg>,
    pub seed: u64,
    #[serde(default)]
    pub generator: GeneratorKind,
}

impl InfillRequestMsg {
    pub fn region_cells(&self) -> Vec<Cell> {
        self.cells.iter().map(|c| Cell::new(c.track, c.bar)).collect()
    }

    /// Targets in engine form. Out-of-range indices are reported by the
    /// engine's own validation, so this only rejects duplicates.
    pub fn control_target(&self, tracks: usize, bars: usize) -> Result<ControlTarget, String> {
        let mut target = ControlTarget::default();
        for l in &self.levels {
            if l.track >= tracks {
                return Err(format!("levels for track {}, window has {tracks}", l.track));
            }
            if target.tracks.len() <= l.track {
                target.tracks.resize(l.track + 1, None);
            }
            if target.tracks[l.track].is_some() {
                return Err(format!("levels for track {} given twice", l.track));
            }
            target.tracks[l.track] = Some(ControlLevels::new(l.density, l.polyphony, l.occupation));
        }
        for t in &self.tension {
            if t.bar >= bars {
                return Err(format!("tension for bar {}, window has {bars}", t.bar));
            }
            if target.tension.len() <= t.bar {
                target.tension.resize(t.bar + 1, None);
            }
            if target.tension[t.bar].is_some() {
                return Err(format!("tension for bar {} given twice", t.bar));
            }
            target.tension[t.bar] = Some(t.level);
        }
        Ok(target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellOutcomeMsg {
    pub track: usize,
    pub bar: usize,
    pub target: ControlLevels,
    pub achieved: ControlLevels,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarOutcomeMsg {
    pub bar: usize,
    pub target: u8,
    pub achieved: BarTensionMsg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfillResponseMsg {
    /// Controls of the pending result's window.
    pub analysis: AnalysisMsg,
    /// The whole score with the pending result merged in, base64.
    pub midi: String,
    pub cells: Vec<CellOutcomeMsg>,
    pub bars: Vec<BarOutcomeMsg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveRequest {
    pub keep: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveResponse {
    pub kept: bool,
    /// Snapshots in the history, the loaded score included.
    pub history_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportResponse {
    pub midi: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthResponse {
    pub status: String,
    pub sessions: usize,
    pub version: String,
}
