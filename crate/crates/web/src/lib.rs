//! Browser bindings for the demo page in `www/`.
//!
//! The page keeps the current file as bytes and calls three functions:
//! [`demo_song`], [`analyze`] and [`infill`]. Results are JSON strings. The
//! plain Rust versions (`*_json`) are what the tests exercise.

use infillkit::analysis::MetaSummary;
use infillkit::synth::{synth_score, SynthSpec};
use infillkit::wire::encode_midi;
use infillkit::{
    analyze_window, assign_roles, infill as run_infill, parse_midi, serialize_midi, slice_window,
    BaselineGenerator, Cell, ControlLevels, ControlTarget, NoteEvent, RegionSpec, Score,
    ScoreWindow, TensionValue, TrackRole, WindowAnalysis,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct TrackView {
    pub role: TrackRole,
    /// Window-relative ticks.
    pub notes: Vec<NoteEvent>,
    pub carried: Vec<NoteEvent>,
}

/// Everything the page draws for one window.
#[derive(Debug, Serialize)]
pub struct WindowView {
    pub summary: MetaSummary,
    pub origin_bar: usize,
    pub bars: usize,
    pub bar_ticks: u64,
    pub key: String,
    pub tracks: Vec<TrackView>,
    /// `[track][bar]`.
    pub levels: Vec<Vec<ControlLevels>>,
    pub tension: Vec<TensionValue>,
}

impl WindowView {
    fn new(score: &Score, window: &ScoreWindow, analysis: &WindowAnalysis) -> Result<Self, String> {
        let start = (window.origin_bar as u64 - 1) * window.bar_ticks;
        let shift = |events: &[NoteEvent]| -> Vec<NoteEvent> {
            events
                .iter()
                .map(|e| NoteEvent { onset: e.onset - start, ..*e })
                .collect()
        };
        Ok(Self {
            summary: MetaSummary::of(score).map_err(|e| e.to_string())?,
            origin_bar: window.origin_bar,
            bars: window.length,
            bar_ticks: window.bar_ticks,
            key: analysis.key.to_string(),
            tracks: window
                .tracks
                .iter()
                .zip(&window.carried)
                .map(|(t, c)| TrackView {
                    role: t.role,
                    notes: shift(&t.events),
                    carried: shift(c),
                })
                .collect(),
            levels: analysis
                .cells
                .iter()
                .map(|bars| bars.iter().map(|c| c.levels).collect())
                .collect(),
            tension: analysis.tension.clone(),
        })
    }
}

#[derive(Debug, Deserialize)]
pub struct InfillRequest {
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub target: ControlTarget,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct CellOutcome {
    pub track: usize,
    pub bar: usize,
    pub target: ControlLevels,
    pub achieved: ControlLevels,
}

#[derive(Debug, Serialize)]
pub struct InfillView {
    pub view: WindowView,
    /// The merged file, base64.
    pub midi: String,
    pub cells: Vec<CellOutcome>,
}

fn load(midi: &[u8], roles: &str) -> Result<Score, String> {
    let score = parse_midi(midi).map_err(|e| e.to_string())?;
    let roles: Vec<TrackRole> = roles
        .split(',')
        .filter(|r| !r.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let roles = if roles.is_empty() {
        vec![TrackRole::Empty; score.tracks.len()]
    } else {
        roles
    };
    assign_roles(&score, &roles).map_err(|e| e.to_string())
}

pub fn demo_song_bytes(seed: u64) -> Vec<u8> {
    let mut spec = SynthSpec::trio(24);
    spec.tonic = (seed % 12) as u8;
    serialize_midi(&synth_score(&spec, seed))
}

pub fn analyze_json(midi: &[u8], roles: &str, start_bar: usize) -> Result<String, String> {
    let score = load(midi, roles)?;
    let window = slice_window(&score, start_bar).map_err(|e| e.to_string())?;
    let view = WindowView::new(&score, &window, &analyze_window(&window))?;
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

pub fn infill_json(midi: &[u8], roles: &str, start_bar: usize, request: &str) -> Result<String, String> {
    let request: InfillRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let score = load(midi, roles)?;
    let window = slice_window(&score, start_bar).map_err(|e| e.to_string())?;
    let region = RegionSpec::new(request.cells).map_err(|e| e.to_string())?;
    let result = run_infill(
        &window,
        &region,
        &request.target,
        request.seed,
        &BaselineGenerator::default(),
    )
    .map_err(|e| e.to_string())?;
    let merged = score.merge_window(&result.window);
    let out = InfillView {
        view: WindowView::new(&merged, &result.window, &result.analysis)?,
        midi: encode_midi(&serialize_midi(&merged)),
        cells: result
            .achieved
            .iter()
            .map(|(c, a)| CellOutcome {
                track: c.track,
                bar: c.bar,
                target: result.targets.cells[c],
                achieved: *a,
            })
            .collect(),
    };
    Ok(serde_json::to_string(&out).expect("view serializes"))
}

/// A 24-bar trio; the seed picks the key and the notes.
#[wasm_bindgen]
pub fn demo_song(seed: u32) -> Vec<u8> {
    demo_song_bytes(u64::from(seed))
}

/// Window view JSON for `midi` with roles like `m,b,h`.
#[wasm_bindgen]
pub fn analyze(midi: &[u8], roles: &str, start_bar: usize) -> Result<String, JsError> {
    analyze_json(midi, roles, start_bar).map_err(|e| JsError::new(&e))
}

/// Regenerate cells. `request` is `{"cells":[{"track","bar"}],"target":{..},"seed"}`.
#[wasm_bindgen]
pub fn infill(midi: &[u8], roles: &str, start_bar: usize, request: &str) -> Result<String, JsError> {
    infill_json(midi, roles, start_bar, request).map_err(|e| JsError::new(&e))
}
