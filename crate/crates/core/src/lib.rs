//! Multi-track score model, controllability metrics and bar-level infilling.
//!
//! The crate is organised bottom-up:
//!
//! * [`score`] holds the tick-accurate score model, the Standard MIDI File
//!   codec, bar partitioning, role assignment and 16-bar windows.
//! * [`metrics`] computes per-track density/polyphony/occupation, their 0-9
//!   levels, spiral-array tension and key estimates.
//! * [`analysis`] bundles the metrics of one window into a single value and
//!   [`report`] serializes it as JSON Lines.
//! * [`infill`] regenerates (track, bar) cells of a window under control
//!   targets through a pluggable [`infill::GeneratorPort`]; [`wire`] holds
//!   the JSON messages used to reach a generator over the network.

pub mod analysis;
pub mod infill;
pub mod metrics;
pub mod report;
pub mod score;
pub mod synth;
pub mod wire;

pub use analysis::{analyze_window, CellMetrics, WindowAnalysis};
pub use infill::{
    infill, validate_region, BaselineGenerator, Cell, ControlTarget, GeneratorError,
    GeneratorPort, InfillError, InfillResult, RegionSpec, ResolvedTargets,
};
pub use metrics::{
    estimate_key, quantize_level, raw_metrics, tension_profile, ControlLevels, KeyEstimate,
    MetricKind, Mode, RawTrackMetrics, SpiralPoint, TensionValue,
};
pub use score::{
    assign_roles, bar_partition, parse_midi, serialize_midi, slice_window, Metre, NoteEvent,
    Score, ScoreError, ScoreWindow, Tempo, Track, TrackRole,
};
