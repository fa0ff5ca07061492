//! Line-delimited JSON analysis report.
//!
//! One object per line, tagged by `"record"`:
//!
//! * `meta` - the loaded file's summary and the window origin/length,
//! * `key` - the window key estimate,
//! * `cell` - one per (track, bar): raw metrics and levels,
//! * `bar` - one per bar: tension values and level.
//!
//! Bars are 0-based window indices; `score_bar` gives the 1-based bar number
//! in the file.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{MetaSummary, WindowAnalysis};
use crate::metrics::{KeyEstimate, Mode};
use crate::score::TrackRole;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ReportRecord {
    Meta {
        track_count: usize,
        bar_count: usize,
        metre: String,
        tempo_bpm: f64,
        ppq: u16,
        origin_bar: usize,
        window_bars: usize,
    },
    Key {
        tonic: u8,
        mode: Mode,
        name: String,
        confidence: f64,
    },
    Cell {
        track: usize,
        role: TrackRole,
        bar: usize,
        score_bar: usize,
        density: f64,
        polyphony: f64,
        occupation: f64,
        density_level: u8,
        polyphony_level: u8,
        occupation_level: u8,
    },
    Bar {
        bar: usize,
        score_bar: usize,
        tensile_strain: f64,
        cloud_diameter: f64,
        cloud_momentum: f64,
        tension_level: u8,
    },
}

pub fn records(
    meta: &MetaSummary,
    roles: &[TrackRole],
    analysis: &WindowAnalysis,
) -> Vec<ReportRecord> {
    let key: KeyEstimate = analysis.key;
    let mut out = vec![
        ReportRecord::Meta {
            track_count: meta.track_count,
            bar_count: meta.bar_count,
            metre: meta.metre.to_string(),
            tempo_bpm: meta.tempo_bpm,
            ppq: meta.ppq,
            origin_bar: analysis.origin_bar,
            window_bars: analysis.bars,
        },
        ReportRecord::Key {
            tonic: key.tonic,
            mode: key.mode,
            name: key.to_string(),
            confidence: key.confidence,
        },
    ];
    for (track, bars) in analysis.cells.iter().enumerate() {
        for (bar, cell) in bars.iter().enumerate() {
            out.push(ReportRecord::Cell {
                track,
                role: roles.get(track).copied().unwrap_or(TrackRole::Empty),
                bar,
                score_bar: analysis.origin_bar + bar,
                density: cell.raw.density,
                polyphony: cell.raw.polyphony,
                occupation: cell.raw.occupation,
                density_level: cell.levels.density,
                polyphony_level: cell.levels.polyphony,
                occupation_level: cell.levels.occupation,
            });
        }
    }
    for (bar, t) in analysis.tension.iter().enumerate() {
        out.push(ReportRecord::Bar {
            bar,
            score_bar: analysis.origin_bar + bar,
            tensile_strain: t.tensile_strain,
            cloud_diameter: t.cloud_diameter,
            cloud_momentum: t.cloud_momentum,
            tension_level: t.tension_level,
        });
    }
    out
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[ReportRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl(text: &str) -> Result<Vec<ReportRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
