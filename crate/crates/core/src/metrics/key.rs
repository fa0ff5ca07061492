use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{NoteEvent, Score, ScoreWindow};

/// Krumhansl-Kessler probe-tone ratings, tonic first.
pub const MAJOR_PROFILE: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
pub const MINOR_PROFILE: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

const NAMES: [&str; 12] = ["C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("no notes to estimate a key from")]
    NoNotes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyEstimate {
    /// Tonic pitch class, C = 0.
    pub tonic: u8,
    pub mode: Mode,
    /// Best correlation, clamped to [0, 1].
    pub confidence: f64,
}

impl KeyEstimate {
    pub fn new(tonic: u8, mode: Mode) -> Self {
        Self {
            tonic: tonic % 12,
            mode,
            confidence: 1.0,
        }
    }

    /// C major with zero confidence, used when nothing sounds.
    pub fn fallback() -> Self {
        Self {
            tonic: 0,
            mode: Mode::Major,
            confidence: 0.0,
        }
    }

    /// Pitch classes of the key's scale (harmonic minor for minor keys).
    pub fn scale(&self) -> [u8; 7] {
        let steps: [u8; 7] = match self.mode {
            Mode::Major => [0, 2, 4, 5, 7, 9, 11],
            Mode::Minor => [0, 2, 3, 5, 7, 8, 11],
        };
        steps.map(|s| (self.tonic + s) % 12)
    }

    /// Pitch classes of the tonic triad.
    pub fn tonic_triad(&self) -> [u8; 3] {
        let third = if self.mode == Mode::Major { 4 } else { 3 };
        [self.tonic, (self.tonic + third) % 12, (self.tonic + 7) % 12]
    }
}

impl fmt::Display for KeyEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            Mode::Major => "major",
            Mode::Minor => "minor",
        };
        write!(f, "{} {mode}", NAMES[usize::from(self.tonic % 12)])
    }
}

/// Duration-weighted pitch-class histogram of every note sounding in the
/// window, clipped to it.
pub fn pitch_class_histogram(window: &ScoreWindow) -> [f64; 12] {
    let range = window.range();
    let mut hist = [0.0; 12];
    let notes = window
        .tracks
        .iter()
        .flat_map(|t| t.events.iter())
        .chain(window.carried.iter().flatten());
    for e in notes {
        hist[usize::from(e.pitch % 12)] += e.overlap(&range) as f64;
    }
    hist
}

fn histogram_of<'a>(notes: impl Iterator<Item = &'a NoteEvent>) -> [f64; 12] {
    let mut hist = [0.0; 12];
    for e in notes {
        hist[usize::from(e.pitch % 12)] += e.duration as f64;
    }
    hist
}

pub fn estimate_key(window: &ScoreWindow) -> Result<KeyEstimate, KeyError> {
    estimate_key_from_histogram(&pitch_class_histogram(window)).ok_or(KeyError::NoNotes)
}

/// Key of the whole score, for the load-time summary.
pub fn estimate_score_key(score: &Score) -> Result<KeyEstimate, KeyError> {
    let hist = histogram_of(score.tracks.iter().flat_map(|t| t.events.iter()));
    estimate_key_from_histogram(&hist).ok_or(KeyError::NoNotes)
}

/// Correlate the histogram against all 24 rotated profiles. Ties go to the
/// lower tonic, then major before minor. `None` for an empty histogram.
pub fn estimate_key_from_histogram(hist: &[f64; 12]) -> Option<KeyEstimate> {
    if hist.iter().sum::<f64>() <= 0.0 {
        return None;
    }
    let mut best = KeyEstimate::fallback();
    let mut best_r = f64::NEG_INFINITY;
    for tonic in 0..12u8 {
        let rotated: [f64; 12] = std::array::from_fn(|i| hist[(i + usize::from(tonic)) % 12]);
        for (mode, profile) in [(Mode::Major, &MAJOR_PROFILE), (Mode::Minor, &MINOR_PROFILE)] {
            let r = pearson(&rotated, profile);
            if r > best_r {
                best_r = r;
                best = KeyEstimate {
                    tonic,
                    mode,
                    confidence: r.clamp(0.0, 1.0),
                };
            }
        }
    }
    Some(best)
}

fn pearson(x: &[f64; 12], y: &[f64; 12]) -> f64 {
    let mx = x.iter().sum::<f64>() / 12.0;
    let my = y.iter().sum::<f64>() / 12.0;
    let (mut num, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        num += dx * dy;
        sx += dx * dx;
        sy += dy * dy;
    }
    let denom = (sx * sy).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        num / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(pcs: &[(u8, f64)]) -> [f64; 12] {
        let mut h = [0.0; 12];
        for (pc, w) in pcs {
            h[usize::from(*pc)] += w;
        }
        h
    }

    #[test]
    fn c_major_triad() {
        let k = estimate_key_from_histogram(&hist(&[(0, 1.0), (4, 1.0), (7, 1.0)])).unwrap();
        assert_eq!((k.tonic, k.mode), (0, Mode::Major));
        assert!(k.confidence > 0.5);
    }

    #[test]
    fn chromatic_has_no_confidence() {
        let k = estimate_key_from_histogram(&[1.0; 12]).unwrap();
        assert!(k.confidence < 0.5);
        assert_eq!((k.tonic, k.mode), (0, Mode::Major));
    }

    #[test]
    fn empty_histogram() {
        assert_eq!(estimate_key_from_histogram(&[0.0; 12]), None);
    }

    #[test]
    fn scales_and_display() {
        let a_minor = KeyEstimate::new(9, Mode::Minor);
        assert_eq!(a_minor.scale(), [9, 11, 0, 2, 4, 5, 8]);
        assert_eq!(a_minor.tonic_triad(), [9, 0, 4]);
        assert_eq!(a_minor.to_string(), "A minor");
    }
}
