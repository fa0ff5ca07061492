//! Tonal tension on the spiral array.
//!
//! Pitch classes sit on a helix indexed by the line of fifths: index `k`
//! maps to `(r sin(k pi/2), r cos(k pi/2), k h)`, so every step of a fifth
//! turns a quarter circle and rises by `h`. A bar becomes a cloud of such
//! points; tension is read off its spread (diameter), its distance from the
//! key's centre (tensile strain) and its movement from the previous bar
//! (momentum).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::key::{KeyEstimate, Mode};
use super::levels::{quantize_level, MetricKind};
use crate::score::ScoreWindow;

pub const SPIRAL_RADIUS: f64 = 1.0;
/// Rise per fifth, sqrt(2/15).
pub const SPIRAL_HEIGHT: f64 = 0.365_148_371_670_110_7;

const KEY_WEIGHTS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensionError {
    #[error("cannot take the centre of an empty cloud")]
    EmptyCloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpiralPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpiralPoint {
    pub fn distance(&self, other: &SpiralPoint) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    fn scaled(&self, w: f64) -> SpiralPoint {
        SpiralPoint {
            x: self.x * w,
            y: self.y * w,
            z: self.z * w,
        }
    }

    fn add(&self, o: &SpiralPoint) -> SpiralPoint {
        SpiralPoint {
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TensionValue {
    pub tensile_strain: f64,
    pub cloud_diameter: f64,
    pub cloud_momentum: f64,
    pub tension_level: u8,
}

/// Position of line-of-fifths index `k` (C = 0, G = 1, F = -1, ...).
pub fn spiral_position(k: i32) -> SpiralPoint {
    // quarter turns taken from a table so x^2 + y^2 = r^2 holds exactly
    let (sin, cos) = match k.rem_euclid(4) {
        0 => (0.0, 1.0),
        1 => (1.0, 0.0),
        2 => (0.0, -1.0),
        _ => (-1.0, 0.0),
    };
    SpiralPoint {
        x: SPIRAL_RADIUS * sin,
        y: SPIRAL_RADIUS * cos,
        z: f64::from(k) * SPIRAL_HEIGHT,
    }
}

/// Line-of-fifths index of a tonic pitch class, in [-5, 6].
fn tonic_index(pc: u8) -> i32 {
    let i = (7 * i32::from(pc % 12)) % 12;
    if i > 6 {
        i - 12
    } else {
        i
    }
}

/// Spelling of `pitch_class` nearest the key: the index congruent to it
/// (mod 12 fifths) that lies in `[tonic - 5, tonic + 6]`.
pub fn fifths_index(pitch_class: u8, key: &KeyEstimate) -> i32 {
    let t = tonic_index(key.tonic);
    let base = (7 * i32::from(pitch_class % 12)) % 12;
    let lo = t - 5;
    lo + (base - lo).rem_euclid(12)
}

fn triad_center(indices: [i32; 3]) -> SpiralPoint {
    indices
        .iter()
        .fold(SpiralPoint::default(), |acc, k| acc.add(&spiral_position(*k)))
        .scaled(1.0 / 3.0)
}

/// Weighted combination of the tonic, dominant and subdominant triad
/// centres. Each triad centre is the mean of its three pitch points; minor
/// keys use a major dominant.
pub fn key_center(key: &KeyEstimate) -> SpiralPoint {
    let k = tonic_index(key.tonic);
    let (tonic, dominant, subdominant) = match key.mode {
        Mode::Major => ([k, k + 1, k + 4], [k + 1, k + 2, k + 5], [k - 1, k, k + 3]),
        Mode::Minor => ([k, k + 1, k - 3], [k + 1, k + 2, k + 5], [k - 1, k, k - 4]),
    };
    triad_center(tonic)
        .scaled(KEY_WEIGHTS[0])
        .add(&triad_center(dominant).scaled(KEY_WEIGHTS[1]))
        .add(&triad_center(subdominant).scaled(KEY_WEIGHTS[2]))
}

/// Weighted mean of the spiral positions of `(pitch, weight)` pairs.
pub fn cloud_center(notes: &[(u8, f64)], key: &KeyEstimate) -> Result<SpiralPoint, TensionError> {
    let total: f64 = notes.iter().map(|(_, w)| w).sum();
    if notes.is_empty() || total <= 0.0 {
        return Err(TensionError::EmptyCloud);
    }
    let sum = notes.iter().fold(SpiralPoint::default(), |acc, (p, w)| {
        acc.add(&spiral_position(fifths_index(p % 12, key)).scaled(*w))
    });
    Ok(sum.scaled(1.0 / total))
}

/// Largest distance between any two pitch-class points of the cloud.
pub fn cloud_diameter(pitches: impl IntoIterator<Item = u8>, key: &KeyEstimate) -> f64 {
    let mut pcs: Vec<u8> = pitches.into_iter().map(|p| p % 12).collect();
    pcs.sort_unstable();
    pcs.dedup();
    let points: Vec<SpiralPoint> = pcs
        .iter()
        .map(|pc| spiral_position(fifths_index(*pc, key)))
        .collect();
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.distance(b));
        }
    }
    best
}

/// Strain, diameter and centre of one bar's cloud; `None` when it is empty.
pub fn bar_tension(notes: &[(u8, f64)], key: &KeyEstimate) -> Option<(TensionValue, SpiralPoint)> {
    let center = cloud_center(notes, key).ok()?;
    let strain = center.distance(&key_center(key));
    let value = TensionValue {
        tensile_strain: strain,
        cloud_diameter: cloud_diameter(notes.iter().map(|(p, _)| *p), key),
        cloud_momentum: 0.0,
        tension_level: quantize_level(strain, MetricKind::TensileStrain),
    };
    Some((value, center))
}

/// Every note sounding in window bar `bar` over all tracks, weighted by how
/// long it sounds inside the bar.
pub fn bar_cloud(window: &ScoreWindow, bar: usize) -> Vec<(u8, f64)> {
    let range = window.bar_range(bar);
    (0..window.tracks.len())
        .flat_map(|t| window.sounding_in_bar(t, bar))
        .map(|e| (e.pitch, e.overlap(&range) as f64))
        .collect()
}

/// Per-bar tension of the window against `key`. Empty bars are all zero and
/// momentum is zero for the first bar and next to an empty bar.
pub fn tension_profile(window: &ScoreWindow, key: &KeyEstimate) -> Vec<TensionValue> {
    let mut out = Vec::with_capacity(window.length);
    let mut previous: Option<SpiralPoint> = None;
    for bar in 0..window.length {
        match bar_tension(&bar_cloud(window, bar), key) {
            Some((mut value, center)) => {
                value.cloud_momentum = previous.map_or(0.0, |p| p.distance(&center));
                previous = Some(center);
                out.push(value);
            }
            None => {
                previous = None;
                out.push(TensionValue::default());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const C_MAJOR: KeyEstimate = KeyEstimate {
        tonic: 0,
        mode: Mode::Major,
        confidence: 1.0,
    };

    #[test]
    fn height_constant() {
        assert!((SPIRAL_HEIGHT - (2.0f64 / 15.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reference_points() {
        let h = SPIRAL_HEIGHT;
        assert_eq!(spiral_position(0), SpiralPoint { x: 0.0, y: 1.0, z: 0.0 });
        assert_eq!(spiral_position(4), SpiralPoint { x: 0.0, y: 1.0, z: 4.0 * h });
        assert_eq!(spiral_position(1), SpiralPoint { x: 1.0, y: 0.0, z: h });
        for k in -20..20 {
            let p = spiral_position(k);
            let direct = std::f64::consts::FRAC_PI_2 * f64::from(k);
            assert!((p.x - direct.sin()).abs() < 1e-12 && (p.y - direct.cos()).abs() < 1e-12);
            assert_eq!(p.x * p.x + p.y * p.y, 1.0);
        }
    }

    #[test]
    fn spelling_window_follows_key() {
        // F# in C major is +6, Gb would be -6
        assert_eq!(fifths_index(6, &C_MAJOR), 6);
        assert_eq!(fifths_index(10, &C_MAJOR), -2);
        // in Db major (tonic index -5) the same pitch class is spelled Gb
        let db = KeyEstimate::new(1, Mode::Major);
        assert_eq!(fifths_index(6, &db), -6);
        for pc in 0..12 {
            let k = fifths_index(pc, &db);
            assert!((-10..=1).contains(&k));
            assert_eq!((7 * k).rem_euclid(12), i32::from(pc));
        }
    }

    #[test]
    fn singleton_and_pair_centres() {
        let c = cloud_center(&[(60, 3.0)], &C_MAJOR).unwrap();
        assert_eq!(c, spiral_position(0));
        let cg = cloud_center(&[(48, 1.0), (67, 1.0)], &C_MAJOR).unwrap();
        let mid = spiral_position(0).add(&spiral_position(1)).scaled(0.5);
        assert!(cg.distance(&mid) < 1e-15);
        assert_eq!(cloud_center(&[], &C_MAJOR), Err(TensionError::EmptyCloud));
    }

    #[test]
    fn unison_has_zero_diameter() {
        assert_eq!(cloud_diameter([60, 72, 48], &C_MAJOR), 0.0);
    }

    #[test]
    fn key_center_chord_has_zero_strain() {
        // weights 4:3:4:1:1:1:1 over C E G B D F A reproduce the centre
        let notes = [(60, 4.0), (64, 3.0), (67, 4.0), (71, 1.0), (62, 1.0), (65, 1.0), (69, 1.0)];
        let (t, _) = bar_tension(&notes, &C_MAJOR).unwrap();
        assert!(t.tensile_strain < 1e-9, "{}", t.tensile_strain);
        assert_eq!(t.tension_level, 0);
    }
}
