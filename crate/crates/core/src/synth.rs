//! Procedural multi-track songs for demos and tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::{KeyEstimate, Mode};
use crate::score::{Metre, NoteEvent, Score, Tempo, Track, TrackRole};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub tracks: usize,
    pub bars: usize,
    pub metre: Metre,
    pub ppq: u16,
    pub bpm: f64,
    pub tonic: u8,
    pub mode: Mode,
    /// Role of each track, in order.
    pub roles: Vec<TrackRole>,
}

impl SynthSpec {
    /// Three tracks (melody, bass, harmony) of `bars` bars in C major, 4/4.
    pub fn trio(bars: usize) -> Self {
        Self {
            tracks: 3,
            bars,
            metre: Metre::COMMON,
            ppq: 480,
            bpm: 110.0,
            tonic: 0,
            mode: Mode::Major,
            roles: vec![TrackRole::Melody, TrackRole::Bass, TrackRole::Harmony],
        }
    }

    /// 1-3 tracks in shuffled roles, 1-32 bars, 4/4 or 3/4, random key.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tracks = rng.random_range(1..=3);
        let mut roles = TrackRole::ASSIGNABLE.to_vec();
        for i in (1..roles.len()).rev() {
            roles.swap(i, rng.random_range(0..=i));
        }
        roles.truncate(tracks);
        Self {
            tracks,
            bars: rng.random_range(1..=32),
            metre: if rng.random_bool(0.5) {
                Metre::COMMON
            } else {
                Metre::new(3, 4).expect("3/4 is valid")
            },
            ppq: *[96u16, 120, 192, 240, 384, 480, 960].choose(&mut rng).expect("non-empty"),
            bpm: rng.random_range(60.0..180.0f64).round(),
            tonic: rng.random_range(0..12),
            mode: if rng.random_bool(0.5) { Mode::Major } else { Mode::Minor },
            roles,
        }
    }
}

/// A song following `spec`. Tracks get the roles of the spec; bars cycle
/// through I-IV-V-I style degrees of the key.
pub fn synth_score(spec: &SynthSpec, seed: u64) -> Score {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_50_96);
    let ppq = u64::from(spec.ppq);
    let bar = ppq * 4 * u64::from(spec.metre.numerator) / u64::from(spec.metre.denominator);
    let key = KeyEstimate::new(spec.tonic, spec.mode);
    let scale = key.scale();
    let degrees = [0usize, 3, 4, 0, 5, 1, 4, 0];
    let step = ppq / 4;

    let tracks = spec
        .roles
        .iter()
        .take(spec.tracks)
        .enumerate()
        .map(|(ti, role)| {
            let mut events = Vec::new();
            for b in 0..spec.bars as u64 {
                let start = b * bar;
                let degree = degrees[b as usize % degrees.len()];
                let chord = [0, 2, 4].map(|k| scale[(degree + k) % 7]);
                match role {
                    TrackRole::Melody => {
                        let mut t = start;
                        while t < start + bar {
                            let len = step * *[1u64, 2, 2, 4, 4, 6, 8].choose(&mut rng).expect("non-empty");
                            let len = len.min(start + bar - t);
                            if t == start || rng.random_bool(0.85) {
                                let pc = if rng.random_bool(0.6) {
                                    *chord.choose(&mut rng).expect("non-empty")
                                } else {
                                    *scale.choose(&mut rng).expect("non-empty")
                                };
                                let octave = rng.random_range(5..=6u8);
                                let pitch = (octave * 12 + pc).clamp(60, 84);
                                events.push(NoteEvent::new(pitch, t, len, rng.random_range(60..=110)));
                            }
                            t += len;
                        }
                    }
                    TrackRole::Bass => {
                        let root = 36 + chord[0];
                        let halves = if rng.random_bool(0.5) { 1 } else { 2 };
                        for h in 0..halves {
                            let len = bar / halves;
                            let pitch = if h == 1 { 36 + chord[2] } else { root };
                            events.push(NoteEvent::new(pitch.min(52), start + h * len, len, 90));
                        }
                    }
                    TrackRole::Harmony | TrackRole::Empty => {
                        // occasionally tie a chord over the barline
                        let len = if rng.random_bool(0.15) { bar + bar / 2 } else { bar };
                        for pc in chord {
                            events.push(NoteEvent::new(60 + pc - if pc > 7 { 12 } else { 0 }, start, len, 70));
                        }
                    }
                }
            }
            let end = spec.bars as u64 * bar;
            events.retain(|e| e.onset < end);
            for e in &mut events {
                e.duration = e.duration.min(end - e.onset);
            }
            Track::new(*role, ti as u8, events)
        })
        .collect();

    Score {
        ppq: spec.ppq,
        tempo: Tempo::from_bpm(spec.bpm),
        metre: spec.metre,
        tracks,
        end_tick: spec.bars as u64 * bar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{parse_midi, serialize_midi};

    #[test]
    fn random_specs_are_in_range() {
        for seed in 0..200 {
            let spec = SynthSpec::random(seed);
            assert!((1..=3).contains(&spec.tracks));
            assert!((1..=32).contains(&spec.bars));
            assert!([3, 4].contains(&spec.metre.numerator));
            let score = synth_score(&spec, seed);
            assert_eq!(score.bar_count().unwrap(), spec.bars);
            assert!(score.tracks.iter().all(|t| !t.is_empty()));
        }
    }

    #[test]
    fn trio_survives_the_codec() {
        let s = synth_score(&SynthSpec::trio(8), 1);
        let back = parse_midi(&serialize_midi(&s)).unwrap();
        assert_eq!(back.tracks.len(), 3);
        assert_eq!(back.note_count(), s.note_count());
    }
}
