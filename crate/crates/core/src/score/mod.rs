//! Tick-accurate score representation.

mod midi;
mod window;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use midi::{parse_midi, parse_midi_with, serialize_midi, ParseOptions};
pub use window::{slice_window, slice_window_len, ScoreWindow, MAX_WINDOW_BARS};

/// Maximum number of tracks a score keeps.
pub const MAX_TRACKS: usize = 3;

/// MIDI channel reserved for percussion (channel 10, zero-based 9).
pub const PERCUSSION_CHANNEL: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("malformed MIDI: {0}")]
    MalformedMidi(String),
    #[error("no sounding notes in the first three eligible tracks")]
    NoNotes,
    #[error("unsupported metre: {0}")]
    UnsupportedMetre(String),
    #[error("role {0} is assigned to more than one track")]
    DuplicateRole(TrackRole),
    #[error("expected between {min} and {max} roles, got {got}")]
    RoleCount { min: usize, max: usize, got: usize },
    #[error("bar {bar} is outside 1..={bars}")]
    BarOutOfRange { bar: usize, bars: usize },
}

/// One sounding note. Ordering is by onset, then pitch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoteEvent {
    pub onset: u64,
    pub pitch: u8,
    pub duration: u64,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset: u64, duration: u64, velocity: u8) -> Self {
        Self {
            onset,
            pitch,
            duration,
            velocity,
        }
    }

    pub fn end(&self) -> u64 {
        self.onset + self.duration
    }

    /// Length of the part of this note that sounds inside `range`.
    pub fn overlap(&self, range: &Range<u64>) -> u64 {
        let lo = self.onset.max(range.start);
        let hi = self.end().min(range.end);
        hi.saturating_sub(lo)
    }
}

/// Sort events and merge same-pitch notes that overlap in time into one
/// event spanning their union. Zero durations become one tick.
pub fn normalize_events(mut events: Vec<NoteEvent>) -> Vec<NoteEvent> {
    for e in &mut events {
        e.duration = e.duration.max(1);
    }
    events.sort_by_key(|e| (e.pitch, e.onset, e.duration));
    let mut merged: Vec<NoteEvent> = Vec::with_capacity(events.len());
    for e in events {
        match merged.last_mut() {
            Some(last) if last.pitch == e.pitch && e.onset < last.end() => {
                let end = last.end().max(e.end());
                last.duration = end - last.onset;
            }
            _ => merged.push(e),
        }
    }
    merged.sort();
    merged
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Metre {
    pub numerator: u8,
    pub denominator: u8,
}

impl Metre {
    pub const COMMON: Metre = Metre {
        numerator: 4,
        denominator: 4,
    };

    pub fn new(numerator: u8, denominator: u8) -> Result<Self, ScoreError> {
        if numerator == 0 {
            return Err(ScoreError::UnsupportedMetre("numerator must be positive".into()));
        }
        if !matches!(denominator, 1 | 2 | 4 | 8 | 16) {
            return Err(ScoreError::UnsupportedMetre(format!(
                "denominator {denominator} not in {{1,2,4,8,16}}"
            )));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    /// Bar length in ticks; the metre is rejected if it is not a whole number.
    pub fn bar_ticks(&self, ppq: u16) -> Result<u64, ScoreError> {
        let num = u64::from(self.numerator) * 4 * u64::from(ppq);
        let den = u64::from(self.denominator);
        if den == 0 || num == 0 || num % den != 0 {
            return Err(ScoreError::UnsupportedMetre(format!(
                "{}/{} at ppq {ppq} is not a whole number of ticks",
                self.numerator, self.denominator
            )));
        }
        Ok(num / den)
    }
}

impl fmt::Display for Metre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Tempo as stored in MIDI: microseconds per quarter note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tempo {
    pub micros_per_quarter: u32,
}

impl Tempo {
    pub const DEFAULT: Tempo = Tempo {
        micros_per_quarter: 500_000,
    };

    pub fn from_bpm(bpm: f64) -> Self {
        let us = (60_000_000.0 / bpm).round().clamp(1.0, f64::from(0xFF_FFFFu32));
        Self {
            micros_per_quarter: us as u32,
        }
    }

    pub fn bpm(&self) -> f64 {
        60_000_000.0 / f64::from(self.micros_per_quarter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackRole {
    Melody,
    Bass,
    Harmony,
    Empty,
}

impl TrackRole {
    pub const ASSIGNABLE: [TrackRole; 3] = [TrackRole::Melody, TrackRole::Bass, TrackRole::Harmony];

    pub fn name(&self) -> &'static str {
        match self {
            TrackRole::Melody => "melody",
            TrackRole::Bass => "bass",
            TrackRole::Harmony => "harmony",
            TrackRole::Empty => "empty",
        }
    }
}

impl fmt::Display for TrackRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrackRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "melody" => Ok(TrackRole::Melody),
            "b" | "bass" => Ok(TrackRole::Bass),
            "h" | "harmony" => Ok(TrackRole::Harmony),
            "e" | "empty" | "-" => Ok(TrackRole::Empty),
            other => Err(format!("unknown track role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Track {
    pub role: TrackRole,
    /// Channel used when writing the track back out.
    pub channel: u8,
    pub events: Vec<NoteEvent>,
}

impl Track {
    pub fn new(role: TrackRole, channel: u8, events: Vec<NoteEvent>) -> Self {
        Self {
            role,
            channel,
            events: normalize_events(events),
        }
    }

    pub fn empty(channel: u8) -> Self {
        Self {
            role: TrackRole::Empty,
            channel,
            events: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Score {
    pub ppq: u16,
    pub tempo: Tempo,
    pub metre: Metre,
    pub tracks: Vec<Track>,
    pub end_tick: u64,
}

impl Score {
    pub fn bar_ticks(&self) -> Result<u64, ScoreError> {
        self.metre.bar_ticks(self.ppq)
    }

    pub fn bar_count(&self) -> Result<usize, ScoreError> {
        let bar = self.bar_ticks()?;
        Ok(self.end_tick.div_ceil(bar) as usize)
    }

    pub fn roles(&self) -> Vec<TrackRole> {
        self.tracks.iter().map(|t| t.role).collect()
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(|t| t.events.len()).sum()
    }

    /// Largest note end over all tracks.
    pub fn last_note_end(&self) -> u64 {
        self.tracks
            .iter()
            .flat_map(|t| t.events.iter().map(NoteEvent::end))
            .max()
            .unwrap_or(0)
    }

    /// Writes `window` back over the bars it covers. Notes clipped when the
    /// window was cut are restored to their original extent if they survived.
    pub fn merge_window(&self, window: &ScoreWindow) -> Score {
        window.merge_into(self)
    }
}

/// Contiguous equal-length bar ranges covering `[0, end_tick)`, the last bar
/// padded to a full bar.
pub fn bar_partition(score: &Score) -> Result<Vec<Range<u64>>, ScoreError> {
    let bar = score.bar_ticks()?;
    let count = score.end_tick.div_ceil(bar);
    Ok((0..count).map(|i| i * bar..(i + 1) * bar).collect())
}

/// Attach `roles` to the tracks. Missing tracks (up to three) are appended
/// empty so they can be infilled; extra roles label those appended tracks.
pub fn assign_roles(score: &Score, roles: &[TrackRole]) -> Result<Score, ScoreError> {
    if roles.len() < score.tracks.len() || roles.len() > MAX_TRACKS {
        return Err(ScoreError::RoleCount {
            min: score.tracks.len(),
            max: MAX_TRACKS,
            got: roles.len(),
        });
    }
    for (i, r) in roles.iter().enumerate() {
        if *r != TrackRole::Empty && roles[..i].contains(r) {
            return Err(ScoreError::DuplicateRole(*r));
        }
    }
    let mut out = score.clone();
    while out.tracks.len() < MAX_TRACKS {
        let channel = free_channel(&out.tracks);
        out.tracks.push(Track::empty(channel));
    }
    for (i, track) in out.tracks.iter_mut().enumerate() {
        track.role = roles.get(i).copied().unwrap_or(TrackRole::Empty);
    }
    Ok(out)
}

fn free_channel(tracks: &[Track]) -> u8 {
    (0u8..16)
        .find(|c| *c != PERCUSSION_CHANNEL && tracks.iter().all(|t| t.channel != *c))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(end_tick: u64, metre: Metre, tracks: Vec<Track>) -> Score {
        Score {
            ppq: 480,
            tempo: Tempo::DEFAULT,
            metre,
            tracks,
            end_tick,
        }
    }

    #[test]
    fn partition_of_two_common_time_bars() {
        let s = score(3840, Metre::COMMON, vec![]);
        assert_eq!(bar_partition(&s).unwrap(), vec![0..1920, 1920..3840]);
    }

    #[test]
    fn partition_pads_last_bar() {
        let s = score(1500, Metre::new(3, 4).unwrap(), vec![]);
        // ceil(1500 / 1440) = 2
        assert_eq!(bar_partition(&s).unwrap(), vec![0..1440, 1440..2880]);
    }

    #[test]
    fn fractional_bar_is_unsupported() {
        let s = Score {
            ppq: 3,
            ..score(100, Metre::new(3, 8).unwrap(), vec![])
        };
        assert!(matches!(bar_partition(&s), Err(ScoreError::UnsupportedMetre(_))));
    }

    #[test]
    fn bad_denominator_rejected() {
        assert!(Metre::new(4, 3).is_err());
        assert!(Metre::new(0, 4).is_err());
        assert!(Metre::new(7, 16).is_ok());
    }

    #[test]
    fn overlapping_same_pitch_notes_merge() {
        let events = normalize_events(vec![
            NoteEvent::new(60, 0, 480, 90),
            NoteEvent::new(60, 240, 720, 70),
        ]);
        assert_eq!(events, vec![NoteEvent::new(60, 0, 960, 90)]);
    }

    #[test]
    fn touching_notes_stay_separate() {
        let events = normalize_events(vec![
            NoteEvent::new(60, 480, 480, 90),
            NoteEvent::new(60, 0, 480, 90),
            NoteEvent::new(64, 0, 0, 90),
        ]);
        assert_eq!(
            events,
            vec![
                NoteEvent::new(60, 0, 480, 90),
                NoteEvent::new(64, 0, 1, 90),
                NoteEvent::new(60, 480, 480, 90),
            ]
        );
    }

    #[test]
    fn roles_accepted_and_padded() {
        let one = score(1920, Metre::COMMON, vec![Track::new(TrackRole::Empty, 0, vec![
            NoteEvent::new(60, 0, 480, 90),
        ])]);
        let s = assign_roles(&one, &[TrackRole::Melody]).unwrap();
        assert_eq!(s.roles(), vec![TrackRole::Melody, TrackRole::Empty, TrackRole::Empty]);
        assert_eq!(s.tracks[1].channel, 1);
        assert_eq!(s.tracks[2].channel, 2);
        // idempotent once padded
        assert_eq!(assign_roles(&s, &s.roles()).unwrap(), s);

        let three = assign_roles(&one, &[TrackRole::Melody, TrackRole::Bass, TrackRole::Harmony])
            .unwrap();
        assert_eq!(three.roles(), TrackRole::ASSIGNABLE.to_vec());
    }

    #[test]
    fn duplicate_roles_rejected() {
        let s = score(1920, Metre::COMMON, vec![Track::empty(0), Track::empty(1), Track::empty(2)]);
        let err = assign_roles(&s, &[TrackRole::Melody, TrackRole::Melody, TrackRole::Bass]);
        assert_eq!(err, Err(ScoreError::DuplicateRole(TrackRole::Melody)));
        assert!(assign_roles(&s, &[TrackRole::Empty, TrackRole::Empty, TrackRole::Bass]).is_ok());
        assert!(matches!(
            assign_roles(&s, &[TrackRole::Melody]),
            Err(ScoreError::RoleCount { .. })
        ));
    }

    #[test]
    fn role_names_parse() {
        assert_eq!("m".parse::<TrackRole>(), Ok(TrackRole::Melody));
        assert_eq!("Harmony".parse::<TrackRole>(), Ok(TrackRole::Harmony));
        assert!("drums".parse::<TrackRole>().is_err());
    }
}
