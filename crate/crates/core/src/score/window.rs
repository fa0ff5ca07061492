use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Metre, NoteEvent, Score, ScoreError, Tempo, Track, TrackRole};

/// Longest window analysis and infilling operate on.
pub const MAX_WINDOW_BARS: usize = 16;

/// A note cut at the window edge, with its extent in the parent score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipRecord {
    pub track: usize,
    pub clipped: NoteEvent,
    pub original: NoteEvent,
}

/// A view of at most 16 bars of a score.
///
/// Each track holds the notes whose onset lies inside the window, with tails
/// clipped at the window end. Notes that began earlier but still sound inside
/// the window are kept apart in `carried`, clipped to the window start: they
/// count towards what sounds in a bar but are never owned or edited by it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreWindow {
    /// 1-based bar number of the first bar in the parent score.
    pub origin_bar: usize,
    pub length: usize,
    pub ppq: u16,
    pub tempo: Tempo,
    pub metre: Metre,
    pub bar_ticks: u64,
    pub tracks: Vec<Track>,
    pub carried: Vec<Vec<NoteEvent>>,
    pub clips: Vec<ClipRecord>,
}

/// Window starting at `origin_bar` (1-based) spanning as many bars as remain,
/// capped at 16.
pub fn slice_window(score: &Score, origin_bar: usize) -> Result<ScoreWindow, ScoreError> {
    slice_window_len(score, origin_bar, MAX_WINDOW_BARS)
}

/// Like [`slice_window`] with an explicit upper bound on the length.
pub fn slice_window_len(
    score: &Score,
    origin_bar: usize,
    max_len: usize,
) -> Result<ScoreWindow, ScoreError> {
    let bar_ticks = score.bar_ticks()?;
    let bars = score.bar_count()?;
    if origin_bar == 0 || origin_bar > bars {
        return Err(ScoreError::BarOutOfRange {
            bar: origin_bar,
            bars,
        });
    }
    let length = (bars - origin_bar + 1).min(MAX_WINDOW_BARS).min(max_len.max(1));
    let start = (origin_bar as u64 - 1) * bar_ticks;
    let end = start + length as u64 * bar_ticks;

    let mut tracks = Vec::with_capacity(score.tracks.len());
    let mut carried = Vec::with_capacity(score.tracks.len());
    let mut clips = Vec::new();
    for (ti, track) in score.tracks.iter().enumerate() {
        let mut inside = Vec::new();
        let mut before = Vec::new();
        for e in &track.events {
            if e.onset >= end || e.end() <= start {
                continue;
            }
            let mut clipped = *e;
            if e.onset < start {
                clipped.onset = start;
            }
            clipped.duration = e.end().min(end) - clipped.onset;
            if clipped != *e {
                clips.push(ClipRecord {
                    track: ti,
                    clipped,
                    original: *e,
                });
            }
            if e.onset < start {
                before.push(clipped);
            } else {
                inside.push(clipped);
            }
        }
        tracks.push(Track {
            role: track.role,
            channel: track.channel,
            events: inside,
        });
        carried.push(before);
    }

    Ok(ScoreWindow {
        origin_bar,
        length,
        ppq: score.ppq,
        tempo: score.tempo,
        metre: score.metre,
        bar_ticks,
        tracks,
        carried,
        clips,
    })
}

impl ScoreWindow {
    pub fn start_tick(&self) -> u64 {
        (self.origin_bar as u64 - 1) * self.bar_ticks
    }

    pub fn end_tick(&self) -> u64 {
        self.start_tick() + self.length as u64 * self.bar_ticks
    }

    pub fn range(&self) -> Range<u64> {
        self.start_tick()..self.end_tick()
    }

    /// Tick range of window bar `bar` (0-based).
    pub fn bar_range(&self, bar: usize) -> Range<u64> {
        let start = self.start_tick() + bar as u64 * self.bar_ticks;
        start..start + self.bar_ticks
    }

    /// Window bar (0-based) containing `tick`, if inside the window.
    pub fn bar_of(&self, tick: u64) -> Option<usize> {
        self.range()
            .contains(&tick)
            .then(|| ((tick - self.start_tick()) / self.bar_ticks) as usize)
    }

    pub fn roles(&self) -> Vec<TrackRole> {
        self.tracks.iter().map(|t| t.role).collect()
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(|t| t.events.len()).sum::<usize>()
            + self.carried.iter().map(Vec::len).sum::<usize>()
    }

    /// Notes owned by `track` whose onset falls in window bar `bar`.
    pub fn cell_events(&self, track: usize, bar: usize) -> impl Iterator<Item = &NoteEvent> {
        let range = self.bar_range(bar);
        self.tracks[track]
            .events
            .iter()
            .filter(move |e| range.contains(&e.onset))
    }

    /// Every note of `track` that sounds inside window bar `bar`, carried
    /// notes included.
    pub fn sounding_in_bar(&self, track: usize, bar: usize) -> impl Iterator<Item = &NoteEvent> {
        let range = self.bar_range(bar);
        self.tracks[track]
            .events
            .iter()
            .chain(self.carried[track].iter())
            .filter(move |e| e.overlap(&range) > 0)
    }

    /// A score holding every note that touches the window at its full
    /// extent in the parent, ending at the window end or the last such note.
    /// Slicing it at `origin_bar` reproduces this window.
    pub fn context_score(&self) -> Score {
        let tracks: Vec<Track> = self
            .tracks
            .iter()
            .enumerate()
            .map(|(ti, t)| {
                let mut events: Vec<NoteEvent> = t
                    .events
                    .iter()
                    .chain(self.carried[ti].iter())
                    .map(|e| self.original_of(ti, e))
                    .collect();
                events.sort();
                Track {
                    role: t.role,
                    channel: t.channel,
                    events,
                }
            })
            .collect();
        let last = tracks
            .iter()
            .flat_map(|t| t.events.iter().map(NoteEvent::end))
            .max()
            .unwrap_or(0);
        Score {
            ppq: self.ppq,
            tempo: self.tempo,
            metre: self.metre,
            tracks,
            end_tick: self.end_tick().max(last),
        }
    }

    fn original_of(&self, track: usize, e: &NoteEvent) -> NoteEvent {
        self.clips
            .iter()
            .find(|c| c.track == track && c.clipped == *e)
            .map(|c| c.original)
            .unwrap_or(*e)
    }

    pub(super) fn merge_into(&self, score: &Score) -> Score {
        let range = self.range();
        let mut out = score.clone();
        for (ti, track) in out.tracks.iter_mut().enumerate() {
            let Some(wtrack) = self.tracks.get(ti) else {
                continue;
            };
            let mut events: Vec<NoteEvent> = track
                .events
                .iter()
                .filter(|e| !range.contains(&e.onset))
                .copied()
                .collect();
            events.extend(wtrack.events.iter().map(|e| self.original_of(ti, e)));
            events.sort();
            track.events = events;
            track.role = wtrack.role;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bars_score(bars: u64) -> Score {
        let events = (0..bars)
            .map(|b| NoteEvent::new(60 + (b % 12) as u8, b * 1920, 960, 90))
            .collect();
        Score {
            ppq: 480,
            tempo: Tempo::DEFAULT,
            metre: Metre::COMMON,
            tracks: vec![Track::new(TrackRole::Melody, 0, events)],
            end_tick: bars * 1920,
        }
    }

    #[test]
    fn window_lengths() {
        assert_eq!(slice_window(&bars_score(32), 1).unwrap().length, 16);
        assert_eq!(slice_window(&bars_score(8), 1).unwrap().length, 8);
        let w = slice_window(&bars_score(20), 10).unwrap();
        // min(16, 20 - 10 + 1)
        assert_eq!(w.length, 11);
        assert_eq!(w.range(), 9 * 1920..20 * 1920);
    }

    #[test]
    fn origin_out_of_range() {
        let s = bars_score(32);
        assert_eq!(
            slice_window(&s, 0),
            Err(ScoreError::BarOutOfRange { bar: 0, bars: 32 })
        );
        assert_eq!(
            slice_window(&s, 40),
            Err(ScoreError::BarOutOfRange { bar: 40, bars: 32 })
        );
    }

    #[test]
    fn edge_crossing_notes_clip_and_restore() {
        let mut s = bars_score(4);
        s.tracks[0].events = vec![
            NoteEvent::new(50, 1000, 1500, 90), // crosses into bar 2 from bar 1
            NoteEvent::new(52, 3000, 2000, 90), // crosses out of bar 2 into bar 3
            NoteEvent::new(55, 500, 6000, 90),  // spans the whole window
        ];
        s.tracks[0].events.sort();
        let w = slice_window_len(&s, 2, 1).unwrap();
        assert_eq!(w.range(), 1920..3840);
        assert_eq!(w.tracks[0].events, vec![NoteEvent::new(52, 3000, 840, 90)]);
        assert_eq!(
            w.carried[0],
            vec![NoteEvent::new(55, 1920, 1920, 90), NoteEvent::new(50, 1920, 580, 90)]
        );
        assert_eq!(w.clips.len(), 3);
        assert_eq!(s.merge_window(&w), s);
        let ctx = w.context_score();
        assert_eq!(slice_window_len(&ctx, 2, 1).unwrap(), w);
    }

    #[test]
    fn merge_replaces_only_window_onsets() {
        let s = bars_score(20);
        let mut w = slice_window(&s, 3).unwrap();
        w.tracks[0].events.clear();
        let merged = s.merge_window(&w);
        assert_eq!(merged.tracks[0].events.len(), 20 - 16);
        assert!(merged.tracks[0]
            .events
            .iter()
            .all(|e| !w.range().contains(&e.onset)));
    }

    #[test]
    fn bar_lookup() {
        let w = slice_window(&bars_score(20), 5).unwrap();
        assert_eq!(w.bar_of(4 * 1920), Some(0));
        assert_eq!(w.bar_of(4 * 1920 + 1919), Some(0));
        assert_eq!(w.bar_of(6 * 1920), Some(2));
        assert_eq!(w.bar_of(0), None);
        assert_eq!(w.cell_events(0, 1).count(), 1);
    }
}
