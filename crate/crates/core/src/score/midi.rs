//! Standard MIDI File reading (format 0 and 1) and writing (format 1).

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{
    Metre, NoteEvent, Score, ScoreError, Tempo, Track, TrackRole, MAX_TRACKS, PERCUSSION_CHANNEL,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Keep note-less tracks instead of skipping them. In format 1 the first
    /// chunk is then taken as the conductor track when it holds no notes.
    /// Used for files this crate wrote itself, where track identity matters.
    pub keep_empty_tracks: bool,
}

pub fn parse_midi(bytes: &[u8]) -> Result<Score, ScoreError> {
    parse_midi_with(bytes, ParseOptions::default())
}

pub fn parse_midi_with(bytes: &[u8], options: ParseOptions) -> Result<Score, ScoreError> {
    let mut reader = Reader::new(bytes);
    let header = reader.chunk()?;
    if header.kind != *b"MThd" || header.data.len() < 6 {
        return Err(malformed("missing MThd header"));
    }
    let format = u16::from_be_bytes([header.data[0], header.data[1]]);
    let ntracks = u16::from_be_bytes([header.data[2], header.data[3]]) as usize;
    let division = u16::from_be_bytes([header.data[4], header.data[5]]);
    if format > 1 {
        return Err(malformed(&format!("format {format} is not supported")));
    }
    if division & 0x8000 != 0 {
        return Err(malformed("SMPTE time division is not supported"));
    }
    if division == 0 {
        return Err(malformed("zero ticks per quarter note"));
    }
    if format == 0 && ntracks != 1 {
        return Err(malformed("format 0 file must contain exactly one track"));
    }

    let mut raw_tracks = Vec::with_capacity(ntracks);
    while raw_tracks.len() < ntracks {
        let chunk = reader.chunk()?;
        if chunk.kind == *b"MTrk" {
            raw_tracks.push(read_track(chunk.data)?);
        }
    }

    let tempo = raw_tracks
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.tempos.iter().map(move |(tick, us)| (*tick, i, *us)))
        .min()
        .map(|(_, _, us)| Tempo {
            micros_per_quarter: us,
        })
        .unwrap_or(Tempo::DEFAULT);
    let metre = resolve_metre(&raw_tracks)?;
    metre.bar_ticks(division)?;

    let candidates: Vec<(u8, RawTrack)> = if format == 0 {
        split_by_channel(raw_tracks.into_iter().next().unwrap_or_default())
    } else {
        raw_tracks
            .into_iter()
            .map(|t| (t.first_channel().or(t.channel_prefix).unwrap_or(0), t))
            .collect()
    };

    let mut tracks = Vec::new();
    let mut end_tick = 0u64;
    for (index, (channel, raw)) in candidates.into_iter().enumerate() {
        if tracks.len() == MAX_TRACKS {
            break;
        }
        let events = raw.notes(|ch| ch != PERCUSSION_CHANNEL);
        let keep = if options.keep_empty_tracks {
            !(format == 1 && index == 0 && events.is_empty())
        } else {
            !events.is_empty()
        };
        if !keep {
            continue;
        }
        end_tick = end_tick.max(raw.end_tick);
        let track = Track::new(TrackRole::Empty, channel, events);
        end_tick = end_tick.max(track.events.iter().map(NoteEvent::end).max().unwrap_or(0));
        tracks.push(track);
    }

    if !options.keep_empty_tracks && tracks.iter().all(Track::is_empty) {
        return Err(ScoreError::NoNotes);
    }

    Ok(Score {
        ppq: division,
        tempo,
        metre,
        tracks,
        end_tick,
    })
}

/// First time signature wins; a later, different one is rejected.
fn resolve_metre(tracks: &[RawTrack]) -> Result<Metre, ScoreError> {
    let mut sigs: Vec<(u64, usize, u8, u8)> = tracks
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.time_sigs.iter().map(move |(tick, n, d)| (*tick, i, *n, *d)))
        .collect();
    sigs.sort();
    let Some(&(_, _, num, den_pow)) = sigs.first() else {
        return Ok(Metre::COMMON);
    };
    if den_pow > 4 {
        return Err(ScoreError::UnsupportedMetre(format!(
            "denominator 2^{den_pow} is not supported"
        )));
    }
    let metre = Metre::new(num, 1 << den_pow)?;
    if let Some(&(tick, _, n, d)) = sigs.iter().find(|s| (s.2, s.3) != (num, den_pow)) {
        return Err(ScoreError::UnsupportedMetre(format!(
            "metre changes to {n}/{} at tick {tick}",
            1u32 << d.min(31)
        )));
    }
    Ok(metre)
}

fn split_by_channel(track: RawTrack) -> Vec<(u8, RawTrack)> {
    let mut by_channel: BTreeMap<u8, RawTrack> = BTreeMap::new();
    for n in &track.note_msgs {
        by_channel
            .entry(n.channel)
            .or_insert_with(|| RawTrack {
                end_tick: track.end_tick,
                ..RawTrack::default()
            })
            .note_msgs
            .push(*n);
    }
    by_channel.into_iter().collect()
}

fn malformed(msg: &str) -> ScoreError {
    ScoreError::MalformedMidi(msg.to_string())
}

struct Chunk<'a> {
    kind: [u8; 4],
    data: &'a [u8],
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ScoreError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| malformed("unexpected end of data"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn byte(&mut self) -> Result<u8, ScoreError> {
        Ok(self.take(1)?[0])
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn chunk(&mut self) -> Result<Chunk<'a>, ScoreError> {
        let head = self.take(8).map_err(|_| malformed("truncated chunk header"))?;
        let kind = [head[0], head[1], head[2], head[3]];
        let len = u32::from_be_bytes([head[4], head[5], head[6], head[7]]) as usize;
        let data = self.take(len).map_err(|_| malformed("truncated chunk"))?;
        Ok(Chunk { kind, data })
    }

    fn varlen(&mut self) -> Result<u64, ScoreError> {
        let mut value = 0u64;
        for _ in 0..4 {
            let b = self.byte()?;
            value = (value << 7) | u64::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(malformed("variable-length quantity longer than four bytes"))
    }
}

#[derive(Debug, Clone, Copy)]
struct NoteMsg {
    tick: u64,
    channel: u8,
    pitch: u8,
    /// Zero for note-off.
    velocity: u8,
}

#[derive(Debug, Default)]
struct RawTrack {
    note_msgs: Vec<NoteMsg>,
    tempos: Vec<(u64, u32)>,
    time_sigs: Vec<(u64, u8, u8)>,
    channel_prefix: Option<u8>,
    end_tick: u64,
}

impl RawTrack {
    fn first_channel(&self) -> Option<u8> {
        self.note_msgs
            .iter()
            .find(|n| n.velocity > 0 && n.channel != PERCUSSION_CHANNEL)
            .map(|n| n.channel)
    }

    /// Pair note-on/note-off messages first-in first-out per (channel, pitch).
    fn notes(&self, include: impl Fn(u8) -> bool) -> Vec<NoteEvent> {
        let mut open: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();
        let mut out = Vec::new();
        for m in self.note_msgs.iter().filter(|m| include(m.channel)) {
            let key = (m.channel, m.pitch);
            if m.velocity > 0 {
                open.entry(key).or_default().push_back((m.tick, m.velocity));
            } else if let Some((onset, vel)) = open.get_mut(&key).and_then(VecDeque::pop_front) {
                out.push(NoteEvent::new(m.pitch, onset, m.tick - onset, vel));
            }
        }
        let mut dangling: Vec<_> = open
            .into_iter()
            .flat_map(|((_, pitch), q)| q.into_iter().map(move |(t, v)| (t, pitch, v)))
            .collect();
        dangling.sort();
        for (onset, pitch, vel) in dangling {
            out.push(NoteEvent::new(pitch, onset, self.end_tick.saturating_sub(onset), vel));
        }
        out
    }
}

fn read_track(data: &[u8]) -> Result<RawTrack, ScoreError> {
    let mut r = Reader::new(data);
    let mut track = RawTrack::default();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    while !r.at_end() {
        tick += r.varlen()?;
        let first = r.byte()?;
        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            let status = running.ok_or_else(|| malformed("data byte without running status"))?;
            (status, Some(first))
        };
        match status {
            0xFF => {
                running = None;
                let kind = r.byte()?;
                let len = r.varlen()? as usize;
                let payload = r.take(len)?;
                match kind {
                    0x2F => {
                        track.end_tick = track.end_tick.max(tick);
                        break;
                    }
                    0x51 if len == 3 => {
                        let us = u32::from_be_bytes([0, payload[0], payload[1], payload[2]]);
                        if us > 0 {
                            track.tempos.push((tick, us));
                        }
                    }
                    0x58 if len >= 2 => track.time_sigs.push((tick, payload[0], payload[1])),
                    0x20 if len == 1 && track.channel_prefix.is_none() => {
                        track.channel_prefix = Some(payload[0] & 0x0F);
                    }
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = r.varlen()? as usize;
                r.take(len)?;
            }
            0x80..=0xEF => {
                running = Some(status);
                let d1 = match first_data {
                    Some(b) => b,
                    None => r.byte()?,
                };
                let kind = status & 0xF0;
                let d2 = if matches!(kind, 0xC0 | 0xD0) {
                    0
                } else {
                    r.byte()?
                };
                if d1 & 0x80 != 0 || d2 & 0x80 != 0 {
                    return Err(malformed("data byte with high bit set"));
                }
                let channel = status & 0x0F;
                match kind {
                    0x90 => track.note_msgs.push(NoteMsg {
                        tick,
                        channel,
                        pitch: d1,
                        velocity: d2,
                    }),
                    0x80 => track.note_msgs.push(NoteMsg {
                        tick,
                        channel,
                        pitch: d1,
                        velocity: 0,
                    }),
                    _ => {}
                }
            }
            other => return Err(malformed(&format!("unexpected status byte {other:#04x}"))),
        }
        track.end_tick = track.end_tick.max(tick);
    }
    Ok(track)
}

/// Write a format-1 file: a conductor track holding one tempo and one
/// time-signature event at tick 0, then one chunk per score track. Every
/// chunk ends at `score.end_tick` (or its last event, if later).
pub fn serialize_midi(score: &Score) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(score.tracks.len() as u16 + 1).to_be_bytes());
    out.extend_from_slice(&score.ppq.to_be_bytes());

    let mut conductor = TrackWriter::default();
    let us = score.tempo.micros_per_quarter.min(0xFF_FFFF).to_be_bytes();
    conductor.meta(0, 0x51, &us[1..]);
    let den_pow = score.metre.denominator.trailing_zeros() as u8;
    conductor.meta(0, 0x58, &[score.metre.numerator, den_pow, 24, 8]);
    conductor.meta(score.end_tick, 0x2F, &[]);
    conductor.write_chunk(&mut out);

    for track in &score.tracks {
        let mut msgs: Vec<(u64, u8, u8, u8)> = Vec::with_capacity(track.events.len() * 2);
        for e in &track.events {
            msgs.push((e.onset, 1, e.pitch, e.velocity.clamp(1, 127)));
            msgs.push((e.end(), 0, e.pitch, 0x40));
        }
        // offs before ons at the same tick so repeated notes pair correctly
        msgs.sort();
        let ch = track.channel & 0x0F;
        let mut w = TrackWriter::default();
        // channel prefix keeps the channel of a track without notes
        w.meta(0, 0x20, &[ch]);
        for (tick, on, pitch, vel) in msgs {
            let status = if on == 1 { 0x90 | ch } else { 0x80 | ch };
            w.event(tick, &[status, pitch & 0x7F, vel & 0x7F]);
        }
        let end = score.end_tick.max(w.tick);
        w.meta(end, 0x2F, &[]);
        w.write_chunk(&mut out);
    }
    out
}

#[derive(Default)]
struct TrackWriter {
    data: Vec<u8>,
    tick: u64,
}

impl TrackWriter {
    fn event(&mut self, tick: u64, bytes: &[u8]) {
        write_varlen(&mut self.data, tick - self.tick);
        self.tick = tick;
        self.data.extend_from_slice(bytes);
    }

    fn meta(&mut self, tick: u64, kind: u8, payload: &[u8]) {
        let tick = tick.max(self.tick);
        write_varlen(&mut self.data, tick - self.tick);
        self.tick = tick;
        self.data.extend_from_slice(&[0xFF, kind]);
        write_varlen(&mut self.data, payload.len() as u64);
        self.data.extend_from_slice(payload);
    }

    fn write_chunk(self, out: &mut Vec<u8>) {
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(self.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.data);
    }
}

fn write_varlen(out: &mut Vec<u8>, mut value: u64) {
    value &= 0x0FFF_FFFF;
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let more = if i > 0 { 0x80 } else { 0 };
        out.push(buf[i] | more);
    }
}
