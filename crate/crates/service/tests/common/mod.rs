//! Independent oracles and fixtures shared by the integration tests. Nothing
//! here calls into the library's metric, key or tension code.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use infillkit::{NoteEvent, Score};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

// ---------------------------------------------------------------- SMF writer

/// A note as the writer emits it, with an absolute tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawNote {
    pub onset: u64,
    pub pitch: u8,
    pub duration: u64,
    pub velocity: u8,
}

#[derive(Debug, Clone)]
pub struct RawSong {
    pub format: u16,
    pub ppq: u16,
    pub tempo_us: u32,
    pub numerator: u8,
    pub denominator_pow: u8,
    /// (channel, notes) per musical track.
    pub tracks: Vec<(u8, Vec<RawNote>)>,
    pub bars: u64,
}

fn vlq(out: &mut Vec<u8>, mut v: u64) {
    let mut stack = vec![(v & 0x7F) as u8];
    v >>= 7;
    while v > 0 {
        stack.push((v & 0x7F) as u8 | 0x80);
        v >>= 7;
    }
    out.extend(stack.iter().rev());
}

/// Random song: 1-3 tracks, 1-32 bars, 4/4 or 3/4. Pitches on one track
/// never overlap themselves, so the file has a single reading.
pub fn random_song(rng: &mut StdRng) -> RawSong {
    let ppq = [96u16, 120, 240, 384, 480, 960][rng.random_range(0..6)];
    let numerator = if rng.random_bool(0.5) { 4 } else { 3 };
    let bars = rng.random_range(1..=32u64);
    let bar = u64::from(ppq) * u64::from(numerator);
    let end = bars * bar;
    let ntracks = rng.random_range(1..=3usize);
    let mut tracks = Vec::new();
    for t in 0..ntracks {
        let channel = [0u8, 1, 2, 3, 4, 5, 6, 7, 8, 10][(t * 3 + rng.random_range(0..3)) % 10];
        let mut notes = Vec::new();
        let mut busy: BTreeMap<u8, u64> = BTreeMap::new();
        let count = rng.random_range(1..=(bars * 6).max(1));
        for _ in 0..count {
            let pitch = rng.random_range(24..=100u8);
            let onset = rng.random_range(0..end);
            let duration = rng.random_range(1..=bar * 2).min(end - onset).max(1);
            let free = busy.get(&pitch).copied().unwrap_or(0);
            if onset < free {
                continue;
            }
            // one gap tick keeps a same-pitch note-off clearly before the next on
            busy.insert(pitch, onset + duration + 1);
            notes.push(RawNote {
                onset,
                pitch,
                duration,
                velocity: rng.random_range(1..=127),
            });
        }
        if notes.is_empty() {
            notes.push(RawNote { onset: 0, pitch: 60, duration: 1, velocity: 64 });
        }
        notes.sort();
        tracks.push((channel, notes));
    }
    RawSong {
        format: if ntracks == 1 || rng.random_bool(0.7) { 1 } else { 0 },
        ppq,
        tempo_us: rng.random_range(300_000..1_200_000),
        numerator,
        denominator_pow: 2,
        tracks,
        bars,
    }
}

impl RawSong {
    fn track_events(&self, channel: u8, notes: &[RawNote], rng: &mut StdRng) -> Vec<(u64, u8, Vec<u8>)> {
        // (tick, order, bytes): order 0 = meta, 1 = off, 2 = on
        let mut ev = Vec::new();
        for n in notes {
            ev.push((n.onset, 2, vec![0x90 | channel, n.pitch, n.velocity]));
            let off = if rng.random_bool(0.5) {
                vec![0x80 | channel, n.pitch, rng.random_range(0..128)]
            } else {
                vec![0x90 | channel, n.pitch, 0]
            };
            ev.push((n.onset + n.duration, 1, off));
        }
        if rng.random_bool(0.5) {
            // program change and a controller, ignored by the reader
            ev.push((0, 0, vec![0xC0 | channel, rng.random_range(0..128)]));
            ev.push((0, 0, vec![0xB0 | channel, 7, 100]));
        }
        ev
    }

    fn chunk(events: &mut Vec<(u64, u8, Vec<u8>)>, end: u64, running: bool) -> Vec<u8> {
        events.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut body = Vec::new();
        let mut last = 0u64;
        let mut status = 0u8;
        for (tick, _, bytes) in events.iter() {
            vlq(&mut body, tick - last);
            last = *tick;
            if bytes[0] == 0xFF {
                status = 0;
                body.extend_from_slice(bytes);
            } else if running && bytes[0] == status {
                body.extend_from_slice(&bytes[1..]);
            } else {
                status = bytes[0];
                body.extend_from_slice(bytes);
            }
        }
        vlq(&mut body, end.saturating_sub(last));
        body.extend_from_slice(&[0xFF, 0x2F, 0x00]);
        let mut out = b"MTrk".to_vec();
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend(body);
        out
    }

    pub fn to_bytes(&self, rng: &mut StdRng) -> Vec<u8> {
        let end = self.bars * u64::from(self.ppq) * u64::from(self.numerator);
        let running = rng.random_bool(0.5);
        let t = self.tempo_us.to_be_bytes();
        let conductor = vec![
            (0u64, 0u8, vec![0xFF, 0x03, 4, b's', b'o', b'n', b'g']),
            (0, 0, vec![0xFF, 0x51, 3, t[1], t[2], t[3]]),
            (0, 0, vec![0xFF, 0x58, 4, self.numerator, self.denominator_pow, 24, 8]),
        ];
        let mut chunks = Vec::new();
        if self.format == 0 {
            let mut all = conductor;
            for (ch, notes) in &self.tracks {
                all.extend(self.track_events(*ch, notes, rng));
            }
            chunks.push(Self::chunk(&mut all, end, running));
        } else {
            let mut c = conductor;
            chunks.push(Self::chunk(&mut c, end, running));
            for (ch, notes) in &self.tracks {
                let mut ev = self.track_events(*ch, notes, rng);
                chunks.push(Self::chunk(&mut ev, end, running));
            }
        }
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&self.format.to_be_bytes());
        out.extend_from_slice(&(chunks.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.ppq.to_be_bytes());
        for c in chunks {
            out.extend(c);
        }
        out
    }
}

/// Multiset of (pitch, onset, duration, velocity) per track, track order kept.
pub fn event_multisets(score: &Score) -> Vec<Vec<(u64, u8, u64, u8)>> {
    score
        .tracks
        .iter()
        .map(|t| {
            let mut v: Vec<_> = t
                .events
                .iter()
                .map(|e| (e.onset, e.pitch, e.duration, e.velocity))
                .collect();
            v.sort();
            v
        })
        .collect()
}

// ------------------------------------------------------------ metric oracle

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMetrics {
    pub density: f64,
    pub polyphony: f64,
    pub occupation: f64,
}

/// Walk every tick of `[start, end)` counting sounding notes.
pub fn tick_sweep(notes: &[NoteEvent], start: u64, end: u64) -> OracleMetrics {
    let mut onsets = 0u64;
    for n in notes {
        if n.onset >= start && n.onset < end {
            onsets += 1;
        }
    }
    let mut sounding_ticks = 0u64;
    let mut note_ticks = 0u64;
    for tick in start..end {
        let c = notes
            .iter()
            .filter(|n| n.onset <= tick && tick < n.onset + n.duration)
            .count() as u64;
        if c > 0 {
            sounding_ticks += 1;
            note_ticks += c;
        }
    }
    OracleMetrics {
        density: onsets as f64,
        polyphony: if sounding_ticks == 0 {
            0.0
        } else {
            note_ticks as f64 / sounding_ticks as f64
        },
        occupation: sounding_ticks as f64 / (end - start) as f64,
    }
}

pub const DENSITY_EDGES: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0];
pub const POLYPHONY_EDGES: [f64; 9] = [1.0, 1.2, 1.6, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0];
pub const OCCUPATION_EDGES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const STRAIN_EDGES: [f64; 9] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8];

/// Bin index by linear search over the interior edges.
pub fn oracle_level(edges: &[f64; 9], raw: f64) -> u8 {
    let mut level = 0;
    for (i, e) in edges.iter().enumerate() {
        // the decimal edges are compared with a little slack for float noise
        if raw >= *e - 1e-12 {
            level = i as u8 + 1;
        }
    }
    level
}

pub fn oracle_levels(m: &OracleMetrics) -> [u8; 3] {
    [
        oracle_level(&DENSITY_EDGES, m.density),
        oracle_level(&POLYPHONY_EDGES, m.polyphony),
        oracle_level(&OCCUPATION_EDGES, m.occupation),
    ]
}

// ------------------------------------------------------------ spiral oracle

pub type P3 = [f64; 3];

pub fn h() -> f64 {
    (2.0f64 / 15.0).sqrt()
}

pub fn point(k: i32) -> P3 {
    let a = f64::from(k) * FRAC_PI_2;
    [a.sin(), a.cos(), f64::from(k) * h()]
}

pub fn dist(a: P3, b: P3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn mean(points: &[(P3, f64)]) -> P3 {
    let w: f64 = points.iter().map(|p| p.1).sum();
    let mut c = [0.0; 3];
    for (p, wt) in points {
        for i in 0..3 {
            c[i] += p[i] * wt / w;
        }
    }
    c
}

/// Line-of-fifths index of pitch class `pc` within `[t - 5, t + 6]`, where
/// `t` is the tonic's own index.
pub fn spell(pc: u8, tonic_index: i32) -> i32 {
    (tonic_index - 5..=tonic_index + 6)
        .find(|k| (k * 7).rem_euclid(12) == i32::from(pc))
        .expect("twelve consecutive indices cover every class")
}

/// Major-key centre for the tonic at fifths index `k`.
pub fn major_key_center(k: i32) -> P3 {
    let triad = |r: i32| mean(&[(point(r), 1.0), (point(r + 1), 1.0), (point(r + 4), 1.0)]);
    let (t, d, s) = (triad(k), triad(k + 1), triad(k - 1));
    [0, 1, 2].map(|i| 0.6 * t[i] + 0.2 * d[i] + 0.2 * s[i])
}

/// Cloud centre of (pitch, weight) pairs spelled around a major tonic.
pub fn cloud(notes: &[(u8, f64)], tonic_index: i32) -> P3 {
    let pts: Vec<(P3, f64)> = notes
        .iter()
        .map(|(p, w)| (point(spell(p % 12, tonic_index)), *w))
        .collect();
    mean(&pts)
}

pub fn diameter(notes: &[(u8, f64)], tonic_index: i32) -> f64 {
    let pts: Vec<P3> = notes.iter().map(|(p, _)| point(spell(p % 12, tonic_index))).collect();
    let mut best = 0.0f64;
    for a in &pts {
        for b in &pts {
            best = best.max(dist(*a, *b));
        }
    }
    best
}

// --------------------------------------------------------------- key oracle

pub const KK_MAJOR: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
pub const KK_MINOR: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

fn pearson(x: &[f64; 12], y: &[f64; 12]) -> f64 {
    let mx = x.iter().sum::<f64>() / 12.0;
    let my = y.iter().sum::<f64>() / 12.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Best (tonic, is_major, r) over the 24 rotated profiles.
pub fn oracle_key(hist: &[f64; 12]) -> (u8, bool, f64) {
    let mut all = Vec::new();
    for tonic in 0..12u8 {
        for (major, profile) in [(true, &KK_MAJOR), (false, &KK_MINOR)] {
            let rotated: [f64; 12] = std::array::from_fn(|pc| profile[(pc + 12 - tonic as usize) % 12]);
            all.push((tonic, major, pearson(hist, &rotated)));
        }
    }
    all.into_iter()
        .fold(None::<(u8, bool, f64)>, |best, c| match best {
            Some(b) if b.2 >= c.2 => Some(b),
            _ => Some(c),
        })
        .expect("24 candidates")
}

/// Duration-weighted pitch-class histogram of every note, clipped to `[a, b)`.
pub fn histogram(notes: &[NoteEvent], a: u64, b: u64) -> [f64; 12] {
    let mut h = [0.0; 12];
    for n in notes {
        let lo = n.onset.max(a);
        let hi = (n.onset + n.duration).min(b);
        if hi > lo {
            h[(n.pitch % 12) as usize] += (hi - lo) as f64;
        }
    }
    h
}

// ----------------------------------------------------- JSON Schema checker

/// Enough of JSON Schema for the shipped protocol schema: `$ref` into
/// `$defs`, `type` (string or list), `properties`, `required`,
/// `additionalProperties: false`, `items`, `enum`, `const`, `minimum`,
/// `maximum`, `minItems`, `maxItems`, `maxLength`, `pattern` (prefix `^` and
/// character classes are not interpreted), `oneOf`.
pub struct Schema {
    root: Value,
}

impl Schema {
    pub fn load() -> Schema {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/protocol.schema.json");
        let text = std::fs::read_to_string(path).expect("schema file");
        Schema {
            root: serde_json::from_str(&text).expect("schema is JSON"),
        }
    }

    pub fn def_names(&self) -> Vec<String> {
        self.root["$defs"]
            .as_object()
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Validate `value` against `$defs/<name>`.
    pub fn check(&self, name: &str, value: &Value) -> Result<(), String> {
        let schema = self.root["$defs"]
            .get(name)
            .ok_or_else(|| format!("schema has no definition {name}"))?;
        self.validate(schema, value, name)
    }

    fn resolve<'a>(&'a self, schema: &'a Value) -> Result<&'a Value, String> {
        match schema.get("$ref").and_then(Value::as_str) {
            Some(r) => {
                let name = r
                    .strip_prefix("#/$defs/")
                    .ok_or_else(|| format!("unsupported $ref {r}"))?;
                self.root["$defs"].get(name).ok_or_else(|| format!("dangling $ref {r}"))
            }
            None => Ok(schema),
        }
    }

    fn validate(&self, schema: &Value, v: &Value, at: &str) -> Result<(), String> {
        let schema = self.resolve(schema)?;
        if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
            let ok = options.iter().filter(|s| self.validate(s, v, at).is_ok()).count();
            if ok != 1 {
                return Err(format!("{at}: matches {ok} oneOf branches"));
            }
        }
        if let Some(t) = schema.get("type") {
            let types: Vec<&str> = match t {
                Value::String(s) => vec![s.as_str()],
                Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
                _ => return Err(format!("{at}: bad type keyword")),
            };
            let ok = types.iter().any(|t| match *t {
                "object" => v.is_object(),
                "array" => v.is_array(),
                "string" => v.is_string(),
                "boolean" => v.is_boolean(),
                "null" => v.is_null(),
                "number" => v.is_number(),
                "integer" => v.as_u64().is_some() || v.as_i64().is_some(),
                _ => false,
            });
            if !ok {
                return Err(format!("{at}: expected {types:?}, got {v}"));
            }
        }
        if let Some(e) = schema.get("enum").and_then(Value::as_array) {
            if !e.contains(v) {
                return Err(format!("{at}: {v} not in enum"));
            }
        }
        if let Some(c) = schema.get("const") {
            if c != v {
                return Err(format!("{at}: expected const {c}"));
            }
        }
        if let Some(x) = v.as_f64() {
            if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
                if x < min {
                    return Err(format!("{at}: {x} < minimum {min}"));
                }
            }
            if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
                if x > max {
                    return Err(format!("{at}: {x} > maximum {max}"));
                }
            }
        }
        if let (Some(s), Some(max)) = (v.as_str(), schema.get("maxLength").and_then(Value::as_u64)) {
            if s.len() as u64 > max {
                return Err(format!("{at}: string longer than {max}"));
            }
        }
        if let Some(obj) = v.as_object() {
            let props = schema.get("properties").and_then(Value::as_object);
            if let Some(req) = schema.get("required").and_then(Value::as_array) {
                for r in req.iter().filter_map(Value::as_str) {
                    if !obj.contains_key(r) {
                        return Err(format!("{at}: missing required {r}"));
                    }
                }
            }
            for (k, val) in obj {
                match props.and_then(|p| p.get(k)) {
                    Some(s) => self.validate(s, val, &format!("{at}.{k}"))?,
                    None => {
                        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                            return Err(format!("{at}: unexpected property {k}"));
                        }
                    }
                }
            }
        }
        if let Some(arr) = v.as_array() {
            if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
                if (arr.len() as u64) < min {
                    return Err(format!("{at}: fewer than {min} items"));
                }
            }
            if let Some(max) = schema.get("maxItems").and_then(Value::as_u64) {
                if arr.len() as u64 > max {
                    return Err(format!("{at}: more than {max} items"));
                }
            }
            if let Some(items) = schema.get("items") {
                for (i, item) in arr.iter().enumerate() {
                    self.validate(items, item, &format!("{at}[{i}]"))?;
                }
            }
        }
        Ok(())
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
