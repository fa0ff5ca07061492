//! A [`GeneratorPort`] that forwards requests over the wire, and the server
//! side of the same exchange.

use std::collections::BTreeSet;
use std::time::Duration;

use super::{
    clear_region, effective_roles, validate_cell_events, validate_region, CellOutput,
    GenerationRequest, GeneratorError, GeneratorPort, RegionSpec, ResolvedTargets,
};
use crate::metrics::MAX_LEVEL;
use crate::score::{
    assign_roles, parse_midi_with, serialize_midi, slice_window_len, ParseOptions,
};
use crate::wire::{
    decode_midi, encode_midi, parse_body, targets_to_msgs, CellEventsMsg, ErrorCode,
    ErrorEnvelope, GenerateRequestMsg, GenerateResponseMsg, WireError, GENERATE_PATH,
};

/// Status and body of one response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireResponse {
    pub status: u16,
    pub body: String,
}

impl WireResponse {
    pub fn ok(body: String) -> Self {
        Self { status: 200, body }
    }

    pub fn error(e: &WireError) -> Self {
        Self {
            status: e.status(),
            body: e.to_body(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// No answer within the deadline, or nobody listening.
    Timeout(String),
    Io(String),
}

/// Moves one JSON request to an endpoint and brings back the response.
pub trait Transport {
    fn post(&self, path: &str, body: &str, timeout: Duration)
        -> Result<WireResponse, TransportError>;
}

pub struct RemoteGenerator<T> {
    transport: T,
    timeout: Duration,
}

impl<T: Transport> RemoteGenerator<T> {
    pub fn new(transport: T, timeout: Duration) -> Self {
        Self { transport, timeout }
    }
}

/// The wire form of a generation request.
pub fn request_message(request: &GenerationRequest<'_>) -> GenerateRequestMsg {
    let (cells, tension) = targets_to_msgs(request.targets);
    GenerateRequestMsg {
        midi: encode_midi(&serialize_midi(&request.window.context_score())),
        origin_bar: request.window.origin_bar,
        bars: request.window.length,
        roles: request.window.roles(),
        cells,
        tension,
        key: request.key,
        seed: request.seed,
    }
}

impl<T: Transport> GeneratorPort for RemoteGenerator<T> {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<CellOutput, GeneratorError> {
        let body = serde_json::to_string(&request_message(request))
            .map_err(|e| GeneratorError::Protocol(e.to_string()))?;
        let response = self
            .transport
            .post(GENERATE_PATH, &body, self.timeout)
            .map_err(|e| match e {
                TransportError::Timeout(m) => GeneratorError::Timeout(m),
                TransportError::Io(m) => GeneratorError::Protocol(m),
            })?;
        if response.status != 200 {
            let detail = serde_json::from_str::<ErrorEnvelope>(&response.body)
                .map(|env| format!("{}: {}", env.error.code, env.error.message))
                .unwrap_or_else(|_| format!("HTTP {}", response.status));
            return Err(GeneratorError::Protocol(detail));
        }
        let msg: GenerateResponseMsg = serde_json::from_str(&response.body)
            .map_err(|e| GeneratorError::Protocol(format!("bad response body: {e}")))?;
        check_remote_output(request, msg)
    }
}

fn check_remote_output(
    request: &GenerationRequest<'_>,
    msg: GenerateResponseMsg,
) -> Result<CellOutput, GeneratorError> {
    let invalid = GeneratorError::InvalidRemoteOutput;
    let mut out = CellOutput::new();
    for c in msg.cells {
        let cell = super::Cell::new(c.track, c.bar);
        if !request.region.contains(&cell) {
            return Err(invalid(format!("notes for {cell}, which is not in the region")));
        }
        if out.insert(cell, c.notes).is_some() {
            return Err(invalid(format!("{cell} appears twice")));
        }
    }
    if let Some(missing) = request.region.cells().find(|c| !out.contains_key(c)) {
        return Err(invalid(format!("no notes returned for {missing}")));
    }
    // Cells never share a track and bar, so each can be checked on its own
    // against the cleared window.
    let cleared = clear_region(request.window, request.region);
    for (cell, events) in &mut out {
        events.sort();
        validate_cell_events(&cleared, request.roles, *cell, events).map_err(invalid)?;
    }
    Ok(out)
}

/// Serve one `POST /v1/generate` body with `generator`.
pub fn serve_generate(generator: &dyn GeneratorPort, body: &str) -> WireResponse {
    match handle_generate(generator, body) {
        Ok(msg) => WireResponse::ok(serde_json::to_string(&msg).expect("response serializes")),
        Err(e) => WireResponse::error(&e),
    }
}

pub fn handle_generate(
    generator: &dyn GeneratorPort,
    body: &str,
) -> Result<GenerateResponseMsg, WireError> {
    let msg: GenerateRequestMsg = parse_body(body)?;
    let bytes = decode_midi(&msg.midi)?;
    let score = parse_midi_with(
        &bytes,
        ParseOptions {
            keep_empty_tracks: true,
        },
    )?;
    if score.tracks.len() != msg.roles.len() {
        return Err(WireError::invalid(format!(
            "{} roles for {} tracks",
            msg.roles.len(),
            score.tracks.len()
        )));
    }
    let score = assign_roles(&score, &msg.roles)?;
    let window = slice_window_len(&score, msg.origin_bar, msg.bars)?;
    if window.length != msg.bars {
        return Err(WireError::invalid(format!(
            "window holds {} bars, request says {}",
            window.length, msg.bars
        )));
    }

    let mut targets = ResolvedTargets::default();
    for c in &msg.cells {
        if [c.density, c.polyphony, c.occupation].iter().any(|v| *v > MAX_LEVEL) {
            return Err(WireError::invalid(format!("{}: level above {MAX_LEVEL}", c.cell())));
        }
        if targets.cells.insert(c.cell(), c.levels()).is_some() {
            return Err(WireError::invalid(format!("{} listed twice", c.cell())));
        }
    }
    let region = RegionSpec::new(targets.cells.keys().copied())?;
    validate_region(&window, &region)?;
    for t in &msg.tension {
        if t.level > MAX_LEVEL {
            return Err(WireError::invalid(format!("bar {}: tension above {MAX_LEVEL}", t.bar)));
        }
        if targets.tension.insert(t.bar, t.level).is_some() {
            return Err(WireError::invalid(format!("tension for bar {} listed twice", t.bar)));
        }
    }
    let bars: BTreeSet<usize> = targets.tension.keys().copied().collect();
    if bars != region.bars() {
        return Err(WireError::invalid("tension must cover exactly the region bars"));
    }

    let roles = effective_roles(&window.roles());
    let request = GenerationRequest {
        window: &window,
        roles: &roles,
        region: &region,
        targets: &targets,
        key: msg.key,
        seed: msg.seed,
    };
    let output = generator
        .generate(&request)
        .map_err(|e| WireError::new(ErrorCode::GeneratorFailure, e.to_string()))?;
    Ok(GenerateResponseMsg {
        cells: output
            .into_iter()
            .map(|(c, notes)| CellEventsMsg {
                track: c.track,
                bar: c.bar,
                notes,
            })
            .collect(),
    })
}

/// In-process transport that answers with a local generator, going through
/// full serialization both ways.
pub struct LoopbackTransport<G> {
    generator: G,
}

impl<G: GeneratorPort> LoopbackTransport<G> {
    pub fn new(generator: G) -> Self {
        Self { generator }
    }
}

impl<G: GeneratorPort> Transport for LoopbackTransport<G> {
    fn post(
        &self,
        path: &str,
        body: &str,
        _timeout: Duration,
    ) -> Result<WireResponse, TransportError> {
        if path != GENERATE_PATH {
            return Ok(WireResponse::error(&WireError::new(
                ErrorCode::NotFound,
                format!("no route for {path}"),
            )));
        }
        Ok(serve_generate(&self.generator, body))
    }
}

/// A transport answering from a fixed function; handy for tests.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(&str, &str) -> Result<WireResponse, TransportError>,
{
    fn post(
        &self,
        path: &str,
        body: &str,
        _timeout: Duration,
    ) -> Result<WireResponse, TransportError> {
        (self.0)(path, body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infill::{infill, BaselineGenerator, Cell, ControlTarget, InfillError};
    use crate::score::{slice_window, Metre, NoteEvent, Score, Tempo, Track, TrackRole};

    fn window() -> crate::score::ScoreWindow {
        let melody = (0..8u64)
            .flat_map(|b| [0u64, 960].map(move |o| NoteEvent::new(67 + (b % 3) as u8, b * 1920 + o, 900, 80)))
            .collect();
        let bass = (0..8).map(|b| NoteEvent::new(36, b * 1920, 1920, 80)).collect();
        let score = Score {
            ppq: 480,
            tempo: Tempo::DEFAULT,
            metre: Metre::COMMON,
            tracks: vec![
                Track::new(TrackRole::Melody, 0, melody),
                Track::new(TrackRole::Bass, 1, bass),
                Track::empty(2),
            ],
            end_tick: 8 * 1920,
        };
        slice_window(&score, 1).unwrap()
    }

    #[test]
    fn loopback_equals_local() {
        let w = window();
        let region = RegionSpec::new([Cell::new(0, 2), Cell::new(2, 2), Cell::new(1, 5)]).unwrap();
        let local = infill(&w, &region, &ControlTarget::default(), 7, &BaselineGenerator::default())
            .unwrap();
        let remote = RemoteGenerator::new(
            LoopbackTransport::new(BaselineGenerator::default()),
            Duration::from_secs(1),
        );
        let via = infill(&w, &region, &ControlTarget::default(), 7, &remote).unwrap();
        assert_eq!(local, via);
    }

    #[test]
    fn notes_outside_region_rejected() {
        let w = window();
        let region = RegionSpec::single(0, 2);
        let bad = FnTransport(|_: &str, _: &str| {
            let msg = GenerateResponseMsg {
                cells: vec![
                    CellEventsMsg { track: 0, bar: 2, notes: vec![] },
                    CellEventsMsg { track: 0, bar: 3, notes: vec![] },
                ],
            };
            Ok(WireResponse::ok(serde_json::to_string(&msg).unwrap()))
        });
        let remote = RemoteGenerator::new(bad, Duration::from_secs(1));
        let err = infill(&w, &region, &ControlTarget::default(), 1, &remote).unwrap_err();
        match err {
            InfillError::GeneratorFailure { reason, .. } => {
                assert!(reason.contains("not in the region"), "{reason}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn note_in_another_bar_rejected() {
        let w = window();
        let region = RegionSpec::single(0, 2);
        let bad = FnTransport(|_: &str, _: &str| {
            let msg = GenerateResponseMsg {
                cells: vec![CellEventsMsg {
                    track: 0,
                    bar: 2,
                    // bar 3 onset
                    notes: vec![NoteEvent::new(72, 3 * 1920, 240, 80)],
                }],
            };
            Ok(WireResponse::ok(serde_json::to_string(&msg).unwrap()))
        });
        let remote = RemoteGenerator::new(bad, Duration::from_secs(1));
        let err = infill(&w, &region, &ControlTarget::default(), 1, &remote).unwrap_err();
        assert!(matches!(err, InfillError::GeneratorFailure { .. }));
    }

    #[test]
    fn timeout_and_error_bodies_surface() {
        let w = window();
        let region = RegionSpec::single(0, 0);
        let slow = FnTransport(|_: &str, _: &str| Err(TransportError::Timeout("deadline".into())));
        let err = infill(&w, &region, &ControlTarget::default(), 1,
            &RemoteGenerator::new(slow, Duration::from_millis(5))).unwrap_err();
        assert!(err.to_string().contains("timed out"), "{err}");

        let refusing = FnTransport(|_: &str, _: &str| {
            Ok(WireResponse::error(&WireError::new(ErrorCode::NoNotes, "x")))
        });
        let err = infill(&w, &region, &ControlTarget::default(), 1,
            &RemoteGenerator::new(refusing, Duration::from_millis(5))).unwrap_err();
        assert!(err.to_string().contains("no_notes"), "{err}");
    }

    #[test]
    fn server_rejects_bad_requests() {
        let g = BaselineGenerator::default();
        assert_eq!(serve_generate(&g, "{").status, 400);
        let w = window();
        let region = RegionSpec::single(0, 1);
        let targets = ControlTarget::default()
            .resolve(&crate::analysis::analyze_window(&w), &region)
            .unwrap();
        let roles = effective_roles(&w.roles());
        let request = GenerationRequest {
            window: &w,
            roles: &roles,
            region: &region,
            targets: &targets,
            key: crate::metrics::KeyEstimate::fallback(),
            seed: 3,
        };
        let good = request_message(&request);
        assert_eq!(serve_generate(&g, &serde_json::to_string(&good).unwrap()).status, 200);

        let mut m = good.clone();
        m.cells[0].density = 12;
        assert_eq!(serve_generate(&g, &serde_json::to_string(&m).unwrap()).status, 400);
        let mut m = good.clone();
        m.cells[0].bar = 30;
        m.tension[0].bar = 30;
        let r = serve_generate(&g, &serde_json::to_string(&m).unwrap());
        assert!(r.body.contains("cell_out_of_range"), "{}", r.body);
        let mut m = good.clone();
        m.midi = "AAAA".into();
        let r = serve_generate(&g, &serde_json::to_string(&m).unwrap());
        assert!(r.body.contains("malformed_midi"), "{}", r.body);
        let mut m = good;
        m.cells.clear();
        m.tension.clear();
        let r = serve_generate(&g, &serde_json::to_string(&m).unwrap());
        assert!(r.body.contains("empty_region"), "{}", r.body);
    }
}
