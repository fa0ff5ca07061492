//! JSON message types shared by the session service and the remote
//! generator adapter. MIDI payloads travel base64-encoded.

use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::infill::{Cell, InfillError, ResolvedTargets};
use crate::metrics::{ControlLevels, KeyEstimate};
use crate::score::{NoteEvent, ScoreError, TrackRole};

/// Largest decoded MIDI payload accepted anywhere on the wire.
pub const MAX_MIDI_BYTES: usize = 1 << 20;

/// Largest request body. Base64 inflates by 4/3; the rest is headroom for
/// the JSON around it.
pub const MAX_BODY_BYTES: usize = MAX_MIDI_BYTES / 3 * 4 + 64 * 1024;

pub const GENERATE_PATH: &str = "/v1/generate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedMidi,
    NoNotes,
    UnsupportedMetre,
    DuplicateRole,
    UnknownSession,
    BarOutOfRange,
    CellOutOfRange,
    EmptyRegion,
    InvalidRequest,
    PayloadTooLarge,
    ConcurrentRequest,
    NothingPending,
    NotReady,
    GeneratorFailure,
    NotFound,
    MethodNotAllowed,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 16] = [
        ErrorCode::MalformedMidi,
        ErrorCode::NoNotes,
        ErrorCode::UnsupportedMetre,
        ErrorCode::DuplicateRole,
        ErrorCode::UnknownSession,
        ErrorCode::BarOutOfRange,
        ErrorCode::CellOutOfRange,
        ErrorCode::EmptyRegion,
        ErrorCode::InvalidRequest,
        ErrorCode::PayloadTooLarge,
        ErrorCode::ConcurrentRequest,
        ErrorCode::NothingPending,
        ErrorCode::NotReady,
        ErrorCode::GeneratorFailure,
        ErrorCode::NotFound,
        ErrorCode::MethodNotAllowed,
    ];

    pub fn http_status(self) -> u16 {
        use ErrorCode::*;
        match self {
            MalformedMidi | InvalidRequest => 400,
            UnknownSession | NotFound => 404,
            MethodNotAllowed => 405,
            ConcurrentRequest | NothingPending | NotReady => 409,
            PayloadTooLarge => 413,
            NoNotes | UnsupportedMetre | DuplicateRole | BarOutOfRange | CellOutOfRange
            | EmptyRegion => 422,
            GeneratorFailure => 502,
        }
    }

    pub fn as_str(self) -> &'static str {
        use ErrorCode::*;
        match self {
            MalformedMidi => "malformed_midi",
            NoNotes => "no_notes",
            UnsupportedMetre => "unsupported_metre",
            DuplicateRole => "duplicate_role",
            UnknownSession => "unknown_session",
            BarOutOfRange => "bar_out_of_range",
            CellOutOfRange => "cell_out_of_range",
            EmptyRegion => "empty_region",
            InvalidRequest => "invalid_request",
            PayloadTooLarge => "payload_too_large",
            ConcurrentRequest => "concurrent_request",
            NothingPending => "nothing_pending",
            NotReady => "not_ready",
            GeneratorFailure => "generator_failure",
            NotFound => "not_found",
            MethodNotAllowed => "method_not_allowed",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed failure that maps onto an error response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireError {
    pub code: ErrorCode,
    pub message: String,
}

impl WireError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidRequest, message)
    }

    pub fn status(&self) -> u16 {
        self.code.http_status()
    }

    pub fn to_body(&self) -> String {
        serde_json::to_string(&ErrorEnvelope {
            error: ErrorBody {
                code: self.code,
                message: self.message.clone(),
            },
        })
        .expect("error envelope serializes")
    }
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for WireError {}

impl From<ScoreError> for WireError {
    fn from(e: ScoreError) -> Self {
        let code = match e {
            ScoreError::MalformedMidi(_) => ErrorCode::MalformedMidi,
            ScoreError::NoNotes => ErrorCode::NoNotes,
            ScoreError::UnsupportedMetre(_) => ErrorCode::UnsupportedMetre,
            ScoreError::DuplicateRole(_) => ErrorCode::DuplicateRole,
            ScoreError::RoleCount { .. } => ErrorCode::InvalidRequest,
            ScoreError::BarOutOfRange { .. } => ErrorCode::BarOutOfRange,
        };
        Self::new(code, e.to_string())
    }
}

impl From<InfillError> for WireError {
    fn from(e: InfillError) -> Self {
        let code = match e {
            InfillError::EmptyRegion => ErrorCode::EmptyRegion,
            InfillError::CellOutOfRange(_) => ErrorCode::CellOutOfRange,
            InfillError::LevelOutOfRange { .. } | InfillError::TargetShape(_) => {
                ErrorCode::InvalidRequest
            }
            InfillError::GeneratorFailure { .. } => ErrorCode::GeneratorFailure,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

pub fn encode_midi(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_midi(text: &str) -> Result<Vec<u8>, WireError> {
    if text.len() > MAX_MIDI_BYTES.div_ceil(3) * 4 {
        return Err(WireError::new(
            ErrorCode::PayloadTooLarge,
            format!("MIDI payload exceeds {MAX_MIDI_BYTES} bytes"),
        ));
    }
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| WireError::new(ErrorCode::MalformedMidi, format!("bad base64: {e}")))?;
    if bytes.len() > MAX_MIDI_BYTES {
        return Err(WireError::new(
            ErrorCode::PayloadTooLarge,
            format!("MIDI payload exceeds {MAX_MIDI_BYTES} bytes"),
        ));
    }
    Ok(bytes)
}

/// Parse a JSON body into `T`, mapping every failure to `invalid_request`.
pub fn parse_body<'a, T: Deserialize<'a>>(body: &'a str) -> Result<T, WireError> {
    if body.len() > MAX_BODY_BYTES {
        return Err(WireError::new(
            ErrorCode::PayloadTooLarge,
            format!("body exceeds {MAX_BODY_BYTES} bytes"),
        ));
    }
    serde_json::from_str(body).map_err(|e| WireError::invalid(e.to_string()))
}

/// Level targets for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellTargetMsg {
    pub track: usize,
    pub bar: usize,
    pub density: u8,
    pub polyphony: u8,
    pub occupation: u8,
}

impl CellTargetMsg {
    pub fn cell(&self) -> Cell {
        Cell::new(self.track, self.bar)
    }

    pub fn levels(&self) -> ControlLevels {
        ControlLevels::new(self.density, self.polyphony, self.occupation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarLevelMsg {
    pub bar: usize,
    pub level: u8,
}

/// Body of `POST /v1/generate`. `midi` holds every note touching the window
/// at full length; `cells` is the region together with its resolved targets
/// and `tension` covers every region bar. Bars are 0-based window bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequestMsg {
    pub midi: String,
    /// 1-based bar of the parent score where the window starts.
    pub origin_bar: usize,
    pub bars: usize,
    pub roles: Vec<TrackRole>,
    pub cells: Vec<CellTargetMsg>,
    pub tension: Vec<BarLevelMsg>,
    pub key: KeyEstimate,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEventsMsg {
    pub track: usize,
    pub bar: usize,
    pub notes: Vec<NoteEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateResponseMsg {
    pub cells: Vec<CellEventsMsg>,
}

pub(crate) fn targets_to_msgs(targets: &ResolvedTargets) -> (Vec<CellTargetMsg>, Vec<BarLevelMsg>) {
    let cells = targets
        .cells
        .iter()
        .map(|(c, l)| CellTargetMsg {
            track: c.track,
            bar: c.bar,
            density: l.density,
            polyphony: l.polyphony,
            occupation: l.occupation,
        })
        .collect();
    let tension = targets
        .tension
        .iter()
        .map(|(bar, level)| BarLevelMsg {
            bar: *bar,
            level: *level,
        })
        .collect();
    (cells, tension)
}
