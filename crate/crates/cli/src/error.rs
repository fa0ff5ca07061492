use std::fmt;
use std::path::Path;

use infillkit::{InfillError, ScoreError};
use infillkit_service::ConfigError;

/// Process exit codes, one per error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Usage = 2,
    Io = 3,
    Midi = 4,
    Role = 5,
    Request = 6,
    Generator = 7,
    Config = 8,
    Serve = 9,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }

    pub fn request(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Request, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(ExitCode::Io, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        let code = match e {
            ScoreError::MalformedMidi(_) | ScoreError::NoNotes | ScoreError::UnsupportedMetre(_) => {
                ExitCode::Midi
            }
            ScoreError::DuplicateRole(_) | ScoreError::RoleCount { .. } => ExitCode::Role,
            ScoreError::BarOutOfRange { .. } => ExitCode::Request,
        };
        Self::new(code, e.to_string())
    }
}

impl From<InfillError> for CliError {
    fn from(e: InfillError) -> Self {
        let code = match e {
            InfillError::GeneratorFailure { .. } => ExitCode::Generator,
            _ => ExitCode::Request,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::new(ExitCode::Config, e.to_string())
    }
}
