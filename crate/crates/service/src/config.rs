use std::path::{Path, PathBuf};
use std::time::Duration;

use infillkit::BaselineGenerator;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
}

/// Service settings, read from TOML. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Idle minutes before a session is dropped.
    pub ttl_minutes: u64,
    /// Write one JSON snapshot per session here on every commit.
    pub snapshot_dir: Option<PathBuf>,
    /// Worker threads of the HTTP server.
    pub workers: usize,
    pub generator: GeneratorConfig,
    /// Model server used when a request selects the remote generator.
    pub remote: Option<RemoteConfig>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            ttl_minutes: 60,
            snapshot_dir: None,
            workers: 4,
            generator: GeneratorConfig::default(),
            remote: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub candidates: usize,
    pub weights: [f64; 4],
    pub grid_per_quarter: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let b = BaselineGenerator::default();
        Self {
            candidates: b.candidates,
            weights: b.weights,
            grid_per_quarter: b.grid_per_quarter,
        }
    }
}

impl GeneratorConfig {
    pub fn baseline(&self) -> BaselineGenerator {
        BaselineGenerator {
            candidates: self.candidates,
            weights: self.weights,
            grid_per_quarter: self.grid_per_quarter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://10.0.0.5:7700`.
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl RemoteConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn ttl(&self) -> Duration {
        Duration::from_secs(self.ttl_minutes.saturating_mul(60))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Parse("workers must be at least 1".into()));
        }
        if self.generator.candidates == 0 {
            return Err(ConfigError::Parse("generator.candidates must be at least 1".into()));
        }
        if self.generator.grid_per_quarter == 0 {
            return Err(ConfigError::Parse("generator.grid_per_quarter must be at least 1".into()));
        }
        if self.generator.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ConfigError::Parse("generator.weights must be finite and non-negative".into()));
        }
        if let Some(r) = &self.remote {
            if !r.endpoint.starts_with("http://") {
                return Err(ConfigError::Parse(format!(
                    "remote.endpoint must be an http:// URL, got {:?}",
                    r.endpoint
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ServiceConfig::from_toml("").unwrap();
        assert_eq!(c, ServiceConfig::default());
        assert_eq!(c.ttl(), Duration::from_secs(3600));
    }

    #[test]
    fn full_file() {
        let c = ServiceConfig::from_toml(
            r#"
            ttl_minutes = 5
            snapshot_dir = "/tmp/snaps"
            workers = 2
            [generator]
            candidates = 8
            [remote]
            endpoint = "http://127.0.0.1:7700"
            "#,
        )
        .unwrap();
        assert_eq!(c.ttl_minutes, 5);
        assert_eq!(c.generator.candidates, 8);
        assert_eq!(c.generator.grid_per_quarter, 4);
        assert_eq!(c.remote.unwrap().timeout_ms, 10_000);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(ServiceConfig::from_toml("ttl = 5").is_err());
        assert!(ServiceConfig::from_toml("workers = 0").is_err());
        assert!(ServiceConfig::from_toml("ttl_minutes = \"x\"").is_err());
        assert!(ServiceConfig::from_toml("[remote]\nendpoint = \"ftp://x\"").is_err());
    }
}
