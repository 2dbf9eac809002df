//! Run configuration: a sectioned TOML file mirroring every config type,
//! resolved with CLI-flag > config-file > built-in-default precedence, and
//! the manifest every command snapshots before doing work.

use crate::data::{AugmentSpec, InputSpec, SplitMode};
use crate::eval::MatchCriteria;
use crate::grasp::{DecodeConfig, GaussianEncoderConfig};
use crate::net::NetworkConfig;
use crate::train::{LossConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Fully resolved settings for one run; every section has defaults, a
/// config file overrides them wholesale per field, CLI flags override
/// individual values on top.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ResolvedConfig {
    pub input: InputSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub encoder: GaussianEncoderConfig,
    pub decode: DecodeConfig,
    pub eval: MatchCriteria,
    pub augment: AugmentSpec,
    pub split_mode: SplitMode,
    pub test_fraction: f64,
}

impl ResolvedConfig {
    pub fn load_defaults() -> Self {
        Self {
            test_fraction: 0.1,
            ..Self::default()
        }
    }

    /// Reads a TOML config file over the built-in defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ResolvedConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        if cfg.test_fraction == 0.0 {
            cfg.test_fraction = 0.1;
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::from_file(p),
            None => Ok(Self::load_defaults()),
        }
    }
}

/// Snapshot written to the output directory before a command does any
/// work, so reruns are reproducible from the manifest alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub timestamp: String,
    pub output_dir: PathBuf,
    pub resolved: ResolvedConfig,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, output_dir: &Path, resolved: ResolvedConfig) -> Self {
        Self {
            command: command.to_string(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
            output_dir: output_dir.to_path_buf(),
            resolved,
        }
    }

    /// Writes `manifest.toml` into the output directory, creating it.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, ConfigError> {
        std::fs::create_dir_all(out_dir).map_err(|source| ConfigError::Io {
            path: out_dir.to_path_buf(),
            source,
        })?;
        let path = out_dir.join("manifest.toml");
        let text = toml::to_string_pretty(self).map_err(|e| ConfigError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        std::fs::write(&path, text).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ResolvedConfig::load_defaults();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: ResolvedConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.input.size, cfg.input.size);
        assert_eq!(back.network.bottleneck_width, cfg.network.bottleneck_width);
        assert_eq!(back.test_fraction, cfg.test_fraction);
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "[train]\nepochs = 7\nlearning_rate = 0.01\nbatch_size = 8\nseed = 0\n",
        )
        .unwrap();
        let cfg = ResolvedConfig::from_file(&path).unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.learning_rate, 0.01);
        // untouched sections keep defaults
        assert_eq!(cfg.input.size, 300);
        assert_eq!(cfg.network.bottleneck_width, 256);
    }

    #[test]
    fn manifest_written_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let manifest = RunManifest::new("train", 3, &out, ResolvedConfig::load_defaults());
        let path = manifest.write(&out).unwrap();
        assert!(path.exists());
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("command = \"train\""));
    }
}
