//! Cycle configuration, read from TOML.

use std::path::{Path, PathBuf};

use chaos_core::SimConfig;
use serde::{Deserialize, Serialize};

use crate::gateway::Prices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub backend: BackendKind,
    /// Replay transcript; relative paths resolve against the config file.
    pub transcript: Option<PathBuf>,
    pub api_base: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub model: String,
    /// USD per million input tokens.
    pub price_in: f64,
    /// USD per million output tokens.
    pub price_out: f64,
    pub temperature: f64,
    pub timeout_s: u64,
    pub max_loops: u32,
    pub max_steady_states: usize,
    pub seed: u64,
    /// Overrides any time limit found in the instructions.
    pub max_experiment_s: Option<u32>,
    pub sim: SimConfig,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            backend: BackendKind::Replay,
            transcript: None,
            api_base: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            model: "gpt-4o-2024-08-06".into(),
            price_in: 2.5,
            price_out: 10.0,
            temperature: 0.0,
            timeout_s: 120,
            max_loops: 3,
            max_steady_states: crate::hypothesis::DEFAULT_MAX_STEADY_STATES,
            seed: 0,
            max_experiment_s: None,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl CycleConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a config file and resolves its transcript path.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut config = CycleConfig::parse(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        if let (Some(t), Some(dir)) = (&config.transcript, path.parent()) {
            if t.is_relative() {
                config.transcript = Some(dir.join(t));
            }
        }
        Ok(config)
    }

    pub fn prices(&self) -> Prices {
        Prices {
            price_in: self.price_in,
            price_out: self.price_out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = CycleConfig::parse("").unwrap();
        assert_eq!(c.max_loops, 3);
        assert_eq!(c.max_steady_states, 4);
        let c = CycleConfig::parse("backend = \"http\"\nseed = 9\n[sim]\nrestart_delay_s = 2\n").unwrap();
        assert_eq!(c.backend, BackendKind::Http);
        assert_eq!(c.seed, 9);
        assert_eq!(c.sim.restart_delay_s, 2);
        assert_eq!(c.sim.pod_startup_delay_s, SimConfig::default().pod_startup_delay_s);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(CycleConfig::parse("max_loop = 2").is_err());
    }

    #[test]
    fn transcript_resolves_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "transcript = \"t.jsonl\"").unwrap();
        let c = CycleConfig::load(&path).unwrap();
        assert_eq!(c.transcript.unwrap(), dir.path().join("t.jsonl"));
    }
}
