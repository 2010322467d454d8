//! JSON configuration for the CLI. One file describes the deployment:
//! pricing, the upstream server's energy profile, optional workload and
//! proxy settings. Unknown keys are rejected everywhere so typos fail
//! loudly instead of silently using a default.

use std::path::Path;

use greenproxy_core::cache::{HashKind, NodeConfig, DEFAULT_VIRTUAL_POINTS};
use greenproxy_core::carbon::{EnergyIntensity, ServerProfile};
use greenproxy_core::cost::CostParams;
use greenproxy_core::workload::WorkloadSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSettings {
    pub nodes: Vec<NodeConfig>,
    #[serde(default = "default_virtual_points")]
    pub virtual_points: u32,
    #[serde(default)]
    pub hash: HashKind,
}

fn default_virtual_points() -> u32 {
    DEFAULT_VIRTUAL_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyConfig {
    #[serde(default = "default_listen")]
    pub listen_addr: String,
    pub upstream_addr: String,
    pub cache: CacheSettings,
}

fn default_listen() -> String {
    "127.0.0.1:1143".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub cost: CostParams,
    pub profile: ServerProfile,
    #[serde(default)]
    pub intensity: EnergyIntensity,
    #[serde(default)]
    pub workload: WorkloadSpec,
    /// Transit energy is someone else's meter unless a deployment opts in.
    #[serde(default = "default_true")]
    pub ignore_link_energy: bool,
    #[serde(default)]
    pub proxy: Option<ProxyConfig>,
}

fn default_true() -> bool {
    true
}

impl AppConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: AppConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.cost.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.profile.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.workload.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(proxy) = &self.proxy {
            if proxy.cache.nodes.is_empty() {
                return Err(ConfigError::Invalid("proxy.cache.nodes must not be empty".into()));
            }
            if proxy.cache.virtual_points == 0 {
                return Err(ConfigError::Invalid(
                    "proxy.cache.virtual_points must be at least 1".into(),
                ));
            }
            for node in &proxy.cache.nodes {
                if node.capacity_bytes == 0 {
                    return Err(ConfigError::Invalid(format!(
                        "cache node `{}` has zero capacity",
                        node.node_id
                    )));
                }
            }
        }
        Ok(())
    }
}
