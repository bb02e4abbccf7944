//! Backend selection shared by every subcommand and the service.

use std::path::Path;
use std::sync::Arc;

use clap::Args;
use provox_core::planner::remote::{http_transport, ChatNamer};
use provox_core::planner::{Backend, BackendConfig, BackendKind, PlannerError};
use provox_core::synthesis::{MockNamer, NameDocProvider};
use serde::Deserialize;

/// Planner backend flags. Unset flags fall back to the config file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// Planner backend: mock or remote.
    #[arg(long, value_name = "KIND")]
    pub backend: Option<BackendKind>,
    /// Chat-completions endpoint URL for the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the remote backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, value_name = "VAR")]
    pub api_key_env: Option<String>,
    /// Re-prompts allowed after an invalid plan.
    #[arg(long)]
    pub max_retries: Option<u32>,
}

/// Optional TOML configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub backend: BackendConfig,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

impl BackendArgs {
    pub fn resolve(&self, base: &BackendConfig) -> BackendConfig {
        let mut cfg = base.clone();
        if let Some(kind) = self.backend {
            cfg.kind = kind;
        }
        if let Some(e) = &self.endpoint {
            cfg.endpoint = Some(e.clone());
        }
        if let Some(m) = &self.model {
            cfg.model = Some(m.clone());
        }
        if let Some(v) = &self.api_key_env {
            cfg.api_key_env = v.clone();
        }
        if let Some(r) = self.max_retries {
            cfg.max_retries = r;
        }
        cfg
    }
}

/// A planner and the namer used when synthesizing functions.
pub type Backends = (Arc<dyn Backend>, Arc<dyn NameDocProvider>);

/// Planner and namer for `cfg`. The remote kind uses the chat endpoint for both.
pub fn build(cfg: &BackendConfig) -> Result<Backends, PlannerError> {
    let planner = cfg.build()?;
    let namer: Arc<dyn NameDocProvider> = match cfg.kind {
        BackendKind::Mock => Arc::new(MockNamer),
        BackendKind::Remote => Arc::new(ChatNamer::new(http_transport(cfg)?, cfg)),
    };
    Ok((planner, namer))
}
