use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::ApiError;

/// Service configuration, read from a TOML file and then overridden by
/// `VISLINEUP_*` environment variables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    /// `0` picks a free port; the bound address is printed on startup.
    pub port: u16,
    /// Bearer token for admin endpoints; admin endpoints are disabled when empty.
    pub admin_token: String,
    /// Directory holding one sub-directory per lineup bundle, named by id.
    pub bundles_dir: PathBuf,
    /// Directory where study state and logs are kept.
    pub data_dir: PathBuf,
    /// Optional directory served for every path outside `/api`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            admin_token: String::new(),
            bundles_dir: "bundles".into(),
            data_dir: "studies".into(),
            static_dir: None,
        }
    }
}

impl ServerConfig {
    pub fn from_file(path: &Path) -> Result<Self, ApiError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ApiError::config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ApiError::config(format!("{}: {e}", path.display())))
    }

    /// Applies `VISLINEUP_HOST`, `VISLINEUP_PORT`, `VISLINEUP_ADMIN_TOKEN`,
    /// `VISLINEUP_BUNDLES`, `VISLINEUP_DATA` and `VISLINEUP_STATIC`.
    pub fn with_env(mut self) -> Result<Self, ApiError> {
        self.apply(|k| std::env::var(k).ok())?;
        Ok(self)
    }

    fn apply(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ApiError> {
        if let Some(v) = get("VISLINEUP_HOST") {
            self.host = v;
        }
        if let Some(v) = get("VISLINEUP_PORT") {
            self.port = v.parse().map_err(|_| ApiError::config(format!("VISLINEUP_PORT: invalid port {v:?}")))?;
        }
        if let Some(v) = get("VISLINEUP_ADMIN_TOKEN") {
            self.admin_token = v;
        }
        if let Some(v) = get("VISLINEUP_BUNDLES") {
            self.bundles_dir = v.into();
        }
        if let Some(v) = get("VISLINEUP_DATA") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("VISLINEUP_STATIC") {
            self.static_dir = Some(v.into());
        }
        Ok(())
    }

    pub fn addr(&self) -> Result<SocketAddr, ApiError> {
        format!("{}:{}", self.host, self.port)
            .parse()
            .map_err(|_| ApiError::config(format!("invalid listen address {}:{}", self.host, self.port)))
    }
}
