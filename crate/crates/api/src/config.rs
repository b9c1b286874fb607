use std::fmt;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use chated_core::embed::DEFAULT_DIMS;
use chated_core::llm::ProviderConfig;

pub const DEFAULT_PORT: u16 = 8095;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{var} must be set when {because}")]
    Missing { var: &'static str, because: String },
    #[error("{var}={value} is not valid: {detail}")]
    Invalid {
        var: &'static str,
        value: String,
        detail: String,
    },
}

/// Remote embedding service settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedSettings {
    pub endpoint: String,
    pub credential_env: Option<String>,
    pub dims: usize,
}

#[derive(Clone, PartialEq)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    /// Bearer token for instructor routes; `None` disables them.
    pub instructor_token: Option<String>,
    pub provider: ProviderConfig,
    pub embed: Option<EmbedSettings>,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
}

impl fmt::Debug for ServerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServerConfig")
            .field("data_dir", &self.data_dir)
            .field("bind", &self.bind)
            .field(
                "instructor_token",
                &self.instructor_token.as_ref().map(|_| "<redacted>"),
            )
            .field("provider", &self.provider)
            .field("embed", &self.embed)
            .field("cors_origin", &self.cors_origin)
            .finish()
    }
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            data_dir: PathBuf::from("./chated-data"),
            bind: SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), DEFAULT_PORT),
            instructor_token: None,
            provider: ProviderConfig::mock(),
            embed: None,
            cors_origin: None,
        }
    }
}

impl ServerConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads `CHATED_*` variables through `get`; empty values count as unset.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        let mut cfg = ServerConfig::default();
        if let Some(dir) = get("CHATED_DATA_DIR") {
            cfg.data_dir = PathBuf::from(dir);
        }
        let host: IpAddr = match get("CHATED_BIND") {
            Some(v) => v.parse().map_err(|e: std::net::AddrParseError| ConfigError::Invalid {
                var: "CHATED_BIND",
                value: v.clone(),
                detail: e.to_string(),
            })?,
            None => cfg.bind.ip(),
        };
        let port = match get("CHATED_PORT") {
            Some(v) => v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Invalid {
                var: "CHATED_PORT",
                value: v.clone(),
                detail: e.to_string(),
            })?,
            None => DEFAULT_PORT,
        };
        cfg.bind = SocketAddr::new(host, port);
        cfg.instructor_token = get("CHATED_INSTRUCTOR_TOKEN");
        cfg.cors_origin = get("CHATED_CORS_ORIGIN");

        let key_env = get("CHATED_PROVIDER_KEY_ENV");
        cfg.provider = match get("CHATED_PROVIDER").as_deref().unwrap_or("mock") {
            "mock" => ProviderConfig::mock(),
            "remote" => {
                let endpoint = get("CHATED_PROVIDER_ENDPOINT").ok_or(ConfigError::Missing {
                    var: "CHATED_PROVIDER_ENDPOINT",
                    because: "CHATED_PROVIDER=remote".into(),
                })?;
                let mut p = ProviderConfig::remote(endpoint, key_env.clone());
                if let Some(model) = get("CHATED_PROVIDER_MODEL") {
                    p.model = model;
                }
                p
            }
            other => {
                return Err(ConfigError::Invalid {
                    var: "CHATED_PROVIDER",
                    value: other.to_string(),
                    detail: "expected mock or remote".into(),
                })
            }
        };

        if let Some(endpoint) = get("CHATED_EMBED_ENDPOINT") {
            let dims = match get("CHATED_EMBED_DIMS") {
                Some(v) => v
                    .parse::<usize>()
                    .ok()
                    .filter(|d| *d > 0)
                    .ok_or_else(|| ConfigError::Invalid {
                        var: "CHATED_EMBED_DIMS",
                        value: v.clone(),
                        detail: "expected a positive integer".into(),
                    })?,
                None => DEFAULT_DIMS,
            };
            cfg.embed = Some(EmbedSettings {
                endpoint,
                credential_env: get("CHATED_EMBED_KEY_ENV").or(key_env),
                dims,
            });
        }
        Ok(cfg)
    }
}
