//! Language-model providers behind one trait.
//!
//! [`MockProvider`] is deterministic and offline; [`RemoteChatProvider`] speaks
//! the common chat-completion JSON dialect.

mod mock;
mod remote;

pub use mock::{MockProvider, MOCK_HEADER};
pub use remote::{RemoteChatProvider, MAX_IN_FLIGHT};

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chat::{Message, Prompt};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("provider rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("provider unavailable after {attempts} attempts: {last_error}")]
    Exhausted { attempts: u32, last_error: String },
    #[error("provider rejected the request (HTTP {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    RemoteChatApi,
}

/// Provider settings. Holds the *name* of the credential variable, never the
/// secret itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub credential_env: Option<String>,
    pub model: String,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
    pub max_retries: u32,
    pub temperature: f64,
    #[serde(with = "duration_ms")]
    pub backoff_base: Duration,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: None,
            credential_env: None,
            model: "gpt-3.5-turbo".to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            temperature: 0.0,
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl ProviderConfig {
    pub fn mock() -> Self {
        ProviderConfig::default()
    }

    pub fn remote(endpoint: impl Into<String>, credential_env: Option<String>) -> Self {
        ProviderConfig {
            kind: ProviderKind::RemoteChatApi,
            endpoint: Some(endpoint.into()),
            credential_env,
            ..ProviderConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout.is_zero() {
            return Err(LlmError::InvalidConfig("timeout must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.kind == ProviderKind::RemoteChatApi
            && self.endpoint.as_deref().map_or(true, str::is_empty)
        {
            return Err(LlmError::InvalidConfig("remote provider needs an endpoint".into()));
        }
        Ok(())
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub text: String,
    pub latency: Duration,
    pub usage: Usage,
}

pub trait ChatProvider: Send + Sync {
    /// Answers a fully assembled prompt.
    fn complete(&self, prompt: &Prompt) -> Result<LlmResponse, LlmError>;

    /// Rewrites a follow-up question so it stands alone given `history`.
    fn condense(&self, history: &[Message], question: &str) -> Result<String, LlmError>;
}

pub fn build_provider(config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, LlmError> {
    config.validate()?;
    Ok(match config.kind {
        ProviderKind::Mock => Arc::new(MockProvider::new()),
        ProviderKind::RemoteChatApi => Arc::new(RemoteChatProvider::new(config.clone())?),
    })
}
