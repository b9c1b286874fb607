//! Text embedding: a built-in feature-hashing embedder and an HTTP client for
//! remote embedding services.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::retry::Backoff;
use crate::text::terms;

pub const DEFAULT_DIMS: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding service failed (status {status:?}, retry after {retry_after:?}): {message}")]
    Remote {
        status: Option<u16>,
        retry_after: Option<Duration>,
        attempts: u32,
        message: String,
    },
    #[error("embedding service returned {got} vectors for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("expected {expected}-dimensional vectors, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
}

/// Either a unit vector or the all-zero sentinel for contentless text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn zeros(dims: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dims],
        }
    }

    /// L2-normalizes `values`; an all-zero input stays zero.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm == 0.0 {
            values.iter().map(|_| 0.0).collect()
        } else {
            values.iter().map(|v| (v / norm) as f32).collect()
        };
        EmbeddingVector { values }
    }

    /// Wraps stored values verbatim (used when loading persisted vectors).
    pub fn from_stored(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let na = self.norm();
        let nb = other.norm();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub trait Embedder: Send + Sync {
    fn dims(&self) -> usize;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.pop().unwrap_or_else(|| EmbeddingVector::zeros(self.dims())))
    }
}

/// Deterministic bag-of-words feature hashing.
///
/// Each content term adds its count to bucket `h1(t) mod d` with a sign taken
/// from `h2(t)`; the result is L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dims: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dims: DEFAULT_DIMS }
    }
}

impl HashingEmbedder {
    pub fn new(dims: usize) -> Self {
        assert!(dims > 0, "embedding dimensionality must be positive");
        HashingEmbedder { dims }
    }

    fn bucket_and_sign(&self, term: &str) -> (usize, f64) {
        let h1 = Sha256::new()
            .chain_update(b"bucket\0")
            .chain_update(term.as_bytes())
            .finalize();
        let h2 = Sha256::new()
            .chain_update(b"sign\0")
            .chain_update(term.as_bytes())
            .finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&h1[..8]);
        let bucket = (u64::from_le_bytes(word) % self.dims as u64) as usize;
        let sign = if h2[0] & 1 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut acc = vec![0.0f64; self.dims];
        for term in terms(text) {
            let (bucket, sign) = self.bucket_and_sign(&term);
            acc[bucket] += sign;
        }
        EmbeddingVector::normalized(acc)
    }
}

impl Embedder for HashingEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token, if any.
    pub credential_env: Option<String>,
    pub dims: usize,
    pub timeout: Duration,
    pub backoff: Backoff,
}

impl RemoteEmbedderConfig {
    pub fn new(endpoint: impl Into<String>, dims: usize) -> Self {
        RemoteEmbedderConfig {
            endpoint: endpoint.into(),
            credential_env: None,
            dims,
            timeout: Duration::from_secs(60),
            backoff: Backoff::default(),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for `POST {"input": [texts]} -> {"vectors": [[floats]]}` services.
///
/// Returned vectors are re-normalized; texts without content terms are never
/// sent and map to the zero vector.
pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("config", &self.config)
            .finish()
    }
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        RemoteEmbedder { config, agent }
    }

    fn call(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let token = match &self.config.credential_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| EmbedError::MissingCredential(var.clone()))?,
            ),
            None => None,
        };
        let body = EmbedRequest {
            input: texts.to_vec(),
        };
        let mut attempt = 0;
        loop {
            let mut req = self.agent.post(&self.config.endpoint);
            if let Some(t) = &token {
                req = req.set("Authorization", &format!("Bearer {t}"));
            }
            let (status, retry_after, message) = match req.send_json(&body) {
                Ok(resp) => {
                    return resp
                        .into_json::<EmbedResponse>()
                        .map(|r| r.vectors)
                        .map_err(|e| EmbedError::Remote {
                            status: None,
                            retry_after: None,
                            attempts: attempt + 1,
                            message: format!("malformed response: {e}"),
                        })
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let retry_after = resp
                        .header("retry-after")
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(Duration::from_secs);
                    (Some(code), retry_after, format!("HTTP {code}"))
                }
                Err(e) => (None, None, e.to_string()),
            };
            let retryable = match status {
                None => true,
                Some(code) => code == 429 || code >= 500,
            };
            if !retryable || attempt >= self.config.backoff.max_retries {
                return Err(EmbedError::Remote {
                    status,
                    retry_after,
                    attempts: attempt + 1,
                    message,
                });
            }
            std::thread::sleep(retry_after.unwrap_or_else(|| self.config.backoff.delay(attempt)));
            attempt += 1;
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn dims(&self) -> usize {
        self.config.dims
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let wanted: Vec<usize> = (0..texts.len())
            .filter(|&i| !terms(texts[i]).is_empty())
            .collect();
        let mut out = vec![EmbeddingVector::zeros(self.config.dims); texts.len()];
        if wanted.is_empty() {
            return Ok(out);
        }
        let batch: Vec<&str> = wanted.iter().map(|&i| texts[i]).collect();
        let vectors = self.call(&batch)?;
        if vectors.len() != batch.len() {
            return Err(EmbedError::CountMismatch {
                expected: batch.len(),
                got: vectors.len(),
            });
        }
        for (slot, v) in wanted.into_iter().zip(vectors) {
            if v.len() != self.config.dims {
                return Err(EmbedError::Dimension {
                    expected: self.config.dims,
                    got: v.len(),
                });
            }
            out[slot] = EmbeddingVector::normalized(v);
        }
        Ok(out)
    }
}
