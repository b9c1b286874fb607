//! Instructor source acquisition, page parsing, chunking and keyword capture.
//!
//! The pipeline is `acquire -> parse -> chunk -> extract_keywords`. Each stage
//! is a pure function of its inputs except `acquire`, which touches the
//! filesystem or network.

mod acquire;
mod chunk;
mod keywords;
mod parse;

pub use acquire::{acquire, acquire_file, acquire_upload, acquire_url, AcquireOptions, SourceKind};
pub use chunk::chunk;
pub use keywords::{extract_keywords, CorpusStats, DEFAULT_KEYWORDS_PER_CHUNK};
pub use parse::{parse, MAX_PAGE_BYTES};

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Default cap on a single acquired source.
pub const MAX_SOURCE_BYTES: u64 = 32 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fetch of {url} failed with HTTP status {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("fetch of {url} failed: {message}")]
    Fetch { url: String, message: String },
    #[error("only http(s) URLs are supported, got {0}")]
    UnsupportedScheme(String),
    #[error("unsupported media kind for {location}: {detail}")]
    UnsupportedMedia { location: String, detail: String },
    #[error("{location} is {size} bytes, over the {limit} byte limit")]
    TooLarge {
        location: String,
        size: u64,
        limit: u64,
    },
    #[error("malformed page record on line {line}: {message}")]
    MalformedPageRecord { line: usize, message: String },
    #[error("document body is not decodable as UTF-8 text")]
    Undecodable,
    #[error("page {page} is {size} bytes, over the {limit} byte parser limit")]
    PageTooLarge {
        page: u32,
        size: usize,
        limit: usize,
    },
    #[error("invalid chunk policy: {0}")]
    InvalidPolicy(String),
}

/// Opaque document id, unique within a course.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(String);

impl DocId {
    pub fn new(id: impl Into<String>) -> Self {
        DocId(id.into())
    }

    /// Content-derived id: identical title, kind and bytes give the same id.
    pub fn from_content(title: &str, media_kind: MediaKind, body: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(title.as_bytes());
        hasher.update([0]);
        hasher.update(media_kind.as_str().as_bytes());
        hasher.update([0]);
        hasher.update(body);
        DocId(hex::encode(&hasher.finalize()[..8]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Deterministic chunk id rendered as `<doc_id>:<page>:<ordinal>`.
///
/// Ordering is the lexicographic order of the rendered string, which is the
/// tie-break order used by retrieval.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(String);

impl ChunkId {
    pub fn new(doc_id: &DocId, page_number: u32, ordinal: u32) -> Self {
        ChunkId(format!("{}:{}:{}", doc_id.as_str(), page_number, ordinal))
    }

    /// Wraps an already rendered id without validation.
    pub fn from_raw(raw: impl Into<String>) -> Self {
        ChunkId(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The document prefix of this id.
    pub fn doc_id(&self) -> DocId {
        let mut parts = self.0.rsplitn(3, ':');
        let _ordinal = parts.next();
        let _page = parts.next();
        DocId(parts.next().unwrap_or(&self.0).to_string())
    }

    pub fn belongs_to(&self, doc_id: &DocId) -> bool {
        self.doc_id() == *doc_id
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "location", rename_all = "snake_case")]
pub enum Origin {
    File(String),
    Url(String),
    /// An HTTP upload, by its client-supplied file name.
    Upload(String),
}

impl Origin {
    pub fn location(&self) -> &str {
        match self {
            Origin::File(s) | Origin::Url(s) | Origin::Upload(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    PlainText,
    Markdown,
    Html,
    PreExtractedPages,
}

impl MediaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::PlainText => "plain_text",
            MediaKind::Markdown => "markdown",
            MediaKind::Html => "html",
            MediaKind::PreExtractedPages => "pre_extracted_pages",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: DocId,
    pub title: String,
    pub origin: Origin,
    pub media_kind: MediaKind,
    pub body: Vec<u8>,
    pub fetched_at: DateTime<Utc>,
}

impl RawDocument {
    /// Builds a document from in-memory bytes, e.g. an HTTP upload.
    pub fn from_bytes(
        title: impl Into<String>,
        origin: Origin,
        media_kind: MediaKind,
        body: Vec<u8>,
    ) -> Self {
        let title = title.into();
        RawDocument {
            doc_id: DocId::from_content(&title, media_kind, &body),
            title,
            origin,
            media_kind,
            body,
            fetched_at: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub number: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDocument {
    pub doc_id: DocId,
    pub title: String,
    pub pages: Vec<Page>,
}

/// One indexed unit of course material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: ChunkId,
    pub doc_id: DocId,
    pub page_number: u32,
    pub ordinal: u32,
    pub text: String,
    pub token_count: usize,
    /// Ranked best-first; treated as a set for matching.
    pub keywords: Vec<String>,
    pub source_title: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPolicy {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
    pub respect_page_boundaries: bool,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        ChunkPolicy {
            max_tokens: 400,
            overlap_tokens: 50,
            respect_page_boundaries: true,
        }
    }
}

impl ChunkPolicy {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.max_tokens == 0 {
            return Err(IngestError::InvalidPolicy("max_tokens must be positive".into()));
        }
        if self.overlap_tokens >= self.max_tokens {
            return Err(IngestError::InvalidPolicy(format!(
                "overlap_tokens ({}) must be below max_tokens ({})",
                self.overlap_tokens, self.max_tokens
            )));
        }
        Ok(())
    }
}
