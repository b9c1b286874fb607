use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::ChunkId;
use crate::store::CourseId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn generate() -> Self {
        SessionId(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn new(id: impl Into<String>) -> Self {
        SessionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// A source document and the cited pages in retrieval-rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRef {
    pub source_title: String,
    #[serde(rename = "pages")]
    pub page_numbers: Vec<u32>,
}

/// Renders as `COSC 404 - Transactions p. 4 p. 56`.
impl fmt::Display for CitationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_title)?;
        for p in &self.page_numbers {
            write!(f, " p. {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    #[serde(default)]
    pub citations: Vec<CitationRef>,
    #[serde(default)]
    pub retrieved_chunk_ids: Vec<ChunkId>,
    pub timestamp: DateTime<Utc>,
}

impl Message {
    pub fn user(text: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            text: text.into(),
            citations: Vec::new(),
            retrieved_chunk_ids: Vec::new(),
            timestamp: Utc::now(),
        }
    }

    pub fn assistant(
        text: impl Into<String>,
        citations: Vec<CitationRef>,
        retrieved_chunk_ids: Vec<ChunkId>,
    ) -> Self {
        Message {
            role: Role::Assistant,
            text: text.into(),
            citations,
            retrieved_chunk_ids,
            timestamp: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub session_id: SessionId,
    pub course_id: CourseId,
    pub messages: Vec<Message>,
    pub created_at: DateTime<Utc>,
}

impl ChatSession {
    pub fn new(course_id: CourseId) -> Self {
        ChatSession {
            session_id: SessionId::generate(),
            course_id,
            messages: Vec::new(),
            created_at: Utc::now(),
        }
    }

    /// Last `window` messages, oldest first.
    pub fn history_window(&self, window: usize) -> &[Message] {
        let start = self.messages.len().saturating_sub(window);
        &self.messages[start..]
    }

    /// Messages alternate user/assistant starting with user.
    pub fn is_well_formed(&self) -> bool {
        self.messages.iter().enumerate().all(|(i, m)| {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            m.role == expected
        })
    }
}
