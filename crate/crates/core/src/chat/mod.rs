//! Chat turns: condensation, retrieval, prompting and citations.

mod citation;
mod condense;
mod prompt;
mod session;

pub use citation::{citations_for_blocks, format_citations, render_sources};
pub use condense::{condense_query, is_anaphoric};
pub use prompt::{
    build_prompt, check_question, text_digest, ContextBlock, HistoryTurn, Prompt, PromptError,
    DEFAULT_TOKEN_BUDGET, PROMPT_TEMPLATE_VERSION, SYSTEM_PREAMBLE,
};
pub use session::{ChatSession, CitationRef, Message, Role, SessionId};

use std::sync::Arc;

use tracing::info;

use crate::llm::{ChatProvider, LlmError};
use crate::store::{CourseId, RetrievedChunk, Store, StoreError};

/// Reply used when nothing in the course clears the relevance threshold.
pub const LIMITATION_NOTICE: &str = "I could not find this in the course materials. \
Try rephrasing the question with terms used in the course, or ask your instructor.";

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error("question must not be empty")]
    EmptyQuestion,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("language model provider failed: {0}")]
    Provider(#[from] LlmError),
}

/// Everything a turn produced, for callers that audit the pipeline.
#[derive(Debug, Clone)]
pub struct TurnRecord {
    pub message: Message,
    pub standalone_query: String,
    /// Retrieval results after the threshold filter, best first.
    pub retrieved: Vec<RetrievedChunk>,
    /// `None` when the limitation notice was returned.
    pub prompt: Option<Prompt>,
}

impl TurnRecord {
    pub fn is_limitation(&self) -> bool {
        self.prompt.is_none()
    }
}

pub struct ChatEngine {
    store: Arc<Store>,
    provider: Arc<dyn ChatProvider>,
}

impl ChatEngine {
    pub fn new(store: Arc<Store>, provider: Arc<dyn ChatProvider>) -> Self {
        ChatEngine { store, provider }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn start_session(&self, course_id: &CourseId) -> Result<SessionId, ChatError> {
        Ok(self.store.create_session(course_id)?)
    }

    pub fn answer(&self, session_id: &SessionId, question: &str) -> Result<Message, ChatError> {
        self.answer_turn(session_id, question).map(|t| t.message)
    }

    /// Runs one turn. The session is only modified if the whole turn succeeds.
    pub fn answer_turn(&self, session_id: &SessionId, question: &str) -> Result<TurnRecord, ChatError> {
        let question = question.trim();
        if question.is_empty() {
            return Err(ChatError::EmptyQuestion);
        }
        let turn_lock = self.store.turn_lock(session_id)?;
        let _turn = turn_lock.lock().unwrap_or_else(|e| e.into_inner());

        let session = self.store.session(session_id)?;
        let config = self.store.config(&session.course_id)?;
        check_question(question, config.token_budget)?;
        let history = session.history_window(config.history_window);

        let standalone = condense_query(history, question, self.provider.as_ref());
        let embedder = self.store.embedder().clone();
        let retrieved: Vec<RetrievedChunk> = self
            .store
            .with_course(&session.course_id, |kb| kb.retrieve(&standalone, embedder.as_ref()))??
            .into_iter()
            .filter(|r| r.result.score >= config.score_threshold)
            .collect();

        if retrieved.is_empty() {
            info!(session = %session_id, "no chunk cleared the threshold");
            let message = Message::assistant(LIMITATION_NOTICE, Vec::new(), Vec::new());
            self.store
                .commit_turn(session_id, Message::user(question), message.clone())?;
            return Ok(TurnRecord {
                message,
                standalone_query: standalone,
                retrieved,
                prompt: None,
            });
        }

        let blocks = retrieved
            .iter()
            .map(|r| ContextBlock {
                chunk_id: r.chunk.chunk_id.clone(),
                source_title: r.chunk.source_title.clone(),
                page_number: r.chunk.page_number,
                text: r.chunk.text.clone(),
                score: r.result.score,
            })
            .collect();
        let prompt = build_prompt(history, blocks, &standalone, config.token_budget)?;
        let response = self.provider.complete(&prompt)?;

        let citations = citations_for_blocks(&prompt.context_blocks);
        let ids = prompt.context_blocks.iter().map(|b| b.chunk_id.clone()).collect();
        let message = Message::assistant(response.text, citations, ids);
        self.store
            .commit_turn(session_id, Message::user(question), message.clone())?;
        Ok(TurnRecord {
            message,
            standalone_query: standalone,
            retrieved,
            prompt: Some(prompt),
        })
    }
}
