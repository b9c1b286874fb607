use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::session::{Message, Role};
use crate::ingest::ChunkId;
use crate::text::word_count;

/// Bumped whenever the preamble or block layout changes.
pub const PROMPT_TEMPLATE_VERSION: &str = "chated-prompt/1";

pub const DEFAULT_TOKEN_BUDGET: usize = 3000;

pub const SYSTEM_PREAMBLE: &str = "You are a teaching assistant for this course. \
Answer the student's question using only the course sources provided below. \
Answer directly and concisely, without unrelated detail. \
If the sources do not contain the answer, say plainly that you could not find it in the course materials instead of guessing. \
Use the earlier conversation to resolve what the question refers to.";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("the question alone needs {needed} tokens, over the {budget} token budget")]
    QuestionTooLong { needed: usize, budget: usize },
    #[error("no retrieved context was supplied")]
    NoContext,
    #[error("no context block fits in the {budget} token budget")]
    NoContextFits { budget: usize },
}

/// A retrieved chunk as it is shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub chunk_id: ChunkId,
    pub source_title: String,
    pub page_number: u32,
    pub text: String,
    pub score: f64,
}

impl ContextBlock {
    pub fn label(&self) -> String {
        format!("[Source: {} p. {}]", self.source_title, self.page_number)
    }

    pub fn token_count(&self) -> usize {
        word_count(&self.label()) + word_count(&self.text)
    }

    /// First 8 hex characters of the SHA-256 of the block text.
    pub fn digest(&self) -> String {
        text_digest(&self.text)
    }
}

pub fn text_digest(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..4])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_preamble: String,
    pub history_window: Vec<HistoryTurn>,
    pub context_blocks: Vec<ContextBlock>,
    pub question: String,
    pub token_budget: usize,
}

impl Prompt {
    /// Whitespace tokens across every part of the prompt.
    pub fn token_count(&self) -> usize {
        word_count(&self.system_preamble)
            + self
                .history_window
                .iter()
                .map(|h| word_count(&h.text))
                .sum::<usize>()
            + self
                .context_blocks
                .iter()
                .map(ContextBlock::token_count)
                .sum::<usize>()
            + word_count(&self.question)
    }

    /// The single user turn carrying context and question.
    pub fn user_content(&self) -> String {
        let mut out = String::from("Course sources:\n\n");
        for block in &self.context_blocks {
            out.push_str(&block.label());
            out.push('\n');
            out.push_str(&block.text);
            out.push_str("\n\n");
        }
        out.push_str("Question: ");
        out.push_str(&self.question);
        out
    }
}

/// Fails if the preamble and question alone exceed `budget`; otherwise
/// returns their token count.
pub fn check_question(question: &str, budget: usize) -> Result<usize, PromptError> {
    let fixed = word_count(SYSTEM_PREAMBLE) + word_count(question);
    if fixed > budget {
        return Err(PromptError::QuestionTooLong {
            needed: fixed,
            budget,
        });
    }
    Ok(fixed)
}

/// Assembles a prompt within `budget` whitespace tokens.
///
/// `history` is the already windowed history, oldest first. Blocks are
/// ordered by descending score. When over budget the oldest history message
/// goes first, then the lowest-ranked block; the question is never dropped.
pub fn build_prompt(
    history: &[Message],
    mut retrieved: Vec<ContextBlock>,
    question: &str,
    budget: usize,
) -> Result<Prompt, PromptError> {
    if retrieved.is_empty() {
        return Err(PromptError::NoContext);
    }
    let fixed = check_question(question, budget)?;
    retrieved.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut history: Vec<HistoryTurn> = history
        .iter()
        .map(|m| HistoryTurn {
            role: m.role,
            text: m.text.clone(),
        })
        .collect();
    let mut history_tokens: usize = history.iter().map(|h| word_count(&h.text)).sum();
    let mut block_tokens: usize = retrieved.iter().map(ContextBlock::token_count).sum();

    let mut dropped_history = 0;
    while fixed + history_tokens + block_tokens > budget && dropped_history < history.len() {
        history_tokens -= word_count(&history[dropped_history].text);
        dropped_history += 1;
    }
    history.drain(..dropped_history);

    while fixed + history_tokens + block_tokens > budget && !retrieved.is_empty() {
        let last = retrieved.pop().expect("non-empty");
        block_tokens -= last.token_count();
    }
    if retrieved.is_empty() {
        return Err(PromptError::NoContextFits { budget });
    }

    Ok(Prompt {
        system_preamble: SYSTEM_PREAMBLE.to_string(),
        history_window: history,
        context_blocks: retrieved,
        question: question.to_string(),
        token_budget: budget,
    })
}
