use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Duration;

use super::{ChatProvider, LlmError, LlmResponse, Usage};
use crate::chat::{Message, Prompt, Role};

pub const MOCK_HEADER: &str = "[mock-llm] answer composed from the provided course sources";

/// Deterministic provider for offline use and tests.
///
/// `complete` echoes the question and one digest line per context block, in
/// block order. `condense` appends the most recent prior user question in
/// parentheses.
#[derive(Debug, Default)]
pub struct MockProvider {
    completions: AtomicUsize,
    condensations: AtomicUsize,
    fail: AtomicBool,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes every subsequent call fail as if retries were exhausted.
    pub fn set_failing(&self, fail: bool) {
        self.fail.store(fail, Ordering::SeqCst);
    }

    pub fn completion_calls(&self) -> usize {
        self.completions.load(Ordering::SeqCst)
    }

    pub fn condense_calls(&self) -> usize {
        self.condensations.load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> usize {
        self.completion_calls() + self.condense_calls()
    }

    fn check_failure(&self) -> Result<(), LlmError> {
        if self.fail.load(Ordering::SeqCst) {
            Err(LlmError::Exhausted {
                attempts: 1,
                last_error: "mock provider set to fail".into(),
            })
        } else {
            Ok(())
        }
    }

    pub fn render(prompt: &Prompt) -> String {
        let mut out = String::from(MOCK_HEADER);
        out.push_str("\nQuestion: ");
        out.push_str(&prompt.question);
        for (i, block) in prompt.context_blocks.iter().enumerate() {
            out.push_str(&format!("\nContext {}: {}", i + 1, block.digest()));
        }
        out
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, prompt: &Prompt) -> Result<LlmResponse, LlmError> {
        self.completions.fetch_add(1, Ordering::SeqCst);
        self.check_failure()?;
        Ok(LlmResponse {
            text: Self::render(prompt),
            latency: Duration::ZERO,
            usage: Usage::default(),
        })
    }

    fn condense(&self, history: &[Message], question: &str) -> Result<String, LlmError> {
        self.condensations.fetch_add(1, Ordering::SeqCst);
        self.check_failure()?;
        let previous = history.iter().rev().find(|m| m.role == Role::User);
        Ok(match previous {
            Some(m) => format!("{question} ({})", m.text),
            None => question.to_string(),
        })
    }
}
