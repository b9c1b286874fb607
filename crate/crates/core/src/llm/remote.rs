use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{ChatProvider, LlmError, LlmResponse, ProviderConfig, Usage};
use crate::chat::{Message, Prompt};
use crate::retry::Backoff;

/// Process-wide cap on concurrent remote completions.
pub const MAX_IN_FLIGHT: usize = 4;

struct Slots {
    used: Mutex<usize>,
    freed: Condvar,
}

static SLOTS: Slots = Slots {
    used: Mutex::new(0),
    freed: Condvar::new(),
};

struct SlotGuard;

impl SlotGuard {
    fn acquire() -> SlotGuard {
        let mut used = SLOTS.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= MAX_IN_FLIGHT {
            used = SLOTS.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        SlotGuard
    }
}

impl Drop for SlotGuard {
    fn drop(&mut self) {
        let mut used = SLOTS.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        SLOTS.freed.notify_one();
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub(crate) struct WireMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage>,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

const CONDENSE_INSTRUCTION: &str = "Rewrite the student's final question so that it can be \
understood without the conversation. Resolve words like \"this\" or \"it\" using the \
conversation. Reply with the rewritten question only.";

/// Chat-completion client: `{model, messages, temperature}` in,
/// `{choices: [{message: {content}}]}` out.
pub struct RemoteChatProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteChatProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteChatProvider")
            .field("config", &self.config)
            .finish()
    }
}

pub(crate) fn prompt_messages(prompt: &Prompt) -> Vec<WireMessage> {
    let mut messages = vec![WireMessage {
        role: "system".into(),
        content: prompt.system_preamble.clone(),
    }];
    messages.extend(prompt.history_window.iter().map(|h| WireMessage {
        role: h.role.as_str().into(),
        content: h.text.clone(),
    }));
    messages.push(WireMessage {
        role: "user".into(),
        content: prompt.user_content(),
    });
    messages
}

fn condense_messages(history: &[Message], question: &str) -> Vec<WireMessage> {
    let mut transcript = String::new();
    for m in history {
        transcript.push_str(m.role.as_str());
        transcript.push_str(": ");
        transcript.push_str(&m.text);
        transcript.push('\n');
    }
    vec![
        WireMessage {
            role: "system".into(),
            content: CONDENSE_INSTRUCTION.into(),
        },
        WireMessage {
            role: "user".into(),
            content: format!("Conversation:\n{transcript}\nFinal question: {question}"),
        },
    ]
}

impl RemoteChatProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Ok(RemoteChatProvider { config, agent })
    }

    fn backoff(&self) -> Backoff {
        Backoff {
            base: self.config.backoff_base,
            factor: 2,
            max_retries: self.config.max_retries,
        }
    }

    fn credential(&self) -> Result<Option<String>, LlmError> {
        match &self.config.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| LlmError::MissingCredential(var.clone())),
        }
    }

    fn send(&self, messages: Vec<WireMessage>) -> Result<LlmResponse, LlmError> {
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let token = self.credential()?;
        let request = CompletionRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
        };
        let body = serde_json::to_string(&request)
            .map_err(|e| LlmError::InvalidConfig(e.to_string()))?;
        let backoff = self.backoff();

        let _slot = SlotGuard::acquire();
        let started = Instant::now();
        let mut attempt: u32 = 0;
        loop {
            let mut req = self
                .agent
                .post(endpoint)
                .set("Content-Type", "application/json");
            if let Some(t) = &token {
                req = req.set("Authorization", &format!("Bearer {t}"));
            }
            let last_error = match req.send_string(&body) {
                Ok(resp) => return parse_response(resp, started.elapsed()),
                Err(ureq::Error::Status(status @ (401 | 403), _)) => {
                    return Err(LlmError::Auth { status })
                }
                Err(ureq::Error::Status(status, resp)) if status == 429 || status >= 500 => {
                    drop(resp);
                    format!("HTTP {status}")
                }
                Err(ureq::Error::Status(status, resp)) => {
                    let message = resp.into_string().unwrap_or_default();
                    return Err(LlmError::Rejected { status, message });
                }
                Err(ureq::Error::Transport(t)) => t.to_string(),
            };
            if attempt >= backoff.max_retries {
                warn!(attempts = attempt + 1, %last_error, "provider retries exhausted");
                return Err(LlmError::Exhausted {
                    attempts: attempt + 1,
                    last_error,
                });
            }
            let delay = backoff.delay(attempt);
            debug!(attempt, ?delay, %last_error, "retrying provider call");
            std::thread::sleep(delay);
            attempt += 1;
        }
    }
}

fn parse_response(resp: ureq::Response, latency: Duration) -> Result<LlmResponse, LlmError> {
    let raw = resp
        .into_string()
        .map_err(|e| LlmError::Malformed(e.to_string()))?;
    let parsed: CompletionResponse =
        serde_json::from_str(&raw).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let text = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| LlmError::Malformed("response has no message content".into()))?;
    let usage = parsed
        .usage
        .map(|u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        })
        .unwrap_or_default();
    Ok(LlmResponse {
        text,
        latency,
        usage,
    })
}

impl ChatProvider for RemoteChatProvider {
    fn complete(&self, prompt: &Prompt) -> Result<LlmResponse, LlmError> {
        self.send(prompt_messages(prompt))
    }

    fn condense(&self, history: &[Message], question: &str) -> Result<String, LlmError> {
        self.send(condense_messages(history, question)).map(|r| r.text)
    }
}
