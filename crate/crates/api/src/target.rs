use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use chated_core::chat::Message;
use chated_core::eval::{ChatTarget, TargetError};
use chated_core::store::CourseId;

/// Drives a running server through its public JSON API.
#[derive(Debug, Clone)]
pub struct HttpChatTarget {
    base: String,
    agent: ureq::Agent,
}

#[derive(Debug, thiserror::Error)]
#[error("HTTP {status} {code}: {message}")]
pub struct RemoteApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

#[derive(Deserialize)]
struct ErrorEnvelope {
    error: ErrorFields,
}

#[derive(Deserialize)]
struct ErrorFields {
    code: String,
    message: String,
}

#[derive(Deserialize)]
struct SessionCreated {
    session_id: String,
}

impl HttpChatTarget {
    pub fn new(base_url: impl Into<String>) -> Self {
        let base = base_url.into().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        HttpChatTarget { base, agent }
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<ureq::Response, TargetError> {
        match self
            .agent
            .post(&format!("{}{path}", self.base))
            .send_json(body)
        {
            Ok(resp) => Ok(resp),
            Err(ureq::Error::Status(status, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                let (code, message) = match serde_json::from_str::<ErrorEnvelope>(&text) {
                    Ok(e) => (e.error.code, e.error.message),
                    Err(_) => ("unknown".to_string(), text),
                };
                Err(Box::new(RemoteApiError {
                    status,
                    code,
                    message,
                }))
            }
            Err(e) => Err(Box::new(e)),
        }
    }
}

impl ChatTarget for HttpChatTarget {
    fn start_session(&self, course_id: &CourseId) -> Result<String, TargetError> {
        let resp = self.post(&format!("/courses/{course_id}/sessions"), json!({}))?;
        Ok(resp.into_json::<SessionCreated>()?.session_id)
    }

    fn ask(&self, session_id: &str, question: &str) -> Result<Message, TargetError> {
        let resp = self.post(
            &format!("/sessions/{session_id}/messages"),
            json!({ "text": question }),
        )?;
        Ok(resp.into_json::<Message>()?)
    }
}
