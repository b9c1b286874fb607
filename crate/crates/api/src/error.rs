use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use chated_core::chat::{ChatError, PromptError};
use chated_core::embed::EmbedError;
use chated_core::ingest::IngestError;
use chated_core::llm::LlmError;
use chated_core::store::StoreError;

/// JSON error body: `{"error": {"code", "message"}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", message)
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message, "request failed");
        }
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code,
                message: &self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            IngestError::UnsupportedMedia { .. } | IngestError::UnsupportedScheme(_) => {
                (StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media")
            }
            IngestError::HttpStatus { .. } | IngestError::Fetch { .. } => {
                (StatusCode::BAD_GATEWAY, "fetch_failed")
            }
            IngestError::TooLarge { .. } | IngestError::PageTooLarge { .. } => {
                (StatusCode::PAYLOAD_TOO_LARGE, "too_large")
            }
            IngestError::MalformedPageRecord { .. } | IngestError::Undecodable => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_document")
            }
            IngestError::InvalidPolicy(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            IngestError::Read { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
        };
        ApiError::new(status, code, message)
    }
}

impl From<EmbedError> for ApiError {
    fn from(e: EmbedError) -> Self {
        ApiError::new(StatusCode::BAD_GATEWAY, "embedding_unavailable", e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            StoreError::Ingest(inner) => return inner.into(),
            StoreError::Embed(inner) => return inner.into(),
            StoreError::UnknownCourse(_) => (StatusCode::NOT_FOUND, "unknown_course"),
            StoreError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            StoreError::InvalidName => (StatusCode::BAD_REQUEST, "invalid_name"),
            StoreError::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            StoreError::DuplicateDocument(_) => (StatusCode::CONFLICT, "duplicate_document"),
            StoreError::Locked { .. } => (StatusCode::CONFLICT, "course_locked"),
            StoreError::Index(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            StoreError::Io { .. }
            | StoreError::Corrupt { .. }
            | StoreError::ChecksumMismatch { .. }
            | StoreError::MissingSegment { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "storage_error")
            }
        };
        ApiError::new(status, code, message)
    }
}

impl From<LlmError> for ApiError {
    fn from(e: LlmError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            LlmError::Exhausted { .. } => (StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable"),
            LlmError::InvalidConfig(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            LlmError::Auth { .. }
            | LlmError::Rejected { .. }
            | LlmError::Malformed(_)
            | LlmError::MissingCredential(_) => (StatusCode::BAD_GATEWAY, "provider_error"),
        };
        ApiError::new(status, code, message)
    }
}

impl From<ChatError> for ApiError {
    fn from(e: ChatError) -> Self {
        match e {
            ChatError::EmptyQuestion => ApiError::bad_request("empty_question", e.to_string()),
            ChatError::Store(inner) => inner.into(),
            ChatError::Provider(inner) => inner.into(),
            ChatError::Prompt(p) => {
                let message = p.to_string();
                match p {
                    PromptError::QuestionTooLong { .. } => {
                        ApiError::bad_request("question_too_long", message)
                    }
                    PromptError::NoContextFits { .. } => ApiError::new(
                        StatusCode::UNPROCESSABLE_ENTITY,
                        "context_too_large",
                        message,
                    ),
                    PromptError::NoContext => ApiError::internal(message),
                }
            }
        }
    }
}
