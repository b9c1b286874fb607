use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Multipart, Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::{Deserialize, Serialize};

use chated_core::chat::{ChatSession, Message, SessionId};
use chated_core::ingest::{acquire_upload, acquire_url, AcquireOptions, DocId};
use chated_core::store::{CourseConfig, CourseId, CourseSummary, DocumentMeta};

use crate::error::ApiError;
use crate::AppState;

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker task failed: {e}")))?
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v)
        .map_err(|e| ApiError::new(e.status(), "invalid_request", e.body_text()))
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn require_instructor(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(expected) = &state.instructor_token else {
        return Err(ApiError::unauthorized(
            "instructor routes are disabled: CHATED_INSTRUCTOR_TOKEN is not set",
        ));
    };
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    match presented {
        Some(token) if constant_time_eq(token.as_bytes(), expected.as_bytes()) => Ok(()),
        Some(_) => Err(ApiError::unauthorized("instructor token is not valid")),
        None => Err(ApiError::unauthorized("missing bearer instructor token")),
    }
}

#[derive(Serialize)]
pub(crate) struct Health {
    status: &'static str,
    version: &'static str,
    courses: usize,
}

pub(crate) async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        courses: state.engine.store().course_count(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CreateCourse {
    name: String,
    #[serde(default)]
    config: Option<CourseConfig>,
}

pub(crate) async fn create_course(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<CreateCourse>, JsonRejection>,
) -> Result<(StatusCode, Json<CourseSummary>), ApiError> {
    require_instructor(&state, &headers)?;
    let body = json_body(body)?;
    if let Some(config) = &body.config {
        config.validate()?;
    }
    let summary = blocking(move || {
        let store = state.engine.store();
        let id = store.create_course(&body.name)?;
        if let Some(config) = body.config {
            store.set_config(&id, config)?;
        }
        store
            .list_courses()
            .into_iter()
            .find(|c| c.course_id == id)
            .ok_or_else(|| ApiError::internal("created course is not listed"))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

pub(crate) async fn list_courses(State(state): State<AppState>) -> Result<Json<Vec<CourseSummary>>, ApiError> {
    blocking(move || Ok(Json(state.engine.store().list_courses()))).await
}

#[derive(Serialize)]
pub(crate) struct Ingested {
    doc_id: DocId,
    title: String,
    chunk_count: usize,
    page_count: usize,
}

impl From<DocumentMeta> for Ingested {
    fn from(m: DocumentMeta) -> Self {
        Ingested {
            doc_id: m.doc_id,
            title: m.title,
            chunk_count: m.chunk_count,
            page_count: m.page_count,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UrlSource {
    url: String,
    #[serde(default)]
    title: Option<String>,
}

struct Upload {
    file_name: String,
    content_type: Option<String>,
    body: Vec<u8>,
    title: Option<String>,
}

async fn read_upload(mut form: Multipart) -> Result<Upload, ApiError> {
    let multipart_err = |e: axum::extract::multipart::MultipartError| {
        let code = if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            "too_large"
        } else {
            "invalid_request"
        };
        ApiError::new(e.status(), code, e.body_text())
    };
    let mut file = None;
    let mut title = None;
    while let Some(field) = form.next_field().await.map_err(multipart_err)? {
        match field.name() {
            Some("file") => {
                let file_name = field.file_name().unwrap_or("upload").to_string();
                let content_type = field.content_type().map(str::to_string);
                let body = field.bytes().await.map_err(multipart_err)?.to_vec();
                file = Some((file_name, content_type, body));
            }
            Some("title") => {
                let t = field.text().await.map_err(multipart_err)?;
                title = Some(t.trim().to_string()).filter(|t| !t.is_empty());
            }
            _ => {}
        }
    }
    let (file_name, content_type, body) =
        file.ok_or_else(|| ApiError::bad_request("invalid_request", "multipart body needs a \"file\" field"))?;
    Ok(Upload {
        file_name,
        content_type,
        body,
        title,
    })
}

fn ensure_course(state: &AppState, id: &CourseId) -> Result<(), ApiError> {
    state.engine.store().config(id)?;
    Ok(())
}

pub(crate) async fn add_document(
    State(state): State<AppState>,
    Path(course): Path<String>,
    req: Request,
) -> Result<(StatusCode, Json<Ingested>), ApiError> {
    require_instructor(&state, req.headers())?;
    let course = CourseId::new(course);
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_ascii_lowercase();

    let source = if content_type.starts_with("multipart/form-data") {
        let form = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::new(e.status(), "invalid_request", e.body_text()))?;
        Source::Upload(read_upload(form).await?)
    } else if content_type.starts_with("application/json") {
        let body = Json::<UrlSource>::from_request(req, &()).await;
        Source::Url(json_body(body)?)
    } else {
        return Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media",
            "send multipart/form-data with a \"file\" field, or JSON {\"url\": ...}",
        ));
    };

    let meta = blocking(move || {
        ensure_course(&state, &course)?;
        let raw = match source {
            Source::Upload(up) => {
                let opts = AcquireOptions {
                    title: up.title,
                    ..state.acquire.clone()
                };
                acquire_upload(&up.file_name, up.content_type.as_deref(), up.body, &opts)?
            }
            Source::Url(u) => {
                let opts = AcquireOptions {
                    title: u.title,
                    ..state.acquire.clone()
                };
                acquire_url(&u.url, &opts)?
            }
        };
        Ok(state.engine.store().ingest(&course, &raw)?)
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(meta.into())))
}

enum Source {
    Upload(Upload),
    Url(UrlSource),
}

pub(crate) async fn list_documents(
    State(state): State<AppState>,
    Path(course): Path<String>,
) -> Result<Json<Vec<DocumentMeta>>, ApiError> {
    blocking(move || Ok(Json(state.engine.store().list_documents(&CourseId::new(course))?))).await
}

#[derive(Serialize)]
pub(crate) struct Removed {
    doc_id: DocId,
    removed_chunks: usize,
}

pub(crate) async fn remove_document(
    State(state): State<AppState>,
    Path((course, doc)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Json<Removed>, ApiError> {
    require_instructor(&state, &headers)?;
    blocking(move || {
        let course = CourseId::new(course);
        let doc_id = DocId::new(doc);
        let store = state.engine.store();
        let known = store.list_documents(&course)?.iter().any(|d| d.doc_id == doc_id);
        if !known {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_document",
                format!("course {course} has no document {doc_id}"),
            ));
        }
        let removed_chunks = store.remove_document(&course, &doc_id)?;
        Ok(Json(Removed {
            doc_id,
            removed_chunks,
        }))
    })
    .await
}

#[derive(Serialize)]
pub(crate) struct SessionCreated {
    session_id: SessionId,
    course_id: CourseId,
}

pub(crate) async fn create_session(
    State(state): State<AppState>,
    Path(course): Path<String>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let created = blocking(move || {
        let course_id = CourseId::new(course);
        let session_id = state.engine.start_session(&course_id)?;
        Ok(SessionCreated {
            session_id,
            course_id,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct Ask {
    text: String,
}

pub(crate) async fn post_message(
    State(state): State<AppState>,
    Path(session): Path<String>,
    body: Result<Json<Ask>, JsonRejection>,
) -> Result<Json<Message>, ApiError> {
    let ask = json_body(body)?;
    blocking(move || Ok(Json(state.engine.answer(&SessionId::new(session), &ask.text)?))).await
}

pub(crate) async fn transcript(
    State(state): State<AppState>,
    Path(session): Path<String>,
) -> Result<Json<ChatSession>, ApiError> {
    blocking(move || Ok(Json(state.engine.store().session(&SessionId::new(session))?))).await
}

pub(crate) async fn not_found() -> impl IntoResponse {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}
