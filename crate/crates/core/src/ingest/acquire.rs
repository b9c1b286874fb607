use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::Duration;

use chrono::Utc;
use percent_encoding::percent_decode_str;
use url::Url;

use super::{DocId, IngestError, MediaKind, Origin, RawDocument, MAX_SOURCE_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    File,
    Url,
}

#[derive(Debug, Clone)]
pub struct AcquireOptions {
    pub max_bytes: u64,
    pub fetch_timeout: Duration,
    /// Overrides the title derived from the file name or URL.
    pub title: Option<String>,
}

impl Default for AcquireOptions {
    fn default() -> Self {
        AcquireOptions {
            max_bytes: MAX_SOURCE_BYTES,
            fetch_timeout: Duration::from_secs(30),
            title: None,
        }
    }
}

pub fn acquire(
    source: &str,
    kind: SourceKind,
    opts: &AcquireOptions,
) -> Result<RawDocument, IngestError> {
    match kind {
        SourceKind::File => acquire_file(Path::new(source), opts),
        SourceKind::Url => acquire_url(source, opts),
    }
}

pub fn acquire_file(path: &Path, opts: &AcquireOptions) -> Result<RawDocument, IngestError> {
    let location = path.display().to_string();
    let read_err = |source| IngestError::Read {
        path: location.clone(),
        source,
    };
    let meta = fs::metadata(path).map_err(read_err)?;
    if meta.len() > opts.max_bytes {
        return Err(IngestError::TooLarge {
            location,
            size: meta.len(),
            limit: opts.max_bytes,
        });
    }
    let body = fs::read(path).map_err(read_err)?;

    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| location.clone());
    let media_kind = match kind_from_name(&file_name, &location)? {
        Some(kind) => kind,
        None => sniff(&body, &location)?,
    };
    let title = opts
        .title
        .clone()
        .unwrap_or_else(|| title_from_name(&file_name));
    Ok(finish(title, Origin::File(location), media_kind, body))
}

pub fn acquire_url(source: &str, opts: &AcquireOptions) -> Result<RawDocument, IngestError> {
    let parsed = Url::parse(source).map_err(|e| IngestError::Fetch {
        url: source.to_string(),
        message: e.to_string(),
    })?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(IngestError::UnsupportedScheme(source.to_string()));
    }

    let agent = ureq::AgentBuilder::new()
        .timeout(opts.fetch_timeout)
        .build();
    let response = match agent.get(source).call() {
        Ok(r) => r,
        Err(ureq::Error::Status(status, _)) => {
            return Err(IngestError::HttpStatus {
                url: source.to_string(),
                status,
            })
        }
        Err(e) => {
            return Err(IngestError::Fetch {
                url: source.to_string(),
                message: e.to_string(),
            })
        }
    };

    let final_url = Url::parse(response.get_url()).unwrap_or(parsed);
    let content_type = response.content_type().to_ascii_lowercase();
    if let Some(len) = response
        .header("content-length")
        .and_then(|v| v.parse::<u64>().ok())
    {
        if len > opts.max_bytes {
            return Err(IngestError::TooLarge {
                location: source.to_string(),
                size: len,
                limit: opts.max_bytes,
            });
        }
    }
    let mut body = Vec::new();
    response
        .into_reader()
        .take(opts.max_bytes + 1)
        .read_to_end(&mut body)
        .map_err(|e| IngestError::Fetch {
            url: source.to_string(),
            message: e.to_string(),
        })?;
    if body.len() as u64 > opts.max_bytes {
        return Err(IngestError::TooLarge {
            location: source.to_string(),
            size: body.len() as u64,
            limit: opts.max_bytes,
        });
    }

    let segment = last_path_segment(&final_url);
    let media_kind = match kind_from_name(&segment, source)? {
        Some(kind) => kind,
        None => match kind_from_content_type(&content_type, source)? {
            Some(kind) => kind,
            None => sniff(&body, source)?,
        },
    };
    let title = opts.title.clone().unwrap_or_else(|| {
        if segment.is_empty() {
            final_url.host_str().unwrap_or(source).to_string()
        } else {
            title_from_name(&segment)
        }
    });
    Ok(finish(
        title,
        Origin::Url(final_url.to_string()),
        media_kind,
        body,
    ))
}

/// Builds a document from uploaded bytes; detection uses the file name, then
/// the declared content type, then the bytes themselves.
pub fn acquire_upload(
    file_name: &str,
    content_type: Option<&str>,
    body: Vec<u8>,
    opts: &AcquireOptions,
) -> Result<RawDocument, IngestError> {
    if body.len() as u64 > opts.max_bytes {
        return Err(IngestError::TooLarge {
            location: file_name.to_string(),
            size: body.len() as u64,
            limit: opts.max_bytes,
        });
    }
    let media_kind = match kind_from_name(file_name, file_name)? {
        Some(kind) => kind,
        None => match kind_from_content_type(&content_type.unwrap_or("").to_ascii_lowercase(), file_name)? {
            Some(kind) => kind,
            None => sniff(&body, file_name)?,
        },
    };
    let title = opts.title.clone().unwrap_or_else(|| title_from_name(file_name));
    Ok(finish(title, Origin::Upload(file_name.to_string()), media_kind, body))
}

fn finish(title: String, origin: Origin, media_kind: MediaKind, body: Vec<u8>) -> RawDocument {
    let title = if title.trim().is_empty() {
        origin.location().to_string()
    } else {
        title
    };
    RawDocument {
        doc_id: DocId::from_content(&title, media_kind, &body),
        title,
        origin,
        media_kind,
        body,
        fetched_at: Utc::now(),
    }
}

fn last_path_segment(url: &Url) -> String {
    url.path_segments()
        .and_then(|segs| segs.filter(|s| !s.is_empty()).last())
        .map(|s| percent_decode_str(s).decode_utf8_lossy().into_owned())
        .unwrap_or_default()
}

/// `COSC 404 - Transactions.md` -> `COSC 404 - Transactions`;
/// `slides.pages.jsonl` -> `slides`.
fn title_from_name(name: &str) -> String {
    let stem = match name.rfind('.') {
        Some(0) | None => name,
        Some(idx) => &name[..idx],
    };
    stem.strip_suffix(".pages").unwrap_or(stem).to_string()
}

fn kind_from_name(name: &str, location: &str) -> Result<Option<MediaKind>, IngestError> {
    let lower = name.to_ascii_lowercase();
    let Some((_, ext)) = lower.rsplit_once('.') else {
        return Ok(None);
    };
    let kind = match ext {
        "txt" | "text" => MediaKind::PlainText,
        "md" | "markdown" => MediaKind::Markdown,
        "html" | "htm" | "xhtml" => MediaKind::Html,
        "jsonl" | "ndjson" => MediaKind::PreExtractedPages,
        "pdf" | "ppt" | "pptx" | "doc" | "docx" | "odp" | "key" => {
            return Err(IngestError::UnsupportedMedia {
                location: location.to_string(),
                detail: format!(
                    ".{ext} needs an external extractor; supply its output as a .pages.jsonl file"
                ),
            })
        }
        _ => return Ok(None),
    };
    Ok(Some(kind))
}

fn kind_from_content_type(ct: &str, location: &str) -> Result<Option<MediaKind>, IngestError> {
    let mime = ct.split(';').next().unwrap_or("").trim();
    let kind = match mime {
        "text/html" | "application/xhtml+xml" => MediaKind::Html,
        "text/markdown" | "text/x-markdown" => MediaKind::Markdown,
        "application/x-ndjson" | "application/jsonl" | "application/jsonlines" => {
            MediaKind::PreExtractedPages
        }
        m if m.starts_with("image/")
            || m.starts_with("audio/")
            || m.starts_with("video/")
            || m == "application/pdf"
            || m.contains("officedocument")
            || m == "application/vnd.ms-powerpoint" =>
        {
            return Err(IngestError::UnsupportedMedia {
                location: location.to_string(),
                detail: format!("content type {m}"),
            })
        }
        _ => return Ok(None),
    };
    Ok(Some(kind))
}

/// Content sniffing for sources without a recognised extension or type.
fn sniff(body: &[u8], location: &str) -> Result<MediaKind, IngestError> {
    if body.is_empty() {
        return Ok(MediaKind::PlainText);
    }
    if body.contains(&0) {
        return Err(IngestError::UnsupportedMedia {
            location: location.to_string(),
            detail: "binary content".into(),
        });
    }
    let text = String::from_utf8_lossy(body);
    let head: String = text
        .trim_start_matches('\u{feff}')
        .trim_start()
        .chars()
        .take(512)
        .collect::<String>()
        .to_ascii_lowercase();
    if head.starts_with("<!doctype html") || head.starts_with("<html") || head.contains("<body") {
        return Ok(MediaKind::Html);
    }
    if looks_like_page_records(&text) {
        return Ok(MediaKind::PreExtractedPages);
    }
    if text.lines().any(|l| l.starts_with("# ")) {
        return Ok(MediaKind::Markdown);
    }
    Ok(MediaKind::PlainText)
}

fn looks_like_page_records(text: &str) -> bool {
    let mut any = false;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<serde_json::Value>(line) {
            Ok(serde_json::Value::Object(map))
                if map.contains_key("page") && map.contains_key("text") =>
            {
                any = true
            }
            _ => return false,
        }
    }
    any
}
