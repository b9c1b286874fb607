use scraper::{ElementRef, Html, Node};
use serde::Deserialize;

use super::{IngestError, MediaKind, Page, ParsedDocument, RawDocument};

/// Largest page text a parser may emit.
pub const MAX_PAGE_BYTES: usize = 1024 * 1024;

const FORM_FEED: char = '\u{000c}';

/// Splits a raw document into ordered pages.
pub fn parse(raw: &RawDocument) -> Result<ParsedDocument, IngestError> {
    let pages = match raw.media_kind {
        MediaKind::PreExtractedPages => parse_page_records(&decode(&raw.body)?)?,
        MediaKind::PlainText => split_plain(&decode(&raw.body)?),
        MediaKind::Markdown => split_markdown(&decode(&raw.body)?),
        MediaKind::Html => split_html(&decode(&raw.body)?),
    };
    for page in &pages {
        if page.text.len() > MAX_PAGE_BYTES {
            return Err(IngestError::PageTooLarge {
                page: page.number,
                size: page.text.len(),
                limit: MAX_PAGE_BYTES,
            });
        }
    }
    Ok(ParsedDocument {
        doc_id: raw.doc_id.clone(),
        title: raw.title.clone(),
        pages,
    })
}

/// Strict UTF-8 first; a lossy decode is accepted only when replacement
/// characters stay under 1% of the text.
fn decode(body: &[u8]) -> Result<String, IngestError> {
    let body = body.strip_prefix(b"\xef\xbb\xbf").unwrap_or(body);
    match std::str::from_utf8(body) {
        Ok(s) => Ok(s.to_string()),
        Err(_) => {
            let lossy = String::from_utf8_lossy(body);
            let total = lossy.chars().count().max(1);
            let bad = lossy.chars().filter(|&c| c == char::REPLACEMENT_CHARACTER).count();
            if bad * 100 > total {
                Err(IngestError::Undecodable)
            } else {
                Ok(lossy.into_owned())
            }
        }
    }
}

#[derive(Deserialize)]
struct PageRecord {
    page: i64,
    text: String,
}

fn parse_page_records(body: &str) -> Result<Vec<Page>, IngestError> {
    let mut pages: Vec<Page> = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PageRecord =
            serde_json::from_str(line).map_err(|e| IngestError::MalformedPageRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        let number = u32::try_from(rec.page)
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| IngestError::MalformedPageRecord {
                line: line_no,
                message: format!("page must be an integer >= 1, got {}", rec.page),
            })?;
        if let Some(prev) = pages.last() {
            if number <= prev.number {
                return Err(IngestError::MalformedPageRecord {
                    line: line_no,
                    message: format!(
                        "page numbers must be strictly increasing ({} after {})",
                        number, prev.number
                    ),
                });
            }
        }
        pages.push(Page {
            number,
            text: rec.text,
        });
    }
    Ok(pages)
}

/// Form-feed pages keep their physical numbering; blank pages are dropped.
fn split_form_feed(text: &str) -> Vec<Page> {
    text.split(FORM_FEED)
        .enumerate()
        .filter_map(|(i, seg)| {
            let seg = seg.trim();
            (!seg.is_empty()).then(|| Page {
                number: i as u32 + 1,
                text: seg.to_string(),
            })
        })
        .collect()
}

fn number_sections(sections: Vec<String>) -> Vec<Page> {
    sections
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, text)| Page {
            number: i as u32 + 1,
            text,
        })
        .collect()
}

fn split_plain(text: &str) -> Vec<Page> {
    if text.contains(FORM_FEED) {
        split_form_feed(text)
    } else {
        number_sections(vec![text.to_string()])
    }
}

fn atx_level(line: &str) -> Option<usize> {
    let hashes = line.bytes().take_while(|&b| b == b'#').count();
    if (1..=6).contains(&hashes) {
        match line.as_bytes().get(hashes) {
            Some(b' ') | Some(b'\t') => Some(hashes),
            _ => None,
        }
    } else {
        None
    }
}

/// Heading lines outside fenced code blocks, with their level.
fn heading_lines(text: &str) -> Vec<(usize, usize)> {
    let mut in_fence = false;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") || trimmed.starts_with("~~~") {
            in_fence = !in_fence;
            continue;
        }
        if !in_fence {
            if let Some(level) = atx_level(line) {
                out.push((i, level));
            }
        }
    }
    out
}

fn split_markdown(text: &str) -> Vec<Page> {
    if text.contains(FORM_FEED) {
        return split_form_feed(text);
    }
    let headings = heading_lines(text);
    let Some(top) = headings.iter().map(|&(_, lvl)| lvl).min() else {
        return number_sections(vec![text.to_string()]);
    };
    let starts: Vec<usize> = headings
        .iter()
        .filter(|&&(_, lvl)| lvl == top)
        .map(|&(i, _)| i)
        .collect();

    let mut sections = Vec::new();
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        if starts.binary_search(&i).is_ok() && !current.is_empty() {
            sections.push(std::mem::take(&mut current));
        }
        current.push_str(line);
        current.push('\n');
    }
    sections.push(current);
    number_sections(sections)
}

const SKIPPED_HTML: &[&str] = &["script", "style", "noscript", "template", "head", "svg"];

fn heading_level(name: &str) -> Option<usize> {
    match name {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

fn split_html(source: &str) -> Vec<Page> {
    let doc = Html::parse_document(source);
    let root = doc.root_element();

    let mut top: Option<usize> = None;
    for node in root.descendants() {
        if let Some(el) = ElementRef::wrap(node) {
            if let Some(lvl) = heading_level(el.value().name()) {
                if !inside_skipped(el) {
                    top = Some(top.map_or(lvl, |t: usize| t.min(lvl)));
                }
            }
        }
    }

    let mut sections = vec![String::new()];
    collect_html_text(root, top, &mut sections);
    let sections = sections
        .into_iter()
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect();
    number_sections(sections)
}

fn inside_skipped(el: ElementRef<'_>) -> bool {
    el.ancestors()
        .filter_map(ElementRef::wrap)
        .any(|a| SKIPPED_HTML.contains(&a.value().name()))
}

fn collect_html_text(el: ElementRef<'_>, top: Option<usize>, sections: &mut Vec<String>) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => {
                let current = sections.last_mut().expect("at least one section");
                current.push_str(t);
            }
            Node::Element(e) => {
                let name = e.name();
                if SKIPPED_HTML.contains(&name) {
                    continue;
                }
                if top.is_some() && heading_level(name) == top {
                    sections.push(String::new());
                }
                let current = sections.last_mut().expect("at least one section");
                current.push(' ');
                if let Some(child_el) = ElementRef::wrap(child) {
                    collect_html_text(child_el, top, sections);
                }
                sections.last_mut().expect("at least one section").push(' ');
            }
            _ => {}
        }
    }
}
