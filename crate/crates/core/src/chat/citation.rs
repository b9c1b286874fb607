use super::prompt::ContextBlock;
use super::session::CitationRef;

/// Groups cited pages by source title.
///
/// Titles keep their first-appearance order; pages within a title keep
/// retrieval-rank order with duplicates removed.
pub fn format_citations<'a, I>(ranked: I) -> Vec<CitationRef>
where
    I: IntoIterator<Item = (&'a str, u32)>,
{
    let mut refs: Vec<CitationRef> = Vec::new();
    for (title, page) in ranked {
        match refs.iter_mut().find(|r| r.source_title == title) {
            Some(r) => {
                if !r.page_numbers.contains(&page) {
                    r.page_numbers.push(page);
                }
            }
            None => refs.push(CitationRef {
                source_title: title.to_string(),
                page_numbers: vec![page],
            }),
        }
    }
    refs
}

pub fn citations_for_blocks(blocks: &[ContextBlock]) -> Vec<CitationRef> {
    format_citations(blocks.iter().map(|b| (b.source_title.as_str(), b.page_number)))
}

/// The `Sources:` block printed under an answer.
pub fn render_sources(citations: &[CitationRef]) -> String {
    let mut out = String::from("Sources:");
    for c in citations {
        out.push('\n');
        out.push_str(&c.to_string());
    }
    out
}
