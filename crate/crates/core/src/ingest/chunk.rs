use super::{Chunk, ChunkId, ChunkPolicy, IngestError, ParsedDocument};

/// Greedy overlapping windows over whitespace tokens.
///
/// Returns half-open `[start, end)` token ranges. A sequence of at most
/// `max` tokens yields a single window.
fn windows(n: usize, max: usize, overlap: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut start = 0;
    loop {
        let end = (start + max).min(n);
        out.push((start, end));
        if end == n {
            break;
        }
        start = end - overlap;
    }
    out
}

/// Splits a parsed document into chunks ordered by `(page, ordinal)`.
///
/// Keywords are left empty; they depend on course-wide statistics and are
/// filled in by the knowledge base.
pub fn chunk(parsed: &ParsedDocument, policy: &ChunkPolicy) -> Result<Vec<Chunk>, IngestError> {
    policy.validate()?;
    let mut chunks = Vec::new();

    if policy.respect_page_boundaries {
        for page in &parsed.pages {
            let tokens: Vec<&str> = page.text.split_whitespace().collect();
            for (ordinal, (start, end)) in windows(tokens.len(), policy.max_tokens, policy.overlap_tokens)
                .into_iter()
                .enumerate()
            {
                chunks.push(make_chunk(parsed, page.number, ordinal as u32, &tokens[start..end]));
            }
        }
        return Ok(chunks);
    }

    // Cross-page windows take the page of their first token.
    let mut tokens = Vec::new();
    let mut pages = Vec::new();
    for page in &parsed.pages {
        for tok in page.text.split_whitespace() {
            tokens.push(tok);
            pages.push(page.number);
        }
    }
    let mut last_page = None;
    let mut ordinal = 0u32;
    for (start, end) in windows(tokens.len(), policy.max_tokens, policy.overlap_tokens) {
        let page = pages[start];
        if last_page == Some(page) {
            ordinal += 1;
        } else {
            ordinal = 0;
            last_page = Some(page);
        }
        chunks.push(make_chunk(parsed, page, ordinal, &tokens[start..end]));
    }
    Ok(chunks)
}

fn make_chunk(parsed: &ParsedDocument, page: u32, ordinal: u32, tokens: &[&str]) -> Chunk {
    Chunk {
        chunk_id: ChunkId::new(&parsed.doc_id, page, ordinal),
        doc_id: parsed.doc_id.clone(),
        page_number: page,
        ordinal,
        text: tokens.join(" "),
        token_count: tokens.len(),
        keywords: Vec::new(),
        source_title: parsed.title.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DocId, Page};
    use proptest::prelude::*;

    fn doc(pages: Vec<(u32, String)>) -> ParsedDocument {
        ParsedDocument {
            doc_id: DocId::new("doc"),
            title: "Title".into(),
            pages: pages
                .into_iter()
                .map(|(number, text)| Page { number, text })
                .collect(),
        }
    }

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ")
    }

    fn policy(max: usize, overlap: usize) -> ChunkPolicy {
        ChunkPolicy {
            max_tokens: max,
            overlap_tokens: overlap,
            respect_page_boundaries: true,
        }
    }

    #[test]
    fn under_budget_single_chunk() {
        let chunks = chunk(&doc(vec![(1, numbered(100))]), &ChunkPolicy::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, numbered(100));
        assert_eq!(chunks[0].token_count, 100);
        assert_eq!(chunks[0].chunk_id.as_str(), "doc:1:0");
    }

    #[test]
    fn thousand_tokens_three_windows() {
        // 1-based windows [1..400], [351..750], [701..1000].
        let chunks = chunk(&doc(vec![(1, numbered(1000))]), &policy(400, 50)).unwrap();
        let bounds: Vec<(String, String, usize)> = chunks
            .iter()
            .map(|c| {
                let toks: Vec<&str> = c.text.split(' ').collect();
                (toks[0].to_string(), toks[toks.len() - 1].to_string(), c.token_count)
            })
            .collect();
        assert_eq!(
            bounds,
            vec![
                ("t1".into(), "t400".into(), 400),
                ("t351".into(), "t750".into(), 400),
                ("t701".into(), "t1000".into(), 300),
            ]
        );
        let ords: Vec<u32> = chunks.iter().map(|c| c.ordinal).collect();
        assert_eq!(ords, vec![0, 1, 2]);
    }

    #[test]
    fn empty_document_no_chunks() {
        assert!(chunk(&doc(vec![]), &ChunkPolicy::default()).unwrap().is_empty());
        assert!(chunk(&doc(vec![(1, "   ".into())]), &ChunkPolicy::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn invalid_policy_rejected() {
        assert!(chunk(&doc(vec![(1, "a".into())]), &policy(5, 5)).is_err());
    }

    #[test]
    fn pages_are_independent() {
        let chunks = chunk(
            &doc(vec![(2, numbered(5)), (4, numbered(12))]),
            &policy(10, 2),
        )
        .unwrap();
        let ids: Vec<&str> = chunks.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["doc:2:0", "doc:4:0", "doc:4:1"]);
    }

    #[test]
    fn cross_page_windows_take_first_token_page() {
        let p = ChunkPolicy {
            max_tokens: 4,
            overlap_tokens: 1,
            respect_page_boundaries: false,
        };
        let chunks = chunk(&doc(vec![(1, "a b c".into()), (2, "d e f g".into())]), &p).unwrap();
        let got: Vec<(&str, &str)> = chunks
            .iter()
            .map(|c| (c.chunk_id.as_str(), c.text.as_str()))
            .collect();
        assert_eq!(got, vec![("doc:1:0", "a b c d"), ("doc:2:0", "d e f g")]);
    }

    /// Reassembles a page from its chunks by dropping each chunk's overlap prefix.
    fn dedup_concat(chunks: &[Chunk], overlap: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (i, c) in chunks.iter().enumerate() {
            let toks = c.text.split(' ').map(str::to_string);
            if i == 0 {
                out.extend(toks);
            } else {
                out.extend(toks.skip(overlap));
            }
        }
        out
    }

    proptest! {
        #[test]
        fn coverage_budget_and_ordinals(
            page_lens in proptest::collection::vec(0usize..300, 1..5),
            max in 1usize..60,
            overlap_frac in 0.0f64..1.0,
        ) {
            let overlap = ((max as f64) * overlap_frac) as usize % max;
            let pages: Vec<(u32, String)> = page_lens
                .iter()
                .enumerate()
                .map(|(i, &n)| (i as u32 + 1, numbered(n)))
                .collect();
            let d = doc(pages.clone());
            let chunks = chunk(&d, &policy(max, overlap)).unwrap();
            for (num, text) in &pages {
                let page_chunks: Vec<Chunk> =
                    chunks.iter().filter(|c| c.page_number == *num).cloned().collect();
                let expected: Vec<String> = text.split_whitespace().map(str::to_string).collect();
                prop_assert_eq!(dedup_concat(&page_chunks, overlap), expected);
                for (i, c) in page_chunks.iter().enumerate() {
                    prop_assert_eq!(c.ordinal as usize, i);
                    prop_assert!(c.token_count <= max);
                    prop_assert!(!c.text.is_empty());
                }
            }
            prop_assert_eq!(chunk(&d, &policy(max, overlap)).unwrap(), chunks);
        }
    }
}
