use std::collections::{BTreeMap, HashMap, HashSet};

use crate::text::terms;

pub const DEFAULT_KEYWORDS_PER_CHUNK: usize = 8;

/// Document-frequency table over a course's chunks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    chunk_count: usize,
    doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut stats = CorpusStats::default();
        for text in texts {
            stats.add(text);
        }
        stats
    }

    pub fn add(&mut self, text: &str) {
        self.chunk_count += 1;
        let unique: HashSet<String> = terms(text).into_iter().collect();
        for term in unique {
            *self.doc_freq.entry(term).or_insert(0) += 1;
        }
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_count
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Smoothed idf: `ln((N + 1) / (df + 1)) + 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.chunk_count as f64;
        let df = self.doc_freq(term) as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }
}

/// Top-`k` tf-idf terms of `text`, best first, ties broken lexicographically.
pub fn extract_keywords(text: &str, stats: &CorpusStats, k: usize) -> Vec<String> {
    let mut tf: BTreeMap<String, usize> = BTreeMap::new();
    for term in terms(text) {
        *tf.entry(term).or_insert(0) += 1;
    }
    let mut scored: Vec<(f64, String)> = tf
        .into_iter()
        .map(|(term, count)| (count as f64 * stats.idf(&term), term))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, t)| t).collect()
}
