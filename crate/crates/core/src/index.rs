//! Hybrid vector + keyword retrieval over a flat, exactly scanned index.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingVector;
use crate::ingest::{ChunkId, DocId};

pub const DEFAULT_ALPHA: f64 = 0.7;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("vector has {got} dimensions, index expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub chunk_id: ChunkId,
    pub vector: EmbeddingVector,
    pub keywords: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: ChunkId,
    pub score: f64,
    pub cosine_part: f64,
    pub keyword_part: f64,
}

/// Jaccard similarity of two term sets; 0 when either is empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// `alpha * max(cosine, 0) + (1 - alpha) * keyword`.
pub fn fuse(alpha: f64, cosine: f64, keyword: f64) -> f64 {
    alpha * cosine.max(0.0) + (1.0 - alpha) * keyword
}

pub trait VectorIndex: Send + Sync {
    fn dims(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn upsert(&mut self, entry: IndexEntry) -> Result<(), IndexError>;
    fn search(
        &self,
        query: &EmbeddingVector,
        query_keywords: &BTreeSet<String>,
        k: usize,
        alpha: f64,
    ) -> Vec<RetrievalResult>;
    fn remove_document(&mut self, doc_id: &DocId) -> usize;
    fn get(&self, chunk_id: &ChunkId) -> Option<&IndexEntry>;
}

/// Exact scan over every entry.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    dims: usize,
    entries: Vec<IndexEntry>,
    positions: HashMap<ChunkId, usize>,
}

impl FlatIndex {
    pub fn new(dims: usize) -> Self {
        FlatIndex {
            dims,
            entries: Vec::new(),
            positions: HashMap::new(),
        }
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Replaces the keyword set of an existing entry.
    pub fn set_keywords(&mut self, chunk_id: &ChunkId, keywords: BTreeSet<String>) -> bool {
        match self.positions.get(chunk_id) {
            Some(&pos) => {
                self.entries[pos].keywords = keywords;
                true
            }
            None => false,
        }
    }

    fn score(&self, entry: &IndexEntry, query: &EmbeddingVector, kw: &BTreeSet<String>, alpha: f64) -> RetrievalResult {
        let cosine_part = query.cosine(&entry.vector);
        let keyword_part = jaccard(kw, &entry.keywords);
        RetrievalResult {
            chunk_id: entry.chunk_id.clone(),
            score: fuse(alpha, cosine_part, keyword_part).clamp(0.0, 1.0),
            cosine_part,
            keyword_part,
        }
    }
}

/// Heap wrapper where "greater" means "ranks worse", so the heap top is the
/// current weakest of the kept results.
struct Ranked(RetrievalResult);

fn rank_order(a: &RetrievalResult, b: &RetrievalResult) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.chunk_id.cmp(&b.chunk_id))
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        rank_order(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

impl VectorIndex for FlatIndex {
    fn dims(&self) -> usize {
        self.dims
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn upsert(&mut self, entry: IndexEntry) -> Result<(), IndexError> {
        if entry.vector.dims() != self.dims {
            return Err(IndexError::DimensionMismatch {
                expected: self.dims,
                got: entry.vector.dims(),
            });
        }
        match self.positions.get(&entry.chunk_id) {
            Some(&pos) => self.entries[pos] = entry,
            None => {
                self.positions.insert(entry.chunk_id.clone(), self.entries.len());
                self.entries.push(entry);
            }
        }
        Ok(())
    }

    fn search(
        &self,
        query: &EmbeddingVector,
        query_keywords: &BTreeSet<String>,
        k: usize,
        alpha: f64,
    ) -> Vec<RetrievalResult> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        for entry in &self.entries {
            let candidate = Ranked(self.score(entry, query, query_keywords, alpha));
            if heap.len() < k {
                heap.push(candidate);
            } else if let Some(worst) = heap.peek() {
                if candidate < *worst {
                    heap.pop();
                    heap.push(candidate);
                }
            }
        }
        heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }

    fn remove_document(&mut self, doc_id: &DocId) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| !e.chunk_id.belongs_to(doc_id));
        let removed = before - self.entries.len();
        if removed > 0 {
            self.positions = self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| (e.chunk_id.clone(), i))
                .collect();
        }
        removed
    }

    fn get(&self, chunk_id: &ChunkId) -> Option<&IndexEntry> {
        self.positions.get(chunk_id).map(|&i| &self.entries[i])
    }
}
