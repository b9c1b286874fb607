use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CourseConfig, CourseId, StoreError};
use crate::embed::{Embedder, EmbeddingVector};
use crate::index::{FlatIndex, IndexEntry, RetrievalResult, VectorIndex};
use crate::ingest::{
    chunk, extract_keywords, parse, Chunk, ChunkId, CorpusStats, DocId, MediaKind, Origin,
    RawDocument,
};
use crate::text::terms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: DocId,
    pub title: String,
    pub origin: Origin,
    pub media_kind: MediaKind,
    pub fetched_at: DateTime<Utc>,
    pub ingested_at: DateTime<Utc>,
    pub page_count: usize,
    pub chunk_count: usize,
}

/// A parsed, chunked and embedded document not yet added to a course.
#[derive(Debug, Clone)]
pub struct PreparedDocument {
    meta: DocumentMeta,
    chunks: Vec<Chunk>,
    vectors: Vec<EmbeddingVector>,
}

impl PreparedDocument {
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn meta(&self) -> &DocumentMeta {
        &self.meta
    }
}

/// A retrieval hit joined with its chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedChunk {
    pub result: RetrievalResult,
    pub chunk: Chunk,
}

/// One course's documents, chunks and index.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub course_id: CourseId,
    pub name: String,
    pub created_at: DateTime<Utc>,
    pub config: CourseConfig,
    documents: Vec<DocumentMeta>,
    chunks: Vec<Chunk>,
    positions: HashMap<ChunkId, usize>,
    index: FlatIndex,
}

impl KnowledgeBase {
    pub fn new(course_id: CourseId, name: String, dims: usize) -> Self {
        KnowledgeBase {
            course_id,
            name,
            created_at: Utc::now(),
            config: CourseConfig::default(),
            documents: Vec::new(),
            chunks: Vec::new(),
            positions: HashMap::new(),
            index: FlatIndex::new(dims),
        }
    }

    /// Rebuilds a knowledge base from persisted parts; chunk keywords are
    /// taken as stored.
    pub(crate) fn from_parts(
        course_id: CourseId,
        name: String,
        created_at: DateTime<Utc>,
        config: CourseConfig,
        documents: Vec<DocumentMeta>,
        chunks: Vec<Chunk>,
        vectors: Vec<EmbeddingVector>,
        dims: usize,
    ) -> Result<Self, StoreError> {
        let mut kb = KnowledgeBase {
            course_id,
            name,
            created_at,
            config,
            documents,
            chunks: Vec::new(),
            positions: HashMap::new(),
            index: FlatIndex::new(dims),
        };
        for (chunk, vector) in chunks.into_iter().zip(vectors) {
            kb.index.upsert(IndexEntry {
                chunk_id: chunk.chunk_id.clone(),
                vector,
                keywords: chunk.keywords.iter().cloned().collect(),
            })?;
            kb.positions.insert(chunk.chunk_id.clone(), kb.chunks.len());
            kb.chunks.push(chunk);
        }
        Ok(kb)
    }

    pub fn dims(&self) -> usize {
        self.index.dims()
    }

    pub fn documents(&self) -> &[DocumentMeta] {
        &self.documents
    }

    pub fn document(&self, doc_id: &DocId) -> Option<&DocumentMeta> {
        self.documents.iter().find(|d| &d.doc_id == doc_id)
    }

    /// Chunks in storage order: documents by ingestion, then `(page, ordinal)`.
    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn chunk(&self, id: &ChunkId) -> Option<&Chunk> {
        self.positions.get(id).map(|&i| &self.chunks[i])
    }

    pub fn index(&self) -> &FlatIndex {
        &self.index
    }

    /// Vectors aligned with [`Self::chunks`].
    pub fn vectors(&self) -> Vec<&EmbeddingVector> {
        self.chunks
            .iter()
            .map(|c| &self.index.get(&c.chunk_id).expect("chunk is indexed").vector)
            .collect()
    }

    fn unique_doc_id(&self, base: &DocId) -> DocId {
        if self.document(base).is_none() {
            return base.clone();
        }
        (2..)
            .map(|n| DocId::new(format!("{}-{n}", base.as_str())))
            .find(|candidate| self.document(candidate).is_none())
            .expect("unbounded suffix search")
    }

    /// Parses, chunks and embeds `raw` without modifying the course.
    pub fn prepare(
        &self,
        raw: &RawDocument,
        embedder: &dyn Embedder,
    ) -> Result<PreparedDocument, StoreError> {
        let mut raw = raw.clone();
        raw.doc_id = self.unique_doc_id(&raw.doc_id);
        let parsed = parse(&raw)?;
        let chunks = chunk(&parsed, &self.config.chunk_policy)?;
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        let vectors = embedder.embed_batch(&texts)?;
        let meta = DocumentMeta {
            doc_id: raw.doc_id.clone(),
            title: raw.title.clone(),
            origin: raw.origin.clone(),
            media_kind: raw.media_kind,
            fetched_at: raw.fetched_at,
            ingested_at: Utc::now(),
            page_count: parsed.pages.len(),
            chunk_count: chunks.len(),
        };
        Ok(PreparedDocument {
            meta,
            chunks,
            vectors,
        })
    }

    /// Adds a prepared document and refreshes every chunk's keywords.
    pub fn apply(&mut self, prepared: PreparedDocument) -> Result<DocumentMeta, StoreError> {
        if self.document(&prepared.meta.doc_id).is_some() {
            return Err(StoreError::DuplicateDocument(prepared.meta.doc_id.to_string()));
        }
        for (chunk, vector) in prepared.chunks.into_iter().zip(prepared.vectors) {
            self.index.upsert(IndexEntry {
                chunk_id: chunk.chunk_id.clone(),
                vector,
                keywords: BTreeSet::new(),
            })?;
            self.positions.insert(chunk.chunk_id.clone(), self.chunks.len());
            self.chunks.push(chunk);
        }
        self.documents.push(prepared.meta.clone());
        self.refresh_keywords();
        Ok(prepared.meta)
    }

    /// Removes a document's chunks; returns how many were removed.
    pub fn remove_document(&mut self, doc_id: &DocId) -> usize {
        let removed = self.index.remove_document(doc_id);
        let had_doc = self.documents.iter().any(|d| &d.doc_id == doc_id);
        if removed == 0 && !had_doc {
            return 0;
        }
        self.documents.retain(|d| &d.doc_id != doc_id);
        self.chunks.retain(|c| &c.doc_id != doc_id);
        self.positions = self
            .chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (c.chunk_id.clone(), i))
            .collect();
        self.refresh_keywords();
        removed
    }

    /// Recomputes keywords against the current course-wide statistics.
    fn refresh_keywords(&mut self) {
        let stats = CorpusStats::from_texts(self.chunks.iter().map(|c| c.text.as_str()));
        let k = self.config.keywords_per_chunk;
        for c in &mut self.chunks {
            c.keywords = extract_keywords(&c.text, &stats, k);
            self.index
                .set_keywords(&c.chunk_id, c.keywords.iter().cloned().collect());
        }
    }

    /// Hybrid top-k search for a free-text query using the course settings.
    pub fn retrieve(
        &self,
        query: &str,
        embedder: &dyn Embedder,
    ) -> Result<Vec<RetrievedChunk>, StoreError> {
        let vector = embedder.embed(query)?;
        let keywords: BTreeSet<String> = terms(query).into_iter().collect();
        Ok(self
            .index
            .search(&vector, &keywords, self.config.k, self.config.alpha)
            .into_iter()
            .map(|result| RetrievedChunk {
                chunk: self.chunk(&result.chunk_id).expect("indexed chunk").clone(),
                result,
            })
            .collect())
    }
}
