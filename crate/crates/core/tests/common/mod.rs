#![allow(dead_code)]

pub mod stub;

use std::path::PathBuf;
use std::sync::Arc;

use chated_core::chat::ChatEngine;
use chated_core::embed::{Embedder, HashingEmbedder, DEFAULT_DIMS};
use chated_core::ingest::{acquire_file, AcquireOptions};
use chated_core::llm::MockProvider;
use chated_core::store::{CourseId, Store};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_documents() -> Vec<PathBuf> {
    let dir = fixtures_dir().join("course");
    vec![
        dir.join("COSC 404 - Transactions.pages.jsonl"),
        dir.join("COSC 404 Indexing.pages.jsonl"),
        dir.join("Syllabus.pages.jsonl"),
    ]
}

pub fn embedder() -> Arc<dyn Embedder> {
    Arc::new(HashingEmbedder::new(DEFAULT_DIMS))
}

pub fn open_store(root: &std::path::Path) -> Arc<Store> {
    Arc::new(Store::open(root, embedder()).unwrap())
}

pub fn fixture_course(store: &Store) -> CourseId {
    let id = store.create_course("COSC 404").unwrap();
    for path in fixture_documents() {
        let raw = acquire_file(&path, &AcquireOptions::default()).unwrap();
        store.ingest(&id, &raw).unwrap();
    }
    id
}

pub struct Harness {
    pub dir: tempfile::TempDir,
    pub store: Arc<Store>,
    pub mock: Arc<MockProvider>,
    pub engine: ChatEngine,
}

pub fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let store = open_store(dir.path());
    let mock = Arc::new(MockProvider::new());
    let engine = ChatEngine::new(store.clone(), mock.clone());
    Harness {
        dir,
        store,
        mock,
        engine,
    }
}
