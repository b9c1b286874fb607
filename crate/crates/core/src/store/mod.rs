//! Per-course persistent knowledge bases.
//!
//! Each course lives in its own directory and never shares chunks, sessions
//! or configuration with another course. Every mutation is persisted before
//! it becomes visible: segments are written first, the manifest last.

mod kb;
pub mod layout;
mod lock;

pub use kb::{DocumentMeta, KnowledgeBase, PreparedDocument, RetrievedChunk};
pub use layout::Manifest;
pub use lock::{CourseLock, LOCK_FILE};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::chat::{ChatSession, Message, SessionId};
use crate::embed::{EmbedError, Embedder};
use crate::index::{IndexError, DEFAULT_ALPHA};
use crate::ingest::{ChunkPolicy, DocId, IngestError, RawDocument, DEFAULT_KEYWORDS_PER_CHUNK};
use layout::{
    decode_jsonl, decode_vectors, encode_chunks, encode_sessions, encode_vectors, read_segment,
    write_atomic, SegmentInfo, CHUNKS_FILE, MANIFEST_FILE, MANIFEST_FORMAT, MANIFEST_VERSION,
    SESSIONS_FILE, VECTORS_FILE,
};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown course {0}")]
    UnknownCourse(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("course name must not be empty")]
    InvalidName,
    #[error("invalid course configuration: {0}")]
    InvalidConfig(String),
    #[error("document {0} already exists in this course")]
    DuplicateDocument(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt course data in {path}: {detail}")]
    Corrupt { path: String, detail: String },
    #[error("checksum mismatch for {path}")]
    ChecksumMismatch { path: String },
    #[error("segment {path} listed in the manifest is missing")]
    MissingSegment { path: String },
    #[error("course {course_id} is locked by another writer (pid {holder}); remove {path} if that process is gone")]
    Locked {
        course_id: String,
        path: String,
        holder: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CourseId(String);

impl CourseId {
    pub fn generate() -> Self {
        CourseId(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn new(id: impl Into<String>) -> Self {
        CourseId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Usable as a single directory name.
    pub fn is_path_safe(&self) -> bool {
        !self.0.is_empty()
            && self.0.len() <= 64
            && self.0.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    }
}

impl fmt::Display for CourseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CourseConfig {
    pub chunk_policy: ChunkPolicy,
    /// Weight of the vector part in hybrid scoring.
    pub alpha: f64,
    /// Retrieval depth.
    pub k: usize,
    pub history_window: usize,
    /// Results scoring below this are discarded before prompting.
    pub score_threshold: f64,
    pub token_budget: usize,
    pub keywords_per_chunk: usize,
}

impl Default for CourseConfig {
    fn default() -> Self {
        CourseConfig {
            chunk_policy: ChunkPolicy::default(),
            alpha: DEFAULT_ALPHA,
            k: 4,
            history_window: 6,
            score_threshold: 0.15,
            token_budget: 3000,
            keywords_per_chunk: DEFAULT_KEYWORDS_PER_CHUNK,
        }
    }
}

impl CourseConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: String| Err(StoreError::InvalidConfig(m));
        self.chunk_policy
            .validate()
            .map_err(|e| StoreError::InvalidConfig(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(1..=100).contains(&self.k) {
            return bad(format!("k {} outside 1..=100", self.k));
        }
        if self.history_window > 100 {
            return bad(format!("history_window {} over 100", self.history_window));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return bad(format!("score_threshold {} outside [0, 1]", self.score_threshold));
        }
        if self.token_budget == 0 {
            return bad("token_budget must be positive".into());
        }
        if !(1..=64).contains(&self.keywords_per_chunk) {
            return bad(format!("keywords_per_chunk {} outside 1..=64", self.keywords_per_chunk));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseSummary {
    pub course_id: CourseId,
    pub name: String,
    pub created_at: DateTime<Utc>,
    pub document_count: usize,
    pub chunk_count: usize,
}

/// A course as read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedCourse {
    pub kb: KnowledgeBase,
    pub sessions: BTreeMap<SessionId, ChatSession>,
    pub manifest: Manifest,
}

struct CourseHandle {
    dir: PathBuf,
    kb: RwLock<KnowledgeBase>,
    sessions: RwLock<BTreeMap<SessionId, ChatSession>>,
    turn_locks: Mutex<HashMap<SessionId, Arc<Mutex<()>>>>,
    /// Held for the duration of every write; owns the lock file once taken.
    writer: Mutex<Option<CourseLock>>,
    manifest: Mutex<Option<Manifest>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl CourseHandle {
    fn new(dir: PathBuf, kb: KnowledgeBase, sessions: BTreeMap<SessionId, ChatSession>, manifest: Option<Manifest>) -> Self {
        CourseHandle {
            dir,
            kb: RwLock::new(kb),
            sessions: RwLock::new(sessions),
            turn_locks: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
            manifest: Mutex::new(manifest),
        }
    }

    fn read_kb(&self) -> std::sync::RwLockReadGuard<'_, KnowledgeBase> {
        self.kb.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write_kb(&self) -> std::sync::RwLockWriteGuard<'_, KnowledgeBase> {
        self.kb.write().unwrap_or_else(|e| e.into_inner())
    }

    fn read_sessions(&self) -> std::sync::RwLockReadGuard<'_, BTreeMap<SessionId, ChatSession>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write_sessions(&self) -> std::sync::RwLockWriteGuard<'_, BTreeMap<SessionId, ChatSession>> {
        self.sessions.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Serializes writers and takes the on-disk lock on first use.
    fn begin_write(&self, course_id: &CourseId) -> Result<MutexGuard<'_, Option<CourseLock>>, StoreError> {
        let mut guard = lock(&self.writer);
        if guard.is_none() {
            let taken = CourseLock::acquire(&self.dir, course_id.as_str())?;
            self.refresh_from_disk()?;
            *guard = Some(taken);
        }
        Ok(guard)
    }
}

impl CourseHandle {
    /// Picks up changes another process committed while it held the lock.
    fn refresh_from_disk(&self) -> Result<(), StoreError> {
        let path = self.dir.join(MANIFEST_FILE);
        let Ok(raw) = fs::read(&path) else {
            return Ok(());
        };
        let on_disk: Option<Manifest> = serde_json::from_slice(&raw).ok();
        if on_disk.is_none() || on_disk == *lock(&self.manifest) {
            return Ok(());
        }
        let loaded = load_course_dir(&self.dir)?;
        *self.write_kb() = loaded.kb;
        *self.write_sessions() = loaded.sessions;
        *lock(&self.manifest) = Some(loaded.manifest);
        Ok(())
    }
}

/// Writes every segment of `kb`/`sessions`, then the manifest.
fn write_course(
    dir: &Path,
    kb: &KnowledgeBase,
    sessions: &BTreeMap<SessionId, ChatSession>,
    previous: Option<&Manifest>,
    sessions_only: bool,
) -> Result<Manifest, StoreError> {
    let mut segments = BTreeMap::new();
    match previous {
        Some(prev) if sessions_only => {
            for name in [CHUNKS_FILE, VECTORS_FILE] {
                if let Some(info) = prev.segments.get(name) {
                    segments.insert(name.to_string(), info.clone());
                }
            }
        }
        _ => {
            let chunks = encode_chunks(kb.chunks());
            let vectors = encode_vectors(kb.dims(), &kb.vectors());
            write_atomic(&dir.join(CHUNKS_FILE), &chunks)?;
            write_atomic(&dir.join(VECTORS_FILE), &vectors)?;
            segments.insert(CHUNKS_FILE.to_string(), SegmentInfo::of(&chunks));
            segments.insert(VECTORS_FILE.to_string(), SegmentInfo::of(&vectors));
        }
    }
    let session_bytes = encode_sessions(sessions.values());
    write_atomic(&dir.join(SESSIONS_FILE), &session_bytes)?;
    segments.insert(SESSIONS_FILE.to_string(), SegmentInfo::of(&session_bytes));

    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        version: MANIFEST_VERSION,
        course_id: kb.course_id.clone(),
        name: kb.name.clone(),
        created_at: kb.created_at,
        config: kb.config,
        dims: kb.dims(),
        chunk_count: kb.chunk_count(),
        documents: kb.documents().to_vec(),
        segments,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(&dir.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

fn corrupt(path: &Path, detail: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Reads and verifies one course directory.
pub fn load_course_dir(dir: &Path) -> Result<LoadedCourse, StoreError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let raw = fs::read(&manifest_path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => StoreError::MissingSegment {
            path: manifest_path.display().to_string(),
        },
        _ => StoreError::Io {
            path: manifest_path.display().to_string(),
            source,
        },
    })?;
    let manifest: Manifest =
        serde_json::from_slice(&raw).map_err(|e| corrupt(&manifest_path, e.to_string()))?;
    if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
        return Err(corrupt(
            &manifest_path,
            format!("unsupported format {} v{}", manifest.format, manifest.version),
        ));
    }
    manifest.config.validate()?;

    let chunk_bytes = read_segment(dir, CHUNKS_FILE, &manifest)?;
    let vector_bytes = read_segment(dir, VECTORS_FILE, &manifest)?;
    let session_bytes = read_segment(dir, SESSIONS_FILE, &manifest)?;

    let chunks = decode_jsonl(&chunk_bytes).map_err(|e| corrupt(&dir.join(CHUNKS_FILE), e))?;
    let (dims, vectors) =
        decode_vectors(&vector_bytes).map_err(|e| corrupt(&dir.join(VECTORS_FILE), e))?;
    let sessions: Vec<ChatSession> =
        decode_jsonl(&session_bytes).map_err(|e| corrupt(&dir.join(SESSIONS_FILE), e))?;

    if dims != manifest.dims || vectors.len() != manifest.chunk_count || chunks.len() != manifest.chunk_count {
        return Err(corrupt(
            dir,
            format!(
                "manifest says {} chunks of dimension {}, found {} chunks and {} vectors of dimension {}",
                manifest.chunk_count,
                manifest.dims,
                chunks.len(),
                vectors.len(),
                dims
            ),
        ));
    }

    let kb = KnowledgeBase::from_parts(
        manifest.course_id.clone(),
        manifest.name.clone(),
        manifest.created_at,
        manifest.config,
        manifest.documents.clone(),
        chunks,
        vectors,
        dims,
    )?;
    let sessions = sessions
        .into_iter()
        .map(|s| (s.session_id.clone(), s))
        .collect();
    Ok(LoadedCourse {
        kb,
        sessions,
        manifest,
    })
}

/// All courses under one data directory.
pub struct Store {
    root: PathBuf,
    embedder: Arc<dyn Embedder>,
    courses: RwLock<BTreeMap<CourseId, Arc<CourseHandle>>>,
    session_index: RwLock<HashMap<SessionId, CourseId>>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) a data directory and loads every course in it.
    ///
    /// Courses that fail verification are skipped with a warning.
    pub fn open(root: impl Into<PathBuf>, embedder: Arc<dyn Embedder>) -> Result<Store, StoreError> {
        let root = root.into();
        let courses_dir = root.join("courses");
        fs::create_dir_all(&courses_dir).map_err(|source| StoreError::Io {
            path: courses_dir.display().to_string(),
            source,
        })?;
        let store = Store {
            root,
            embedder,
            courses: RwLock::new(BTreeMap::new()),
            session_index: RwLock::new(HashMap::new()),
        };
        let entries = fs::read_dir(&courses_dir).map_err(|source| StoreError::Io {
            path: courses_dir.display().to_string(),
            source,
        })?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            match load_course_dir(&dir) {
                Ok(loaded) if loaded.kb.dims() != store.embedder.dims() => warn!(
                    dir = %dir.display(),
                    stored = loaded.kb.dims(),
                    embedder = store.embedder.dims(),
                    "skipping course with mismatched embedding dimensions"
                ),
                Ok(loaded) => {
                    store.register(dir, loaded);
                }
                Err(e) => warn!(dir = %dir.display(), error = %e, "skipping unreadable course"),
            }
        }
        Ok(store)
    }

    /// Adds a loaded course unless one with the same id is already present.
    fn register(&self, dir: PathBuf, loaded: LoadedCourse) -> Arc<CourseHandle> {
        let id = loaded.kb.course_id.clone();
        let mut courses = self.courses.write().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = courses.get(&id) {
            return existing.clone();
        }
        {
            let mut index = self.session_index.write().unwrap_or_else(|e| e.into_inner());
            for sid in loaded.sessions.keys() {
                index.insert(sid.clone(), id.clone());
            }
        }
        let handle = Arc::new(CourseHandle::new(dir, loaded.kb, loaded.sessions, Some(loaded.manifest)));
        courses.insert(id, handle.clone());
        handle
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn course_dir(&self, id: &CourseId) -> PathBuf {
        self.root.join("courses").join(id.as_str())
    }

    fn handle(&self, id: &CourseId) -> Result<Arc<CourseHandle>, StoreError> {
        if let Some(h) = self.courses.read().unwrap_or_else(|e| e.into_inner()).get(id) {
            return Ok(h.clone());
        }
        // a course created by another process since `open`
        let unknown = || StoreError::UnknownCourse(id.to_string());
        if !id.is_path_safe() {
            return Err(unknown());
        }
        let dir = self.course_dir(id);
        if !dir.join(MANIFEST_FILE).is_file() {
            return Err(unknown());
        }
        let loaded = load_course_dir(&dir)?;
        if loaded.kb.course_id != *id {
            return Err(unknown());
        }
        Ok(self.register(dir, loaded))
    }

    pub fn course_count(&self) -> usize {
        self.courses.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn create_course(&self, name: &str) -> Result<CourseId, StoreError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(StoreError::InvalidName);
        }
        let id = CourseId::generate();
        let dir = self.course_dir(&id);
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let kb = KnowledgeBase::new(id.clone(), name.to_string(), self.embedder.dims());
        let handle = CourseHandle::new(dir.clone(), kb, BTreeMap::new(), None);
        {
            let _writer = handle.begin_write(&id)?;
            let manifest = write_course(&dir, &handle.read_kb(), &BTreeMap::new(), None, false)?;
            *lock(&handle.manifest) = Some(manifest);
        }
        self.courses
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), Arc::new(handle));
        Ok(id)
    }

    pub fn list_courses(&self) -> Vec<CourseSummary> {
        let courses = self.courses.read().unwrap_or_else(|e| e.into_inner());
        let mut out: Vec<CourseSummary> = courses
            .values()
            .map(|h| {
                let kb = h.read_kb();
                CourseSummary {
                    course_id: kb.course_id.clone(),
                    name: kb.name.clone(),
                    created_at: kb.created_at,
                    document_count: kb.documents().len(),
                    chunk_count: kb.chunk_count(),
                }
            })
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.course_id.cmp(&b.course_id)));
        out
    }

    /// Runs `f` against a read snapshot of the course.
    pub fn with_course<R>(&self, id: &CourseId, f: impl FnOnce(&KnowledgeBase) -> R) -> Result<R, StoreError> {
        let handle = self.handle(id)?;
        let kb = handle.read_kb();
        Ok(f(&kb))
    }

    pub fn config(&self, id: &CourseId) -> Result<CourseConfig, StoreError> {
        self.with_course(id, |kb| kb.config)
    }

    pub fn set_config(&self, id: &CourseId, config: CourseConfig) -> Result<(), StoreError> {
        config.validate()?;
        self.mutate(id, |kb| {
            kb.config = config;
            Ok(())
        })
    }

    /// Documents in ingestion order.
    pub fn list_documents(&self, id: &CourseId) -> Result<Vec<DocumentMeta>, StoreError> {
        self.with_course(id, |kb| kb.documents().to_vec())
    }

    /// Applies `f` to a copy of the course, persists the copy, then publishes it.
    fn mutate<R>(
        &self,
        id: &CourseId,
        f: impl FnOnce(&mut KnowledgeBase) -> Result<R, StoreError>,
    ) -> Result<R, StoreError> {
        let handle = self.handle(id)?;
        let _writer = handle.begin_write(id)?;
        let mut next = handle.read_kb().clone();
        let out = f(&mut next)?;
        let manifest = {
            let sessions = handle.read_sessions();
            write_course(&handle.dir, &next, &sessions, None, false)?
        };
        *handle.write_kb() = next;
        *lock(&handle.manifest) = Some(manifest);
        Ok(out)
    }

    /// Parses, chunks, embeds and indexes one document.
    pub fn ingest(&self, id: &CourseId, raw: &RawDocument) -> Result<DocumentMeta, StoreError> {
        let handle = self.handle(id)?;
        // Embedding happens outside the course write lock; writers are still
        // serialized by the writer guard taken in `mutate`.
        let prepared = handle.read_kb().prepare(raw, self.embedder.as_ref())?;
        drop(handle);
        self.mutate(id, |kb| {
            if kb.document(&prepared.meta().doc_id).is_some() {
                let again = kb.prepare(raw, self.embedder.as_ref())?;
                return kb.apply(again);
            }
            kb.apply(prepared)
        })
    }

    /// Removes a document; unknown ids remove nothing.
    pub fn remove_document(&self, id: &CourseId, doc_id: &DocId) -> Result<usize, StoreError> {
        let known = self.with_course(id, |kb| kb.document(doc_id).is_some())?;
        if !known {
            return Ok(0);
        }
        self.mutate(id, |kb| Ok(kb.remove_document(doc_id)))
    }

    /// Writes a full snapshot of the course.
    pub fn persist(&self, id: &CourseId) -> Result<Manifest, StoreError> {
        let handle = self.handle(id)?;
        let _writer = handle.begin_write(id)?;
        let kb = handle.read_kb();
        let sessions = handle.read_sessions();
        let manifest = write_course(&handle.dir, &kb, &sessions, None, false)?;
        *lock(&handle.manifest) = Some(manifest.clone());
        Ok(manifest)
    }

    /// Reads the course back from disk, independent of in-memory state.
    pub fn load(&self, id: &CourseId) -> Result<LoadedCourse, StoreError> {
        if !id.is_path_safe() {
            return Err(StoreError::UnknownCourse(id.to_string()));
        }
        let dir = self.course_dir(id);
        if !dir.join(MANIFEST_FILE).exists() {
            return Err(StoreError::UnknownCourse(id.to_string()));
        }
        load_course_dir(&dir)
    }

    /// Whether this store currently owns the course's writer lock.
    pub fn holds_writer_lock(&self, id: &CourseId) -> bool {
        self.handle(id)
            .map(|h| lock(&h.writer).is_some())
            .unwrap_or(false)
    }

    pub fn create_session(&self, id: &CourseId) -> Result<SessionId, StoreError> {
        let handle = self.handle(id)?;
        let session = ChatSession::new(id.clone());
        let sid = session.session_id.clone();
        self.write_sessions_with(&handle, id, |sessions| {
            sessions.insert(sid.clone(), session);
        })?;
        self.session_index
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(sid.clone(), id.clone());
        Ok(sid)
    }

    pub fn session_course(&self, sid: &SessionId) -> Result<CourseId, StoreError> {
        if let Some(id) = self.session_index.read().unwrap_or_else(|e| e.into_inner()).get(sid) {
            return Ok(id.clone());
        }
        // sessions picked up by a refresh are not indexed yet
        let courses = self.courses.read().unwrap_or_else(|e| e.into_inner());
        let found = courses
            .iter()
            .find(|(_, h)| h.read_sessions().contains_key(sid))
            .map(|(id, _)| id.clone())
            .ok_or_else(|| StoreError::UnknownSession(sid.to_string()))?;
        self.session_index
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(sid.clone(), found.clone());
        Ok(found)
    }

    pub fn session(&self, sid: &SessionId) -> Result<ChatSession, StoreError> {
        let course = self.session_course(sid)?;
        let handle = self.handle(&course)?;
        let sessions = handle.read_sessions();
        sessions
            .get(sid)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(sid.to_string()))
    }

    /// Sessions of one course, by id.
    pub fn sessions(&self, id: &CourseId) -> Result<Vec<ChatSession>, StoreError> {
        let handle = self.handle(id)?;
        let sessions = handle.read_sessions();
        Ok(sessions.values().cloned().collect())
    }

    /// Mutex serializing turns of one session.
    pub fn turn_lock(&self, sid: &SessionId) -> Result<Arc<Mutex<()>>, StoreError> {
        let course = self.session_course(sid)?;
        let handle = self.handle(&course)?;
        let mut locks = lock(&handle.turn_locks);
        Ok(locks.entry(sid.clone()).or_default().clone())
    }

    /// Appends a completed user/assistant exchange and persists it.
    pub fn commit_turn(&self, sid: &SessionId, user: Message, assistant: Message) -> Result<(), StoreError> {
        let course = self.session_course(sid)?;
        let handle = self.handle(&course)?;
        if !handle.read_sessions().contains_key(sid) {
            return Err(StoreError::UnknownSession(sid.to_string()));
        }
        self.write_sessions_with(&handle, &course, |sessions| {
            if let Some(s) = sessions.get_mut(sid) {
                s.messages.push(user);
                s.messages.push(assistant);
            }
        })
    }

    fn write_sessions_with(
        &self,
        handle: &CourseHandle,
        id: &CourseId,
        f: impl FnOnce(&mut BTreeMap<SessionId, ChatSession>),
    ) -> Result<(), StoreError> {
        let _writer = handle.begin_write(id)?;
        let mut next = handle.read_sessions().clone();
        f(&mut next);
        let previous = lock(&handle.manifest).clone();
        let manifest = {
            let kb = handle.read_kb();
            write_course(&handle.dir, &kb, &next, previous.as_ref(), previous.is_some())?
        };
        *handle.write_sessions() = next;
        *lock(&handle.manifest) = Some(manifest);
        Ok(())
    }
}
