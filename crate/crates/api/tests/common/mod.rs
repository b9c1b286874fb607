#![allow(dead_code)]

pub mod stub;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;
use sha2::{Digest, Sha256};

use chated_api::{router, serve_on, AppState};
use chated_core::chat::ChatEngine;
use chated_core::embed::{HashingEmbedder, DEFAULT_DIMS};
use chated_core::llm::MockProvider;
use chated_core::store::Store;

pub const TOKEN: &str = "instructor-test-token";

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

pub fn open_store(root: &Path) -> Arc<Store> {
    Arc::new(Store::open(root, Arc::new(HashingEmbedder::new(DEFAULT_DIMS))).unwrap())
}

pub struct Server {
    pub base: String,
    pub dir: tempfile::TempDir,
    pub store: Arc<Store>,
    pub mock: Arc<MockProvider>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn() -> Server {
    spawn_with_token(Some(TOKEN))
}

pub fn spawn_with_token(token: Option<&str>) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let store = open_store(dir.path());
    spawn_on(dir, store, token)
}

pub fn spawn_on(dir: tempfile::TempDir, store: Arc<Store>, token: Option<&str>) -> Server {
    let mock = Arc::new(MockProvider::new());
    let engine = Arc::new(ChatEngine::new(store.clone(), mock.clone()));
    let state = AppState::new(engine, token.map(str::to_string));
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            serve_on(listener, router(state, None), async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
    });
    Server {
        base,
        dir,
        store,
        mock,
        shutdown: Some(tx),
        thread: Some(thread),
    }
}

#[derive(Debug)]
pub struct Reply {
    pub status: u16,
    pub headers: BTreeMap<String, String>,
    pub body: Value,
}

fn finish(result: Result<ureq::Response, ureq::Error>) -> Reply {
    let resp = match result {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("transport error: {e}"),
    };
    let status = resp.status();
    let headers = resp
        .headers_names()
        .into_iter()
        .filter_map(|h| resp.header(&h).map(|v| (h.to_ascii_lowercase(), v.to_string())))
        .collect();
    let mut text = String::new();
    resp.into_reader().read_to_string(&mut text).unwrap();
    let body = if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    };
    Reply {
        status,
        headers,
        body,
    }
}

fn with_token(req: ureq::Request, token: Option<&str>) -> ureq::Request {
    match token {
        Some(t) => req.set("Authorization", &format!("Bearer {t}")),
        None => req,
    }
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, path: &str) -> Reply {
        finish(ureq::get(&self.url(path)).call())
    }

    pub fn post(&self, path: &str, body: Value, token: Option<&str>) -> Reply {
        finish(with_token(ureq::post(&self.url(path)), token).send_json(body))
    }

    pub fn post_raw(&self, path: &str, content_type: &str, body: &[u8], token: Option<&str>) -> Reply {
        finish(
            with_token(ureq::post(&self.url(path)), token)
                .set("Content-Type", content_type)
                .send_bytes(body),
        )
    }

    pub fn delete(&self, path: &str, token: Option<&str>) -> Reply {
        finish(with_token(ureq::delete(&self.url(path)), token).call())
    }

    pub fn upload(&self, course: &str, file_name: &str, content_type: &str, bytes: &[u8], token: Option<&str>) -> Reply {
        let boundary = "chated-test-boundary-7d1f";
        let mut body = Vec::new();
        body.extend_from_slice(
            format!(
                "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{file_name}\"\r\nContent-Type: {content_type}\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        self.post_raw(
            &format!("/courses/{course}/documents"),
            &format!("multipart/form-data; boundary={boundary}"),
            &body,
            token,
        )
    }

    pub fn upload_file(&self, course: &str, path: &Path) -> Reply {
        let bytes = std::fs::read(path).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap();
        self.upload(course, name, "application/octet-stream", &bytes, Some(TOKEN))
    }

    pub fn create_course(&self, name: &str) -> String {
        let r = self.post("/courses", serde_json::json!({ "name": name }), Some(TOKEN));
        assert_eq!(r.status, 201, "{:?}", r.body);
        r.body["course_id"].as_str().unwrap().to_string()
    }

    /// Creates a course holding the three fixture documents.
    pub fn fixture_course(&self) -> String {
        let id = self.create_course("COSC 404");
        for path in fixture_documents() {
            let r = self.upload_file(&id, &path);
            assert_eq!(r.status, 202, "{:?}", r.body);
        }
        id
    }

    pub fn session(&self, course: &str) -> String {
        let r = self.post(&format!("/courses/{course}/sessions"), serde_json::json!({}), None);
        assert_eq!(r.status, 201, "{:?}", r.body);
        r.body["session_id"].as_str().unwrap().to_string()
    }

    pub fn ask(&self, session: &str, text: &str) -> Reply {
        self.post(
            &format!("/sessions/{session}/messages"),
            serde_json::json!({ "text": text }),
            None,
        )
    }
}

pub fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    jsonschema::JSONSchema::compile(&value).unwrap()
}

pub fn assert_schema(name: &str, value: &Value) {
    let compiled = schema(name);
    let msgs: Vec<String> = match compiled.validate(value) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{name} schema violations: {msgs:?}\nvalue: {value}");
}

pub fn assert_error(reply: &Reply, status: u16, code: &str) {
    assert_eq!(reply.status, status, "{:?}", reply.body);
    assert_schema("error", &reply.body);
    assert_eq!(reply.body["error"]["code"], code, "{:?}", reply.body);
}

/// Hash over every file path and its bytes beneath `root`.
pub fn snapshot(root: &Path) -> String {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.push(p);
            }
        }
    }
    let mut files = Vec::new();
    walk(root, &mut files);
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(std::fs::read(&f).unwrap());
        h.update([0]);
    }
    hex::encode(h.finalize())
}
