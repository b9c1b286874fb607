mod common;

use common::stub::{self, Reply as StubReply};
use common::{assert_error, assert_schema, fixture_documents, snapshot, TOKEN};
use serde_json::json;

use chated_core::chat::LIMITATION_NOTICE;
use chated_core::llm::MOCK_HEADER;

#[test]
fn health_counts_courses() {
    let s = common::spawn();
    let r = s.get("/healthz");
    assert_eq!(r.status, 200);
    assert_schema("health", &r.body);
    assert_eq!(r.body["status"], "ok");
    assert_eq!(r.body["courses"], 0);
    s.create_course("COSC 404");
    assert_eq!(s.get("/healthz").body["courses"], 1);
}

#[test]
fn course_creation_and_listing() {
    let s = common::spawn();
    let r = s.get("/courses");
    assert_eq!(r.status, 200);
    assert_eq!(r.body, json!([]));

    let r = s.post("/courses", json!({ "name": "COSC 404" }), Some(TOKEN));
    assert_eq!(r.status, 201);
    assert_schema("course", &r.body);
    let id = r.body["course_id"].as_str().unwrap().to_string();

    let list = s.get("/courses");
    assert_schema("course_list", &list.body);
    let ids: Vec<&str> = list.body.as_array().unwrap().iter().map(|c| c["course_id"].as_str().unwrap()).collect();
    assert_eq!(ids, vec![id.as_str()]);

    assert_error(&s.post("/courses", json!({ "name": "  " }), Some(TOKEN)), 400, "invalid_name");
    assert_error(&s.post("/courses", json!({ "name": "X" }), None), 401, "unauthorized");
    assert_error(&s.post("/courses", json!({ "name": "X" }), Some("wrong")), 401, "unauthorized");
    assert_error(
        &s.post("/courses", json!({ "name": "X", "config": { "k": 0 } }), Some(TOKEN)),
        400,
        "invalid_config",
    );
    assert_eq!(s.get("/courses").body.as_array().unwrap().len(), 1);
}

#[test]
fn instructor_routes_closed_without_configured_token() {
    let s = common::spawn_with_token(None);
    assert_error(&s.post("/courses", json!({ "name": "X" }), Some("anything")), 401, "unauthorized");
    assert_eq!(s.get("/healthz").status, 200);
}

#[test]
fn malformed_bodies_are_json_errors() {
    let s = common::spawn();
    let r = s.post_raw("/courses", "application/json", b"{not json", Some(TOKEN));
    assert_eq!(r.status, 400);
    assert_error(&r, 400, "invalid_request");
    let r = s.post("/courses", json!({ "title": "X" }), Some(TOKEN));
    assert_error(&r, 422, "invalid_request");
    assert_error(&s.get("/nowhere"), 404, "not_found");
}

#[test]
fn upload_and_list_documents() {
    let s = common::spawn();
    let id = s.create_course("Databases");
    let text = b"Serializability means the interleaved schedule is equivalent to some serial schedule.";
    let r = s.upload(&id, "notes.txt", "text/plain", text, Some(TOKEN));
    assert_eq!(r.status, 202, "{:?}", r.body);
    assert_schema("document_ingested", &r.body);
    assert!(r.body["chunk_count"].as_u64().unwrap() >= 1);
    assert_eq!(r.body["title"], "notes");

    let docs = s.get(&format!("/courses/{id}/documents"));
    assert_eq!(docs.status, 200);
    assert_schema("document_list", &docs.body);
    assert_eq!(docs.body[0]["doc_id"], r.body["doc_id"]);
    assert_eq!(docs.body[0]["origin"], json!({ "kind": "upload", "location": "notes.txt" }));
    assert_eq!(docs.body[0]["chunk_count"], r.body["chunk_count"]);

    let courses = s.get("/courses");
    assert_eq!(courses.body[0]["document_count"], 1);
}

#[test]
fn upload_errors() {
    let s = common::spawn();
    let id = s.create_course("Databases");
    assert_error(&s.upload(&id, "a.txt", "text/plain", b"hello there", None), 401, "unauthorized");
    assert_error(&s.upload(&id, "a.txt", "text/plain", b"hello there", Some("nope")), 401, "unauthorized");
    assert_error(
        &s.upload(&id, "slides.pptx", "application/vnd.ms-powerpoint", b"PK\x03\x04\x00\x00", Some(TOKEN)),
        415,
        "unsupported_media",
    );
    assert_error(
        &s.post_raw(&format!("/courses/{id}/documents"), "text/plain", b"raw", Some(TOKEN)),
        415,
        "unsupported_media",
    );
    assert_error(
        &s.upload(&id, "bad.pages.jsonl", "application/x-ndjson", b"{\"page\": 1}\nnot json\n", Some(TOKEN)),
        422,
        "invalid_document",
    );
    assert_error(&s.upload("missing-course", "a.txt", "text/plain", b"text words", Some(TOKEN)), 404, "unknown_course");
    assert_eq!(s.get(&format!("/courses/{id}/documents")).body, json!([]));
}

#[test]
fn url_ingestion() {
    let s = common::spawn();
    let id = s.create_course("Databases");
    let site = stub::serve(|_, req| match req.path.split('?').next().unwrap_or("") {
        "/notes.html" => StubReply::new(
            200,
            "text/html",
            "<html><head><title>Locking Notes</title></head><body><p>Two phase locking acquires then releases.</p></body></html>",
        ),
        _ => StubReply::new(404, "text/plain", "nope"),
    });
    let r = s.post(
        &format!("/courses/{id}/documents"),
        json!({ "url": format!("{}/notes.html", site.base) }),
        Some(TOKEN),
    );
    assert_eq!(r.status, 202, "{:?}", r.body);
    assert_eq!(r.body["title"], "notes");

    let r = s.post(
        &format!("/courses/{id}/documents"),
        json!({ "url": format!("{}/notes.html?v=2", site.base), "title": "Locking Notes" }),
        Some(TOKEN),
    );
    assert_eq!(r.status, 202, "{:?}", r.body);
    assert_eq!(r.body["title"], "Locking Notes");

    let r = s.post(
        &format!("/courses/{id}/documents"),
        json!({ "url": format!("{}/gone.html", site.base) }),
        Some(TOKEN),
    );
    assert_error(&r, 502, "fetch_failed");
    assert!(r.body["error"]["message"].as_str().unwrap().contains("404"));

    let r = s.post(&format!("/courses/{id}/documents"), json!({ "url": "ftp://example.org/x" }), Some(TOKEN));
    assert_error(&r, 415, "unsupported_media");

    let before = site.request_count();
    let r = s.post(
        "/courses/nope/documents",
        json!({ "url": format!("{}/notes.html", site.base) }),
        Some(TOKEN),
    );
    assert_error(&r, 404, "unknown_course");
    assert_eq!(site.request_count(), before);
    assert_eq!(s.get(&format!("/courses/{id}/documents")).body.as_array().unwrap().len(), 2);
}

#[test]
fn syllabus_question_is_cited() {
    let s = common::spawn();
    let id = s.fixture_course();
    let sid = s.session(&id);
    let r = s.ask(&sid, "When are the midterms?");
    assert_eq!(r.status, 200, "{:?}", r.body);
    assert_schema("message", &r.body);
    assert_eq!(r.body["role"], "assistant");
    assert!(r.body["text"].as_str().unwrap().starts_with(MOCK_HEADER));
    let citations = r.body["citations"].as_array().unwrap();
    assert!(!citations.is_empty());
    assert!(citations.iter().any(|c| c["source_title"] == "Syllabus"));

    let t = s.get(&format!("/sessions/{sid}/messages"));
    assert_eq!(t.status, 200);
    assert_schema("transcript", &t.body);
    let messages = t.body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 2);
    assert_eq!(messages[0]["text"], "When are the midterms?");
    assert_eq!(messages[1]["text"], r.body["text"]);
}

#[test]
fn session_errors() {
    let s = common::spawn();
    let id = s.create_course("Empty");
    assert_error(&s.ask("no-such-session", "hi"), 404, "unknown_session");
    assert_error(&s.get("/sessions/no-such-session/messages"), 404, "unknown_session");
    assert_error(&s.post("/courses/nope/sessions", json!({}), None), 404, "unknown_course");

    let sid = s.session(&id);
    assert_error(&s.ask(&sid, "   "), 400, "empty_question");
    let long = "word ".repeat(4000);
    assert_error(&s.ask(&sid, &long), 400, "question_too_long");

    let r = s.ask(&sid, "What is serializability?");
    assert_eq!(r.status, 200);
    assert_eq!(r.body["text"], LIMITATION_NOTICE);
    assert_eq!(r.body["citations"], json!([]));
    assert_eq!(s.mock.total_calls(), 0);
}

#[test]
fn provider_failure_leaves_transcript_unchanged() {
    let s = common::spawn();
    let id = s.fixture_course();
    let sid = s.session(&id);
    assert_eq!(s.ask(&sid, "What is a transaction?").status, 200);
    let before = s.get(&format!("/sessions/{sid}/messages"));
    let disk_before = snapshot(s.dir.path());

    s.mock.set_failing(true);
    let r = s.ask(&sid, "What is two phase locking?");
    assert_error(&r, 503, "provider_unavailable");
    assert_eq!(s.get(&format!("/sessions/{sid}/messages")).body, before.body);
    assert_eq!(snapshot(s.dir.path()), disk_before);

    s.mock.set_failing(false);
    assert_eq!(s.ask(&sid, "What is two phase locking?").status, 200);
    let after = s.get(&format!("/sessions/{sid}/messages"));
    assert_eq!(after.body["messages"].as_array().unwrap().len(), 4);
}

#[test]
fn reads_do_not_mutate() {
    let s = common::spawn();
    let id = s.fixture_course();
    let sid = s.session(&id);
    assert_eq!(s.ask(&sid, "When are the midterms?").status, 200);
    let before = snapshot(s.dir.path());
    for path in [
        "/healthz".to_string(),
        "/courses".to_string(),
        format!("/courses/{id}/documents"),
        format!("/sessions/{sid}/messages"),
        "/courses/unknown/documents".to_string(),
        "/sessions/unknown/messages".to_string(),
        "/courses/..%2F..%2Fetc/documents".to_string(),
    ] {
        let _ = s.get(&path);
        let _ = s.get(&path);
    }
    assert_eq!(snapshot(s.dir.path()), before);
}

#[test]
fn health_answers_while_another_writer_holds_the_lock() {
    let dir = tempfile::tempdir().unwrap();
    let other = common::open_store(dir.path());
    let locked = other.create_course("Held Elsewhere").unwrap();
    assert!(other.holds_writer_lock(&locked));

    let store = common::open_store(dir.path());
    let s = common::spawn_on(dir, store, Some(TOKEN));
    let r = s.get("/healthz");
    assert_eq!(r.status, 200);
    assert_eq!(r.body["courses"], 1);
    assert_eq!(s.get(&format!("/courses/{locked}/documents")).status, 200);

    let r = s.upload(locked.as_str(), "a.txt", "text/plain", b"locking protocol words", Some(TOKEN));
    assert_error(&r, 409, "course_locked");
    drop(other);
    let r = s.upload(locked.as_str(), "a.txt", "text/plain", b"locking protocol words", Some(TOKEN));
    assert_eq!(r.status, 202, "{:?}", r.body);
}

#[test]
fn deleted_document_is_never_cited() {
    let s = common::spawn();
    let id = s.fixture_course();
    let docs = s.get(&format!("/courses/{id}/documents"));
    let syllabus = docs.body.as_array().unwrap().iter().find(|d| d["title"] == "Syllabus").unwrap().clone();
    let doc_id = syllabus["doc_id"].as_str().unwrap().to_string();

    let sid = s.session(&id);
    let r = s.ask(&sid, "When are the midterms?");
    assert!(r.body["citations"].as_array().unwrap().iter().any(|c| c["source_title"] == "Syllabus"));

    assert_error(&s.delete(&format!("/courses/{id}/documents/{doc_id}"), None), 401, "unauthorized");
    let r = s.delete(&format!("/courses/{id}/documents/{doc_id}"), Some(TOKEN));
    assert_eq!(r.status, 200, "{:?}", r.body);
    assert_schema("document_removed", &r.body);
    assert_eq!(r.body["removed_chunks"], syllabus["chunk_count"]);
    assert_error(&s.delete(&format!("/courses/{id}/documents/{doc_id}"), Some(TOKEN)), 404, "unknown_document");

    let remaining = s.get(&format!("/courses/{id}/documents"));
    assert_eq!(remaining.body.as_array().unwrap().len(), 2);
    for q in [
        "When are the midterms?",
        "What is the syllabus grading scheme?",
        "When is the final exam?",
        "What is a transaction?",
    ] {
        let sid = s.session(&id);
        let r = s.ask(&sid, q);
        assert_eq!(r.status, 200);
        for c in r.body["citations"].as_array().unwrap() {
            assert_ne!(c["source_title"], "Syllabus", "{q}");
        }
        for cid in r.body["retrieved_chunk_ids"].as_array().unwrap() {
            assert!(!cid.as_str().unwrap().starts_with(&format!("{doc_id}:")), "{q}");
        }
    }
}

#[test]
fn cors_preflight_is_answered() {
    let s = common::spawn();
    let r = ureq::request("OPTIONS", &s.url("/courses"))
        .set("Origin", "http://localhost:5173")
        .set("Access-Control-Request-Method", "POST")
        .set("Access-Control-Request-Headers", "authorization,content-type")
        .call()
        .unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(r.header("access-control-allow-origin"), Some("*"));
}

#[test]
fn fixture_documents_list_page_counts() {
    let s = common::spawn();
    let id = s.fixture_course();
    let docs = s.get(&format!("/courses/{id}/documents"));
    let pages: Vec<(String, u64)> = docs
        .body
        .as_array()
        .unwrap()
        .iter()
        .map(|d| (d["title"].as_str().unwrap().to_string(), d["page_count"].as_u64().unwrap()))
        .collect();
    assert_eq!(
        pages,
        vec![
            ("COSC 404 - Transactions".to_string(), 8),
            ("COSC 404 Indexing".to_string(), 7),
            ("Syllabus".to_string(), 6),
        ]
    );
    assert_eq!(fixture_documents().len(), 3);
}
