//! Course-scoped retrieval-augmented chat.
//!
//! Instructor materials are parsed into pages, split into chunks, and indexed
//! per course with both a dense vector and a keyword set. A chat turn
//! condenses the question against the session history, retrieves the best
//! chunks, assembles a budgeted prompt, calls a language-model provider and
//! returns the answer with page-level citations.

pub mod chat;
pub mod embed;
pub mod eval;
pub mod index;
pub mod ingest;
pub mod llm;
pub mod retry;
pub mod store;
pub mod text;
