//! On-disk segment formats for one course directory.
//!
//! ```text
//! courses/<id>/manifest.json   segment checksums, documents, config (written last)
//! courses/<id>/chunks.jsonl    one chunk per line
//! courses/<id>/vectors.bin     "CEDV" | u32 version=1 | u32 d | u64 count | count*d f32, all LE
//! courses/<id>/sessions.jsonl  one session per line
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CourseConfig, CourseId, DocumentMeta, StoreError};
use crate::chat::ChatSession;
use crate::embed::EmbeddingVector;
use crate::ingest::Chunk;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";
pub const SESSIONS_FILE: &str = "sessions.jsonl";

pub const VECTORS_MAGIC: &[u8; 4] = b"CEDV";
pub const VECTORS_VERSION: u32 = 1;
const VECTORS_HEADER_LEN: usize = 4 + 4 + 4 + 8;

pub const MANIFEST_FORMAT: &str = "chated-course";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub sha256: String,
    pub bytes: u64,
}

impl SegmentInfo {
    pub fn of(bytes: &[u8]) -> Self {
        SegmentInfo {
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub course_id: CourseId,
    pub name: String,
    pub created_at: chrono::DateTime<chrono::Utc>,
    pub config: CourseConfig,
    pub dims: usize,
    pub chunk_count: usize,
    pub documents: Vec<DocumentMeta>,
    pub segments: BTreeMap<String, SegmentInfo>,
}

pub fn encode_vectors(dims: usize, vectors: &[&EmbeddingVector]) -> Vec<u8> {
    let mut out = Vec::with_capacity(VECTORS_HEADER_LEN + vectors.len() * dims * 4);
    out.extend_from_slice(VECTORS_MAGIC);
    out.extend_from_slice(&VECTORS_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims as u32).to_le_bytes());
    out.extend_from_slice(&(vectors.len() as u64).to_le_bytes());
    for v in vectors {
        debug_assert_eq!(v.dims(), dims);
        for x in v.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_vectors(bytes: &[u8]) -> Result<(usize, Vec<EmbeddingVector>), String> {
    if bytes.len() < VECTORS_HEADER_LEN {
        return Err("vector file shorter than its header".into());
    }
    if &bytes[..4] != VECTORS_MAGIC {
        return Err("bad vector file magic".into());
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VECTORS_VERSION {
        return Err(format!("unsupported vector file version {version}"));
    }
    let dims = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let expected = count
        .checked_mul(dims)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(VECTORS_HEADER_LEN))
        .ok_or("vector file header overflows")?;
    if bytes.len() != expected {
        return Err(format!(
            "vector file is {} bytes, header implies {expected}",
            bytes.len()
        ));
    }
    let body = &bytes[VECTORS_HEADER_LEN..];
    let vectors = body
        .chunks_exact(dims.max(1) * 4)
        .take(count)
        .map(|row| {
            EmbeddingVector::from_stored(
                row.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                    .collect(),
            )
        })
        .collect();
    Ok((dims, vectors))
}

pub fn encode_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item).expect("serializable record");
        out.push(b'\n');
    }
    out
}

pub fn decode_jsonl<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn encode_chunks(chunks: &[Chunk]) -> Vec<u8> {
    encode_jsonl(chunks)
}

pub fn encode_sessions<'a>(sessions: impl IntoIterator<Item = &'a ChatSession>) -> Vec<u8> {
    encode_jsonl(sessions)
}

/// Writes `bytes` to a sibling temp file, syncs it, and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// Reads a segment and checks it against the manifest entry.
pub fn read_segment(dir: &Path, name: &str, manifest: &Manifest) -> Result<Vec<u8>, StoreError> {
    let info = manifest
        .segments
        .get(name)
        .ok_or_else(|| StoreError::Corrupt {
            path: dir.join(MANIFEST_FILE).display().to_string(),
            detail: format!("manifest does not list segment {name}"),
        })?;
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => StoreError::MissingSegment {
            path: path.display().to_string(),
        },
        _ => StoreError::Io {
            path: path.display().to_string(),
            source,
        },
    })?;
    if SegmentInfo::of(&bytes) != *info {
        return Err(StoreError::ChecksumMismatch {
            path: path.display().to_string(),
        });
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_file_layout() {
        let a = EmbeddingVector::from_stored(vec![1.0, 0.0]);
        let b = EmbeddingVector::from_stored(vec![-0.5, 0.25]);
        let bytes = encode_vectors(2, &[&a, &b]);
        assert_eq!(&bytes[..4], b"CEDV");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &2u64.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 2 * 2 * 4);
        let (dims, back) = decode_vectors(&bytes).unwrap();
        assert_eq!(dims, 2);
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn empty_vector_file() {
        let bytes = encode_vectors(256, &[]);
        assert_eq!(bytes.len(), 20);
        let (dims, back) = decode_vectors(&bytes).unwrap();
        assert_eq!(dims, 256);
        assert!(back.is_empty());
    }

    #[test]
    fn truncated_or_bad_vector_files() {
        let v = EmbeddingVector::from_stored(vec![1.0, 0.0]);
        let bytes = encode_vectors(2, &[&v]);
        assert!(decode_vectors(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_vectors(&bad).is_err());
        assert!(decode_vectors(b"CEDV").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
