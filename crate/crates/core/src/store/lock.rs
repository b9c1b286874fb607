use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::StoreError;

pub const LOCK_FILE: &str = ".writer.lock";

/// Exclusive writer lock on one course directory, released on drop.
#[derive(Debug)]
pub struct CourseLock {
    path: PathBuf,
}

impl CourseLock {
    pub fn acquire(course_dir: &Path, course_id: &str) -> Result<CourseLock, StoreError> {
        let path = course_dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(CourseLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                Err(StoreError::Locked {
                    course_id: course_id.to_string(),
                    path: path.display().to_string(),
                    holder: holder.trim().to_string(),
                })
            }
            Err(source) => Err(StoreError::Io {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    pub fn is_held(course_dir: &Path) -> bool {
        course_dir.join(LOCK_FILE).exists()
    }
}

impl Drop for CourseLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
