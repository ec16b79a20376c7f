use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::notebook::ScannedFile;

pub const STATE_FILE: &str = "sync_state.json";
pub const LOCK_FILE: &str = "sync.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotebookState {
    /// FNV-1a 64 of the file bytes, as 16 hex digits.
    #[serde(with = "hex_u64")]
    pub content_hash: u64,
    pub modified_at: i64,
    pub chunk_count: usize,
}

/// What the last sync saw, keyed by notebook id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncState {
    pub notebooks: BTreeMap<String, NotebookState>,
    pub last_sync_at: i64,
}

impl SyncState {
    pub fn record(&mut self, file: &ScannedFile, chunk_count: usize) {
        self.notebooks.insert(
            file.path.clone(),
            NotebookState { content_hash: file.content_hash, modified_at: file.modified_at, chunk_count },
        );
    }

    /// Missing or unreadable state yields an empty state, which makes the
    /// next cycle re-index everything.
    pub fn load(dir: &Path) -> Result<Self, AppError> {
        let path = dir.join(STATE_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(serde_json::from_str(&text).unwrap_or_else(|e| {
                log::warn!("ignoring unreadable {}: {e}", path.display());
                Self::default()
            })),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(source) => Err(AppError::Io { path, source }),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), AppError> {
        let path = dir.join(STATE_FILE);
        let tmp = dir.join(format!("{STATE_FILE}.tmp"));
        let body = serde_json::to_string_pretty(self).expect("sync state serializes");
        fs::write(&tmp, body).and_then(|_| fs::rename(&tmp, &path)).map_err(|source| AppError::Io { path, source })
    }
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

/// Exclusive advisory lock on `<index_dir>/sync.lock`, released on drop or
/// when the process dies.
#[derive(Debug)]
pub struct IndexLock {
    _file: File,
}

impl IndexLock {
    pub fn acquire(dir: &Path) -> Result<Self, AppError> {
        let path = dir.join(LOCK_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|source| AppError::Io { path: path.clone(), source })?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file }),
            Err(TryLockError::WouldBlock) => Err(AppError::Locked(dir.to_path_buf())),
            Err(TryLockError::Error(source)) => Err(AppError::Io { path, source }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_roundtrip_uses_hex_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut st = SyncState::default();
        st.notebooks
            .insert("a.ipynb".into(), NotebookState { content_hash: u64::MAX - 1, modified_at: 5, chunk_count: 2 });
        st.save(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(STATE_FILE)).unwrap();
        assert!(text.contains("\"fffffffffffffffe\""));
        assert_eq!(SyncState::load(dir.path()).unwrap(), st);
    }

    #[test]
    fn missing_state_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(SyncState::load(dir.path()).unwrap(), SyncState::default());
    }

    #[test]
    fn second_lock_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let first = IndexLock::acquire(dir.path()).unwrap();
        assert!(matches!(IndexLock::acquire(dir.path()), Err(AppError::Locked(_))));
        drop(first);
        IndexLock::acquire(dir.path()).unwrap();
    }
}
