//! Persistent content-addressed embedding cache.
//!
//! Entries are appended as JSON lines to a single file. Keys are the SHA-256
//! of `backend_id ‖ 0x00 ‖ text`. Unreadable lines are dropped on open and
//! the file is rewritten without them.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EmbedError;

pub fn cache_key(backend_id: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(backend_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub backend_id: String,
    pub values: Vec<f64>,
    pub created_at: String,
}

pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl EmbeddingCache {
    /// In-memory cache, nothing persisted.
    pub fn in_memory() -> Self {
        Self { path: None, entries: RwLock::new(HashMap::new()), writer: Mutex::new(None) }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| EmbedError::Cache(e.to_string()))?;
        }
        let mut entries = HashMap::new();
        let mut corrupt = 0usize;
        if path.exists() {
            let file = File::open(&path).map_err(|e| EmbedError::Cache(e.to_string()))?;
            for line in BufReader::new(file).split(b'\n') {
                let Ok(line) = line else {
                    corrupt += 1;
                    break;
                };
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                match serde_json::from_slice::<CacheEntry>(&line) {
                    Ok(e) if valid_entry(&e) => {
                        entries.insert(e.key.clone(), e);
                    }
                    _ => corrupt += 1,
                }
            }
        }
        if corrupt > 0 {
            log::warn!("embedding cache {}: dropped {corrupt} unreadable entries, rebuilding", path.display());
            rewrite(&path, entries.values()).map_err(|e| EmbedError::Cache(e.to_string()))?;
        }
        let file =
            OpenOptions::new().create(true).append(true).open(&path).map_err(|e| EmbedError::Cache(e.to_string()))?;
        Ok(Self { path: Some(path), entries: RwLock::new(entries), writer: Mutex::new(Some(BufWriter::new(file))) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, backend_id: &str, text: &str) -> Option<Vec<f64>> {
        let key = cache_key(backend_id, text);
        self.entries.read().get(&key).filter(|e| e.backend_id == backend_id).map(|e| e.values.clone())
    }

    /// Inserts a batch and appends it to disk. Existing keys are left alone.
    pub fn put_many(&self, backend_id: &str, items: &[(&str, &[f64])]) -> Result<(), EmbedError> {
        let created_at = chrono::Utc::now().to_rfc3339();
        let mut fresh = Vec::new();
        {
            let mut entries = self.entries.write();
            for (text, values) in items {
                let key = cache_key(backend_id, text);
                if entries.contains_key(&key) {
                    continue;
                }
                let entry = CacheEntry {
                    key: key.clone(),
                    backend_id: backend_id.to_string(),
                    values: values.to_vec(),
                    created_at: created_at.clone(),
                };
                entries.insert(key, entry.clone());
                fresh.push(entry);
            }
        }
        let mut writer = self.writer.lock();
        if let Some(w) = writer.as_mut() {
            let io = |e: std::io::Error| EmbedError::Cache(e.to_string());
            for entry in &fresh {
                serde_json::to_writer(&mut *w, entry).map_err(|e| EmbedError::Cache(e.to_string()))?;
                w.write_all(b"\n").map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        Ok(())
    }
}

fn valid_entry(e: &CacheEntry) -> bool {
    !e.values.is_empty() && e.values.iter().all(|v| v.is_finite()) && e.key.len() == 64
}

fn rewrite<'a>(path: &Path, entries: impl Iterator<Item = &'a CacheEntry>) -> std::io::Result<()> {
    let tmp = path.with_extension("rebuild");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        let mut sorted: Vec<_> = entries.collect();
        sorted.sort_by(|a, b| a.key.cmp(&b.key));
        for e in sorted {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    std::fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_separates_backends() {
        assert_ne!(cache_key("a", "bc"), cache_key("ab", "c"));
        assert_eq!(cache_key("x", "y").len(), 64);
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let v = vec![0.1, -0.2, 1.0 / 3.0];
        {
            let cache = EmbeddingCache::open(&path).unwrap();
            cache.put_many("b", &[("hello", &v)]).unwrap();
        }
        let cache = EmbeddingCache::open(&path).unwrap();
        assert_eq!(cache.get("b", "hello"), Some(v));
        assert_eq!(cache.get("other", "hello"), None);
    }

    #[test]
    fn corrupt_lines_are_dropped_and_file_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = EmbeddingCache::open(&path).unwrap();
            cache.put_many("b", &[("one", &[1.0, 0.0]), ("two", &[0.0, 1.0])]).unwrap();
        }
        let mut raw = std::fs::read(&path).unwrap();
        raw.extend_from_slice(b"{\"key\": \"trunc\n\xff\xfe garbage\n");
        std::fs::write(&path, raw).unwrap();

        let cache = EmbeddingCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        cache.put_many("b", &[("three", &[0.5, 0.5])]).unwrap();
        drop(cache);
        assert_eq!(EmbeddingCache::open(&path).unwrap().len(), 3);
    }
}
