//! Content-addressed disk cache for ingested ASTs.
//!
//! Entries are keyed strictly by the source content hash, so a cache hit is
//! guaranteed to return a byte-identical tree serialization for identical
//! source text. Eviction is LRU above a configurable entry cap. Corrupt
//! entries are treated as misses and dropped.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use upgradescan_core::ast::Ast;

#[derive(Debug, Clone)]
pub struct CacheConfig {
    pub dir: PathBuf,
    pub max_entries: usize,
}

impl CacheConfig {
    pub fn new(dir: impl Into<PathBuf>) -> CacheConfig {
        CacheConfig { dir: dir.into(), max_entries: 1024 }
    }

    pub fn with_max_entries(mut self, max_entries: usize) -> CacheConfig {
        self.max_entries = max_entries.max(1);
        self
    }
}

/// On-disk entry wrapper.
#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    created_at: u64,
    hits: u64,
    ast: Ast,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

struct Inner {
    /// LRU order, least recently used first.
    order: Vec<String>,
    hits: u64,
    misses: u64,
}

pub struct AstCache {
    config: CacheConfig,
    inner: Mutex<Inner>,
}

impl AstCache {
    /// Open (or create) a cache directory, restoring LRU order from entry
    /// modification times.
    pub fn open(config: CacheConfig) -> io::Result<AstCache> {
        fs::create_dir_all(&config.dir)?;
        let mut existing: Vec<(std::time::SystemTime, String)> = Vec::new();
        for entry in fs::read_dir(&config.dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let mtime =
                entry.metadata().and_then(|m| m.modified()).unwrap_or(std::time::UNIX_EPOCH);
            existing.push((mtime, stem.to_string()));
        }
        existing.sort();
        Ok(AstCache {
            config,
            inner: Mutex::new(Inner {
                order: existing.into_iter().map(|(_, k)| k).collect(),
                hits: 0,
                misses: 0,
            }),
        })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.config.dir.join(format!("{key}.json"))
    }

    /// Look up by source hash. Corrupt entries are removed and reported as
    /// misses.
    pub fn get(&self, source_hash: &str) -> Option<Ast> {
        let path = self.entry_path(source_hash);
        let mut inner = self.inner.lock().unwrap();
        let loaded: Option<CacheEntry> = fs::read_to_string(&path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok());
        match loaded {
            Some(mut entry) if entry.key == source_hash => {
                inner.hits += 1;
                touch(&mut inner.order, source_hash);
                entry.hits += 1;
                let _ = write_entry(&path, &entry);
                Some(entry.ast)
            }
            _ => {
                inner.misses += 1;
                if path.exists() {
                    // corrupt or mismatched entry: drop it
                    let _ = fs::remove_file(&path);
                    inner.order.retain(|k| k != source_hash);
                }
                None
            }
        }
    }

    /// Store an AST under its own source hash, evicting the least recently
    /// used entries above the cap.
    pub fn put(&self, ast: &Ast) -> io::Result<()> {
        let key = ast.source_hash.clone();
        let entry = CacheEntry {
            key: key.clone(),
            created_at: crate::report::now_epoch_seconds(),
            hits: 0,
            ast: ast.clone(),
        };
        let mut inner = self.inner.lock().unwrap();
        write_entry(&self.entry_path(&key), &entry)?;
        touch(&mut inner.order, &key);
        while inner.order.len() > self.config.max_entries {
            let evicted = inner.order.remove(0);
            let _ = fs::remove_file(self.entry_path(&evicted));
        }
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.inner.lock().unwrap();
        CacheStats { hits: inner.hits, misses: inner.misses, entries: inner.order.len() }
    }
}

fn touch(order: &mut Vec<String>, key: &str) {
    order.retain(|k| k != key);
    order.push(key.to_string());
}

fn write_entry(path: &Path, entry: &CacheEntry) -> io::Result<()> {
    fs::write(path, serde_json::to_string(entry)?)
}
