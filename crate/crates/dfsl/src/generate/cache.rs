//! Generation cache: in-memory plus an optional content-addressed disk
//! directory of JSON records. Keyed by (backend id, prompt fingerprint,
//! hypothesis count, max tokens), so repeated identical requests never
//! reach the backend.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationClient, GenerationError, GenerationOutput, GenerationRequest};

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    backend_id: String,
    prompt_fingerprint: String,
    num_hypotheses: usize,
    max_tokens: usize,
    output: GenerationOutput,
}

pub struct CachedClient<C> {
    inner: C,
    memory: Mutex<HashMap<String, GenerationOutput>>,
    disk_dir: Option<PathBuf>,
}

impl<C: GenerationClient> CachedClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            memory: Mutex::new(HashMap::new()),
            disk_dir: None,
        }
    }

    pub fn with_disk(inner: C, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            inner,
            memory: Mutex::new(HashMap::new()),
            disk_dir: Some(dir),
        })
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    fn cache_key(&self, request: &GenerationRequest) -> String {
        let material = format!(
            "{}|{}|{}|{}",
            self.inner.id(),
            request.prompt.fingerprint,
            request.num_hypotheses,
            request.max_tokens
        );
        let digest = Sha256::digest(material.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn disk_path(&self, key: &str) -> Option<PathBuf> {
        self.disk_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn load_from_disk(&self, key: &str) -> Option<GenerationOutput> {
        let path = self.disk_path(key)?;
        let file = std::fs::File::open(path).ok()?;
        let record: CacheRecord = serde_json::from_reader(std::io::BufReader::new(file)).ok()?;
        Some(record.output)
    }

    fn store_to_disk(&self, key: &str, request: &GenerationRequest, output: &GenerationOutput) {
        let Some(path) = self.disk_path(key) else {
            return;
        };
        let record = CacheRecord {
            backend_id: self.inner.id(),
            prompt_fingerprint: request.prompt.fingerprint.clone(),
            num_hypotheses: request.num_hypotheses,
            max_tokens: request.max_tokens,
            output: output.clone(),
        };
        if let Ok(json) = serde_json::to_vec_pretty(&record) {
            let _ = std::fs::write(path, json);
        }
    }
}

impl<C: GenerationClient> GenerationClient for CachedClient<C> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError> {
        request.validate()?;
        let key = self.cache_key(request);
        if let Some(hit) = self.memory.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        if let Some(hit) = self.load_from_disk(&key) {
            self.memory.lock().unwrap().insert(key, hit.clone());
            return Ok(hit);
        }
        let output = self.inner.generate(request)?;
        self.store_to_disk(&key, request, &output);
        // identical keys produce identical values, so last-writer-wins
        // under concurrency is harmless
        self.memory.lock().unwrap().insert(key, output.clone());
        Ok(output)
    }
}

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub file: PathBuf,
    pub backend_id: String,
    pub prompt_fingerprint: String,
    pub num_hypotheses: usize,
    pub size_bytes: u64,
}

/// Lists the records in a disk cache directory.
pub fn cache_entries(dir: &Path) -> std::io::Result<Vec<CacheEntry>> {
    let mut entries = Vec::new();
    if !dir.exists() {
        return Ok(entries);
    }
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let size_bytes = entry.metadata()?.len();
        let Ok(file) = std::fs::File::open(&path) else {
            continue;
        };
        let Ok(record) = serde_json::from_reader::<_, CacheRecord>(std::io::BufReader::new(file))
        else {
            continue;
        };
        entries.push(CacheEntry {
            file: path,
            backend_id: record.backend_id,
            prompt_fingerprint: record.prompt_fingerprint,
            num_hypotheses: record.num_hypotheses,
            size_bytes,
        });
    }
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    Ok(entries)
}

/// Deletes every record; returns how many were removed.
pub fn clear_cache(dir: &Path) -> std::io::Result<usize> {
    let mut removed = 0;
    if !dir.exists() {
        return Ok(0);
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            std::fs::remove_file(path)?;
            removed += 1;
        }
    }
    Ok(removed)
}
