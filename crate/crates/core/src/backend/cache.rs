use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BackendRequest;

/// SHA-256 over the canonical JSON of `(role, prompt, params, image)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn of(request: &BackendRequest) -> Self {
        let canonical = serde_json::to_vec(request).expect("request serializes");
        CacheKey(hex::encode(Sha256::digest(&canonical)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    request: BackendRequest,
    completion: String,
}

/// Content-addressed directory of responses, one JSON file per key.
///
/// Writes go to a temporary file in the same directory and are renamed into
/// place, so readers never observe partial entries.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.0[..2]).join(format!("{}.json", key.0))
    }

    /// Stored completion, if any. Unreadable entries count as misses.
    pub fn get(&self, key: &CacheKey) -> Option<String> {
        let bytes = fs::read(self.path(key)).ok()?;
        serde_json::from_slice::<Entry>(&bytes).ok().map(|e| e.completion)
    }

    pub fn put(&self, key: &CacheKey, request: &BackendRequest, completion: &str) -> std::io::Result<()> {
        let path = self.path(key);
        let parent = path.parent().expect("entry has a shard directory");
        fs::create_dir_all(parent)?;
        let entry = Entry { request: request.clone(), completion: completion.to_string() };
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(&serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|shards| {
                shards
                    .filter_map(Result::ok)
                    .filter_map(|s| fs::read_dir(s.path()).ok())
                    .flat_map(|files| files.filter_map(Result::ok))
                    .filter(|f| f.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
