use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{BackendKind, CompletionRequest, LlmError};

/// One cached exchange, stored as `<root>/<digest[..2]>/<digest>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: CompletionRequest,
    pub content: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub backend: BackendKind,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, digest: &str) -> PathBuf {
        self.root.join(&digest[..2]).join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path_for(digest);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Cache(format!("{}: {e}", path.display()))),
        };
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))
    }

    /// Writes the entry via a temp file renamed into place.
    pub fn put(
        &self,
        digest: &str,
        request: &CompletionRequest,
        content: &str,
        backend: BackendKind,
    ) -> Result<(), LlmError> {
        let path = self.path_for(digest);
        let dir = path.parent().expect("cache path has a parent");
        let err = |e: std::io::Error| LlmError::Cache(format!("{}: {e}", path.display()));
        fs::create_dir_all(dir).map_err(err)?;
        let entry = CacheEntry {
            request: request.clone(),
            content: content.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or_default(),
            backend,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
        serde_json::to_writer_pretty(&mut tmp, &entry).map_err(|e| err(e.into()))?;
        tmp.write_all(b"\n").map_err(err)?;
        tmp.persist(&path).map_err(|e| err(e.error))?;
        Ok(())
    }

    /// All entries, sorted by file path.
    pub fn entries(&self) -> Result<Vec<CacheEntry>, LlmError> {
        let mut paths = Vec::new();
        let read = |p: &Path| fs::read_dir(p).map_err(|e| LlmError::Cache(format!("{}: {e}", p.display())));
        if !self.root.exists() {
            return Ok(Vec::new());
        }
        for shard in read(&self.root)? {
            let shard = shard.map_err(|e| LlmError::Cache(e.to_string()))?.path();
            if !shard.is_dir() {
                continue;
            }
            for file in read(&shard)? {
                let file = file.map_err(|e| LlmError::Cache(e.to_string()))?.path();
                if file.extension().is_some_and(|e| e == "json") {
                    paths.push(file);
                }
            }
        }
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let bytes = fs::read(&p).map_err(|e| LlmError::Cache(format!("{}: {e}", p.display())))?;
                serde_json::from_slice(&bytes).map_err(|e| LlmError::Cache(format!("{}: {e}", p.display())))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::LlmClient;
    use crate::prompt::ChatMessage;

    #[test]
    fn second_identical_request_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let client = LlmClient::mock().with_cache(cache.clone());
        let req = CompletionRequest::new("m", vec![ChatMessage::user("good food")]);
        let first = client.complete(&req).unwrap();
        let second = client.complete(&req).unwrap();
        assert_eq!(first.backend, BackendKind::Mock);
        assert_eq!(second.backend, BackendKind::Cache);
        assert_eq!(first.content, second.content);

        let digest = req.digest();
        let path = dir.path().join(&digest[..2]).join(format!("{digest}.json"));
        assert!(path.is_file());
        let entries = cache.entries().unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].request, req);
        assert_eq!(entries[0].backend, BackendKind::Mock);
    }

    #[test]
    fn missing_root_has_no_entries() {
        let cache = ResponseCache::new("/nonexistent/sentaug-cache");
        assert!(cache.entries().unwrap().is_empty());
        assert!(cache.get("abcdef").unwrap().is_none());
    }
}
