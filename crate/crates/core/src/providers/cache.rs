//! Content-addressed response cache: one JSON file per request digest.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ProviderError, ProviderRequest, RequestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    /// Never read or write.
    Off,
    /// Serve hits from disk, record misses after a live call.
    #[default]
    Record,
    /// Serve hits only; a miss is an error and no network call is made.
    Replay,
}

impl std::str::FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(CacheMode::Off),
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            other => Err(format!("unknown cache mode {other:?} (expected off, record or replay)")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    request: CachedRequest,
    response: String,
    timestamp: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedRequest {
    kind: RequestKind,
    endpoint: String,
    payload: serde_json::Value,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    mode: CacheMode,
    touched: Mutex<BTreeSet<String>>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>, mode: CacheMode) -> Result<Self, ProviderError> {
        let dir = dir.into();
        if mode != CacheMode::Off {
            fs::create_dir_all(&dir)?;
        }
        Ok(ResponseCache {
            dir,
            mode,
            touched: Mutex::new(BTreeSet::new()),
        })
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    /// Looks up a cached response body. In replay mode a miss is an error.
    pub fn lookup(&self, req: &ProviderRequest) -> Result<Option<String>, ProviderError> {
        if self.mode == CacheMode::Off {
            return Ok(None);
        }
        let path = self.path_for(&req.digest);
        match fs::read(&path) {
            Ok(bytes) => {
                let entry: CacheEntry = serde_json::from_slice(&bytes)
                    .map_err(|e| ProviderError::Malformed(format!("cache entry {}: {e}", path.display())))?;
                self.touch(&req.digest);
                Ok(Some(entry.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => match self.mode {
                CacheMode::Replay => Err(ProviderError::CacheMiss(req.digest.clone())),
                _ => Ok(None),
            },
            Err(e) => Err(e.into()),
        }
    }

    /// Stores a response body; write-temp-then-rename keeps entries atomic.
    pub fn store(&self, req: &ProviderRequest, response: &str) -> Result<(), ProviderError> {
        if self.mode != CacheMode::Record {
            return Ok(());
        }
        let entry = CacheEntry {
            request: CachedRequest {
                kind: req.kind,
                endpoint: req.endpoint.clone(),
                payload: serde_json::from_slice(&req.payload)
                    .unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(&req.payload).into_owned())),
            },
            response: response.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&mut tmp, &entry).map_err(std::io::Error::from)?;
        tmp.flush()?;
        tmp.persist(self.path_for(&req.digest)).map_err(|e| e.error)?;
        self.touch(&req.digest);
        Ok(())
    }

    fn touch(&self, digest: &str) {
        self.touched
            .lock()
            .expect("cache bookkeeping poisoned")
            .insert(digest.to_string());
    }

    /// Digests read or written during this session, sorted.
    pub fn touched(&self) -> Vec<String> {
        self.touched
            .lock()
            .expect("cache bookkeeping poisoned")
            .iter()
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn record_then_replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let req = ProviderRequest::new(RequestKind::Chat, "http://h/v1", &json!({"m": "x"}));
        let rec = ResponseCache::open(dir.path(), CacheMode::Record).unwrap();
        assert_eq!(rec.lookup(&req).unwrap(), None);
        let body = "{\"choices\":[{\"message\":{\"content\":\"halo\\n\"}}]}";
        rec.store(&req, body).unwrap();
        assert!(dir.path().join(format!("{}.json", req.digest)).exists());

        let replay = ResponseCache::open(dir.path(), CacheMode::Replay).unwrap();
        assert_eq!(replay.lookup(&req).unwrap().as_deref(), Some(body));
        assert_eq!(replay.touched(), vec![req.digest.clone()]);

        let other = ProviderRequest::new(RequestKind::Chat, "http://h/v1", &json!({"m": "y"}));
        assert!(matches!(replay.lookup(&other), Err(ProviderError::CacheMiss(_))));
    }

    #[test]
    fn off_mode_never_touches_disk() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("never");
        let c = ResponseCache::open(&sub, CacheMode::Off).unwrap();
        let req = ProviderRequest::new(RequestKind::Embed, "e", &json!({}));
        c.store(&req, "x").unwrap();
        assert_eq!(c.lookup(&req).unwrap(), None);
        assert!(!sub.exists());
    }
}
