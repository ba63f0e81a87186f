//! Content-addressed cache of model responses.
//!
//! Keys are the SHA-256 of the full input text, so identical inputs hit the
//! cache regardless of which search step produced them. An optional on-disk
//! layer (one JSON record per key) lets interrupted campaigns reuse paid
//! responses; note that disk reuse can make resumed examples consume fewer
//! counted queries than an uninterrupted run would.

use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::Prediction;

pub struct ResponseCache {
    mem: Mutex<HashMap<String, Prediction>>,
    disk: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            mem: Mutex::new(HashMap::new()),
            disk: None,
        }
    }

    /// Cache backed by a directory of JSON records, created if absent.
    pub fn with_disk(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache {
            mem: Mutex::new(HashMap::new()),
            disk: Some(dir.to_path_buf()),
        })
    }

    /// Hex SHA-256 of the full input text.
    pub fn key(full_text: &str) -> String {
        let digest = Sha256::digest(full_text.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    pub fn get(&self, full_text: &str) -> Option<Prediction> {
        let key = Self::key(full_text);
        if let Some(hit) = self.mem.lock().unwrap().get(&key) {
            return Some(hit.clone());
        }
        let dir = self.disk.as_ref()?;
        let raw = std::fs::read(dir.join(format!("{key}.json"))).ok()?;
        // A truncated record from a killed run parses as garbage; treat it
        // as a miss and let the fresh response overwrite it.
        let pred: Prediction = serde_json::from_slice(&raw).ok()?;
        self.mem.lock().unwrap().insert(key, pred.clone());
        Some(pred)
    }

    pub fn put(&self, full_text: &str, prediction: &Prediction) {
        let key = Self::key(full_text);
        if let Some(dir) = &self.disk {
            if let Ok(body) = serde_json::to_vec(prediction) {
                let _ = std::fs::write(dir.join(format!("{key}.json")), body);
            }
        }
        self.mem.lock().unwrap().insert(key, prediction.clone());
    }

    pub fn len(&self) -> usize {
        self.mem.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
