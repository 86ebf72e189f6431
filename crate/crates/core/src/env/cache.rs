use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, CompletionRequest, EnvError};

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    text: String,
}

/// Stable content hash of a request. The purpose tag is deliberately not part of it.
pub fn cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.model_id.as_bytes());
    hasher.update([0]);
    hasher.update(request.temperature.to_bits().to_le_bytes());
    hasher.update(request.max_tokens.to_le_bytes());
    hasher.update(request.sample.to_le_bytes());
    hasher.update(request.prompt.as_bytes());
    hex::encode(hasher.finalize())
}

struct Store {
    entries: HashMap<String, String>,
    file: File,
}

/// Persistent request cache in front of another backend.
///
/// Entries are appended to a JSON-lines file as they are produced. A file that
/// fails to parse is moved aside and the cache starts empty.
pub struct CachedBackend<B> {
    inner: B,
    path: PathBuf,
    store: Mutex<Store>,
}

impl<B: Backend> CachedBackend<B> {
    pub fn open(inner: B, path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let entries = match read_entries(&path) {
            Ok(entries) => entries,
            Err(err) => {
                let aside = path.with_extension("corrupt");
                warn!(
                    "cache {} is corrupt ({err}); moving it to {} and starting fresh",
                    path.display(),
                    aside.display()
                );
                fs::rename(&path, &aside)?;
                HashMap::new()
            }
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            inner,
            path,
            store: Mutex::new(Store { entries, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.store.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_entries(path: &Path) -> io::Result<HashMap<String, String>> {
    let mut entries = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(entries),
        Err(e) => return Err(e),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: Entry = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1))
        })?;
        entries.insert(entry.key, entry.text);
    }
    Ok(entries)
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        let key = cache_key(request);
        if let Some(text) = self.store.lock().unwrap().entries.get(&key) {
            return Ok(text.clone());
        }
        // The lock is not held across the backend call so concurrent misses proceed.
        let text = self.inner.complete(request)?;
        let mut store = self.store.lock().unwrap();
        if !store.entries.contains_key(&key) {
            let line = serde_json::to_string(&Entry {
                key: key.clone(),
                text: text.clone(),
            })
            .expect("cache entry serializes");
            if let Err(err) = writeln!(store.file, "{line}").and_then(|_| store.file.flush()) {
                warn!(
                    "failed to persist cache entry to {}: {err}",
                    self.path.display()
                );
            }
            store.entries.insert(key, text.clone());
        }
        Ok(text)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}
