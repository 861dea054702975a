//! Ordered key-value storage with atomic multi-key commits.
//!
//! [`FileBackend`] keeps the whole key space in memory and makes every commit
//! durable by appending it to a write-ahead log before applying it. A log
//! frame is `len: u32 LE | crc32: u32 LE | payload`, where the payload is one
//! JSON-encoded batch. On open the log is replayed; a torn or corrupt tail
//! (partial frame, checksum mismatch) is discarded and truncated away, since
//! it can only be a commit that never returned.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::StoreError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum WriteOp {
    Put { key: String, value: String },
    Delete { key: String },
}

impl WriteOp {
    pub fn put(key: impl Into<String>, value: impl Into<String>) -> Self {
        WriteOp::Put {
            key: key.into(),
            value: value.into(),
        }
    }

    pub fn delete(key: impl Into<String>) -> Self {
        WriteOp::Delete { key: key.into() }
    }
}

pub trait KvBackend: Send + Sync {
    fn get(&self, key: &str) -> Result<Option<String>, StoreError>;

    /// All entries whose key starts with `prefix`, in key order.
    fn scan_prefix(&self, prefix: &str) -> Result<Vec<(String, String)>, StoreError>;

    /// Apply every operation or none.
    fn commit(&self, batch: Vec<WriteOp>) -> Result<(), StoreError>;
}

fn apply(map: &mut BTreeMap<String, String>, batch: Vec<WriteOp>) {
    for op in batch {
        match op {
            WriteOp::Put { key, value } => {
                map.insert(key, value);
            }
            WriteOp::Delete { key } => {
                map.remove(&key);
            }
        }
    }
}

fn scan(map: &BTreeMap<String, String>, prefix: &str) -> Vec<(String, String)> {
    map.range(prefix.to_owned()..)
        .take_while(|(k, _)| k.starts_with(prefix))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

#[derive(Debug, Default)]
pub struct MemoryBackend {
    map: RwLock<BTreeMap<String, String>>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl KvBackend for MemoryBackend {
    fn get(&self, key: &str) -> Result<Option<String>, StoreError> {
        Ok(self.map.read().unwrap().get(key).cloned())
    }

    fn scan_prefix(&self, prefix: &str) -> Result<Vec<(String, String)>, StoreError> {
        Ok(scan(&self.map.read().unwrap(), prefix))
    }

    fn commit(&self, batch: Vec<WriteOp>) -> Result<(), StoreError> {
        apply(&mut self.map.write().unwrap(), batch);
        Ok(())
    }
}

const LOG_FILE: &str = "wal.log";
const COMPACT_FILE: &str = "wal.compact";

pub struct FileBackend {
    dir: PathBuf,
    map: RwLock<BTreeMap<String, String>>,
    log: Mutex<File>,
    sync: bool,
}

impl FileBackend {
    /// Open (or create) the store in `dir`, replaying and then compacting its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, true)
    }

    /// `sync = false` skips fsync after each commit (tests, simulations).
    pub fn open_with(dir: impl AsRef<Path>, sync: bool) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io)?;
        let path = dir.join(LOG_FILE);
        let mut map = BTreeMap::new();
        if path.exists() {
            let valid = replay(&path, &mut map)?;
            let file = OpenOptions::new().write(true).open(&path).map_err(io)?;
            file.set_len(valid).map_err(io)?;
        }
        write_snapshot(&dir, &map)?;
        let log = OpenOptions::new().append(true).open(&path).map_err(io)?;
        Ok(Self {
            dir,
            map: RwLock::new(map),
            log: Mutex::new(log),
            sync,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn io(err: std::io::Error) -> StoreError {
    StoreError::Storage(err.to_string())
}

fn frame(batch: &[WriteOp]) -> Vec<u8> {
    let payload = serde_json::to_vec(batch).expect("write ops serialize");
    let mut out = Vec::with_capacity(payload.len() + 8);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Replay complete frames into `map`; returns the byte length of the valid prefix.
fn replay(path: &Path, map: &mut BTreeMap<String, String>) -> Result<u64, StoreError> {
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut valid = 0u64;
    loop {
        let mut header = [0u8; 8];
        if reader.read_exact(&mut header).is_err() {
            break;
        }
        let len = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(header[4..].try_into().unwrap());
        let mut payload = vec![0u8; len];
        if reader.read_exact(&mut payload).is_err() || crc32fast::hash(&payload) != crc {
            break;
        }
        let Ok(batch) = serde_json::from_slice::<Vec<WriteOp>>(&payload) else {
            break;
        };
        apply(map, batch);
        valid += 8 + len as u64;
    }
    Ok(valid)
}

/// Replace the log by a single frame holding the live key space.
fn write_snapshot(dir: &Path, map: &BTreeMap<String, String>) -> Result<(), StoreError> {
    let batch: Vec<WriteOp> = map.iter().map(|(k, v)| WriteOp::put(k.clone(), v.clone())).collect();
    let tmp = dir.join(COMPACT_FILE);
    let mut file = File::create(&tmp).map_err(io)?;
    if !batch.is_empty() {
        file.write_all(&frame(&batch)).map_err(io)?;
    }
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, dir.join(LOG_FILE)).map_err(io)?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

impl KvBackend for FileBackend {
    fn get(&self, key: &str) -> Result<Option<String>, StoreError> {
        Ok(self.map.read().unwrap().get(key).cloned())
    }

    fn scan_prefix(&self, prefix: &str) -> Result<Vec<(String, String)>, StoreError> {
        Ok(scan(&self.map.read().unwrap(), prefix))
    }

    fn commit(&self, batch: Vec<WriteOp>) -> Result<(), StoreError> {
        if batch.is_empty() {
            return Ok(());
        }
        let bytes = frame(&batch);
        let mut log = self.log.lock().unwrap();
        let start = log.seek(SeekFrom::End(0)).map_err(io)?;
        let written = log.write_all(&bytes).and_then(|_| if self.sync { log.sync_data() } else { Ok(()) });
        if let Err(err) = written {
            // leave no partial frame behind for the next commit to follow
            let _ = log.set_len(start);
            return Err(io(err));
        }
        apply(&mut self.map.write().unwrap(), batch);
        Ok(())
    }
}
