//! Append-only candidate store.
//!
//! Each line of the file is one JSON record: a `put` carrying a full
//! candidate or a `delete` tombstone. Opening the store replays the file into
//! an in-memory index and rewrites it compacted. A torn final line (a write
//! cut short by a crash) is dropped on replay.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gk::{GKProfile, QualityLevel};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt store {path} at line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("candidate `{0}` already exists")]
    Duplicate(String),
    #[error("candidate `{0}` not found")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub name: String,
    pub profile: GKProfile,
    pub created_at: DateTime<Utc>,
    /// Cached; valid for `rulebase_version`.
    pub score: f64,
    pub level: QualityLevel,
    pub rulebase_version: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum StoreLine {
    Put { record: CandidateRecord },
    Delete { id: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayStats {
    pub lines: usize,
    pub puts: usize,
    pub deletes: usize,
    pub torn_tail: bool,
}

pub struct CandidateStore {
    path: PathBuf,
    file: File,
    seq: u64,
    order: BTreeMap<u64, String>,
    index: HashMap<String, (u64, CandidateRecord)>,
}

impl std::fmt::Debug for CandidateStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CandidateStore").field("path", &self.path).field("len", &self.index.len()).finish()
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Live records in the file, in insertion order, without modifying it.
pub fn replay(path: &Path) -> Result<(Vec<CandidateRecord>, ReplayStats), StoreError> {
    let mut stats = ReplayStats::default();
    let mut live: Vec<CandidateRecord> = Vec::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((live, stats)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.last() == Some(&b'\n');
        let text = String::from_utf8_lossy(&buf);
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        match serde_json::from_str::<StoreLine>(text) {
            Ok(StoreLine::Put { record }) => {
                stats.puts += 1;
                live.retain(|r| r.id != record.id);
                live.push(record);
            }
            Ok(StoreLine::Delete { id }) => {
                stats.deletes += 1;
                live.retain(|r| r.id != id);
            }
            Err(_) if !complete => {
                stats.torn_tail = true;
                break;
            }
            Err(e) => {
                return Err(StoreError::Corrupt { path: path.to_path_buf(), line: line_no, message: e.to_string() })
            }
        }
        stats.lines = line_no;
    }
    Ok((live, stats))
}

impl CandidateStore {
    /// Replays `path`, compacts it, and opens it for appending.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, ReplayStats), StoreError> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(&path))?;
        }
        let (records, stats) = replay(&path)?;

        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = File::create(&tmp).map_err(io_err(&tmp))?;
            for record in &records {
                let line = serde_json::to_string(&StoreLine::Put { record: record.clone() })
                    .expect("records serialize");
                writeln!(out, "{line}").map_err(io_err(&tmp))?;
            }
            out.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        let file = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;

        let mut store = CandidateStore { path, file, seq: 0, order: BTreeMap::new(), index: HashMap::new() };
        for record in records {
            store.index_insert(record);
        }
        Ok((store, stats))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&CandidateRecord> {
        self.index.get(id).map(|(_, r)| r)
    }

    /// Records in insertion order.
    pub fn records(&self) -> impl Iterator<Item = &CandidateRecord> {
        self.order.values().map(|id| &self.index[id].1)
    }

    pub fn ids(&self) -> Vec<String> {
        self.order.values().cloned().collect()
    }

    pub fn insert(&mut self, record: CandidateRecord) -> Result<(), StoreError> {
        if self.contains(&record.id) {
            return Err(StoreError::Duplicate(record.id));
        }
        self.append(&StoreLine::Put { record: record.clone() })?;
        self.index_insert(record);
        Ok(())
    }

    pub fn delete(&mut self, id: &str) -> Result<CandidateRecord, StoreError> {
        if !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        self.append(&StoreLine::Delete { id: id.to_string() })?;
        let (seq, record) = self.index.remove(id).expect("checked");
        self.order.remove(&seq);
        Ok(record)
    }

    /// Updates the cached score in memory only; the profile is what persists.
    pub fn refresh_cache(&mut self, id: &str, score: f64, level: QualityLevel, version: u64) {
        if let Some((_, r)) = self.index.get_mut(id) {
            r.score = score;
            r.level = level;
            r.rulebase_version = version;
        }
    }

    fn index_insert(&mut self, record: CandidateRecord) {
        self.seq += 1;
        self.order.insert(self.seq, record.id.clone());
        self.index.insert(record.id.clone(), (self.seq, record));
    }

    fn append(&mut self, line: &StoreLine) -> Result<(), StoreError> {
        let mut bytes = serde_json::to_vec(line).expect("store lines serialize");
        bytes.push(b'\n');
        self.file.write_all(&bytes).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}
