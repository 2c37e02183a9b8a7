//! Session persistence: issued study lists and the trials logged against them.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use nonword_core::TrialRecord;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Storage boundary for sessions. Trials are append-only: nothing here
/// rewrites or removes a stored record.
pub trait SessionStore: Send + Sync {
    /// Stores a study list under a new id; fails if the id is taken.
    fn create_study(&self, id: &str, list_json: &str) -> Result<(), ServiceError>;
    /// The stored list bytes, exactly as given to `create_study`.
    fn study(&self, id: &str) -> Result<Option<String>, ServiceError>;
    fn append_trials(&self, id: &str, records: &[TrialRecord]) -> Result<(), ServiceError>;
    fn trials(&self, id: &str) -> Result<Vec<TrialRecord>, ServiceError>;
}

#[derive(Debug, Default)]
struct Session {
    list_json: String,
    trials: Vec<TrialRecord>,
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    sessions: RwLock<HashMap<String, Session>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&self, id: &str, list_json: &str) -> Result<(), ServiceError> {
        let mut sessions = self.sessions.write().expect("session lock poisoned");
        if sessions.contains_key(id) {
            return Err(ServiceError::Store(format!("session {id} already exists")));
        }
        sessions.insert(id.to_string(), Session { list_json: list_json.to_string(), trials: Vec::new() });
        Ok(())
    }

    fn push(&self, id: &str, records: &[TrialRecord]) -> Result<(), ServiceError> {
        let mut sessions = self.sessions.write().expect("session lock poisoned");
        let session = sessions.get_mut(id).ok_or_else(|| ServiceError::Store(format!("unknown session {id}")))?;
        session.trials.extend_from_slice(records);
        Ok(())
    }
}

impl SessionStore for MemoryStore {
    fn create_study(&self, id: &str, list_json: &str) -> Result<(), ServiceError> {
        self.insert(id, list_json)
    }

    fn study(&self, id: &str) -> Result<Option<String>, ServiceError> {
        Ok(self.sessions.read().expect("session lock poisoned").get(id).map(|s| s.list_json.clone()))
    }

    fn append_trials(&self, id: &str, records: &[TrialRecord]) -> Result<(), ServiceError> {
        self.push(id, records)
    }

    fn trials(&self, id: &str) -> Result<Vec<TrialRecord>, ServiceError> {
        Ok(self.sessions.read().expect("session lock poisoned").get(id).map(|s| s.trials.clone()).unwrap_or_default())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Event {
    Study { id: String, list: String },
    Trials { id: String, records: Vec<TrialRecord> },
}

/// Single-file store: every change is one appended JSON line, replayed
/// into memory on open.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    memory: MemoryStore,
    file: Mutex<File>,
}

impl FileStore {
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let memory = MemoryStore::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event =
                    serde_json::from_str(&line).map_err(|e| ServiceError::Store(format!("{}:{}: {e}", path.display(), i + 1)))?;
                match event {
                    Event::Study { id, list } => memory.insert(&id, &list)?,
                    Event::Trials { id, records } => memory.push(&id, &records)?,
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileStore { path: path.to_path_buf(), memory, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).map_err(|e| ServiceError::Store(e.to_string()))?;
        line.push('\n');
        let mut file = self.file.lock().expect("store file lock poisoned");
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

impl SessionStore for FileStore {
    fn create_study(&self, id: &str, list_json: &str) -> Result<(), ServiceError> {
        if self.memory.study(id)?.is_some() {
            return Err(ServiceError::Store(format!("session {id} already exists")));
        }
        self.append(&Event::Study { id: id.to_string(), list: list_json.to_string() })?;
        self.memory.insert(id, list_json)
    }

    fn study(&self, id: &str) -> Result<Option<String>, ServiceError> {
        self.memory.study(id)
    }

    fn append_trials(&self, id: &str, records: &[TrialRecord]) -> Result<(), ServiceError> {
        if self.memory.study(id)?.is_none() {
            return Err(ServiceError::Store(format!("unknown session {id}")));
        }
        self.append(&Event::Trials { id: id.to_string(), records: records.to_vec() })?;
        self.memory.push(id, records)
    }

    fn trials(&self, id: &str) -> Result<Vec<TrialRecord>, ServiceError> {
        self.memory.trials(id)
    }
}
