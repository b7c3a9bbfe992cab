//! Session registry backed by a single append-only JSONL event file.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};

use chrono::Utc;
use uuid::Uuid;

use crate::api::{CreateSession, Event};
use crate::error::{ApiError, ApiResult};
use crate::session::Session;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Published snapshot plus the single-writer gate for one session.
struct Slot {
    current: RwLock<Arc<Session>>,
    writer: Mutex<()>,
}

impl Slot {
    fn new(session: Session) -> Arc<Slot> {
        Arc::new(Slot {
            current: RwLock::new(Arc::new(session)),
            writer: Mutex::new(()),
        })
    }

    fn snapshot(&self) -> Arc<Session> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn publish(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = session.clone();
        session
    }
}

pub struct Store {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    /// Idempotency key to session id. Creation holds this lock throughout.
    keys: Mutex<HashMap<String, String>>,
    log: Option<Mutex<File>>,
}

impl Store {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Store {
            sessions: RwLock::new(HashMap::new()),
            keys: Mutex::new(HashMap::new()),
            log: None,
        }
    }

    /// Opens (or creates) the event file and replays every session in it.
    pub fn open(path: &Path) -> Result<Self, String> {
        let mut logs: Vec<(String, Vec<Event>)> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event =
                    serde_json::from_str(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
                let k = *index.entry(event.session_id.clone()).or_insert_with(|| {
                    logs.push((event.session_id.clone(), Vec::new()));
                    logs.len() - 1
                });
                logs[k].1.push(event);
            }
        }
        let mut sessions = HashMap::new();
        let mut keys = HashMap::new();
        for (id, events) in logs {
            let session =
                Session::replay(&events).map_err(|e| format!("replaying session {id}: {}", e.body.message))?;
            if let Some(key) = &session.idempotency_key {
                keys.insert(key.clone(), id.clone());
            }
            sessions.insert(id, Slot::new(session));
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Store {
            sessions: RwLock::new(sessions),
            keys: Mutex::new(keys),
            log: Some(Mutex::new(file)),
        })
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }

    pub fn get(&self, id: &str) -> ApiResult<Arc<Session>> {
        Ok(self.slot(id)?.snapshot())
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn append(&self, event: &Event) -> ApiResult<()> {
        let Some(log) = &self.log else { return Ok(()) };
        let mut line = serde_json::to_string(event).map_err(|e| ApiError::storage(e.to_string()))?;
        line.push('\n');
        let mut file = lock(log);
        file.write_all(line.as_bytes())
            .and_then(|()| file.sync_data())
            .map_err(|e| ApiError::storage(format!("writing event log: {e}")))
    }

    /// Creates a session; a repeated idempotency key returns the original
    /// session and `false`.
    pub fn create(&self, request: &CreateSession, key: Option<String>) -> ApiResult<(Arc<Session>, bool)> {
        let mut keys = lock(&self.keys);
        if let Some(id) = key.as_ref().and_then(|k| keys.get(k)) {
            let session = self.get(id)?;
            if !session.matches(request) {
                return Err(ApiError::conflict(format!(
                    "idempotency key was used for session {id} with a different request"
                )));
            }
            return Ok((session, false));
        }
        let id = Uuid::new_v4().to_string();
        let event = Session::creation_event(&id, request, key.clone(), Utc::now())?;
        let session = Session::create(&event)?;
        self.append(&event)?;
        let slot = Slot::new(session);
        let session = slot.snapshot();
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), slot);
        if let Some(k) = key {
            keys.insert(k, id);
        }
        Ok((session, true))
    }

    /// Builds an event from the current snapshot, applies it, persists it and
    /// publishes the new snapshot. A concurrent writer gets a conflict.
    pub fn update(&self, id: &str, build: impl FnOnce(&Session) -> ApiResult<Event>) -> ApiResult<Arc<Session>> {
        let slot = self.slot(id)?;
        let _writer = match slot.writer.try_lock() {
            Ok(g) => g,
            Err(TryLockError::Poisoned(e)) => e.into_inner(),
            Err(TryLockError::WouldBlock) => {
                return Err(ApiError::conflict(format!(
                    "session {id} is being updated by another request"
                )));
            }
        };
        let current = slot.snapshot();
        let event = build(&current)?;
        let mut next = (*current).clone();
        next.apply(&event)?;
        self.append(&event)?;
        Ok(slot.publish(next))
    }
}
