//! In-memory session store with an optional append-only journal.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use mdss_models::catalog::ModelRequest;
use mdss_models::scenario::{apply_step, Step};
use mdss_models::session::EvidenceEcho;
use mdss_models::{GlobalConfig, ModelSession, StopOverride};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::library::{node_names, ModelLibrary};

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRecord {
    pub id: String,
    pub request: ModelRequest,
    /// Successful operations in the order they were applied.
    pub log: Vec<Step>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeView {
    pub name: String,
    pub kind: mdss_core::NodeKind,
    pub states: Vec<String>,
}

/// What `GET /sessions/{id}` returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    #[serde(flatten)]
    pub record: SessionRecord,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<GlobalConfig>,
    pub evidence: Vec<EvidenceEcho>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_override: Option<StopOverride>,
    pub nodes: Vec<NodeView>,
}

#[derive(Debug)]
pub struct Entry {
    pub record: SessionRecord,
    pub session: ModelSession,
}

impl Entry {
    pub fn view(&self) -> SessionView {
        SessionView {
            record: self.record.clone(),
            model: self.session.model().id.clone(),
            config: self.session.model().global.clone(),
            evidence: self.session.evidence_echo(),
            stop_override: self.session.stop_override(),
            nodes: self
                .session
                .network()
                .nodes
                .iter()
                .map(|n| NodeView {
                    name: n.name.clone(),
                    kind: n.kind,
                    states: n.states.clone(),
                })
                .collect(),
        }
    }

    pub fn error(&self, e: impl Into<ApiError>) -> ApiError {
        e.into().with_nodes(&node_names(&self.session))
    }
}

/// One journal line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum JournalEvent {
    Create {
        session: String,
        at: u64,
        request: ModelRequest,
    },
    Step {
        session: String,
        at: u64,
        step: Step,
    },
}

pub struct SessionStore {
    library: ModelLibrary,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
    next: AtomicU64,
    journal: Option<Mutex<File>>,
    journal_path: Option<PathBuf>,
}

impl SessionStore {
    pub fn new(library: ModelLibrary) -> Self {
        SessionStore {
            library,
            sessions: RwLock::new(BTreeMap::new()),
            next: AtomicU64::new(1),
            journal: None,
            journal_path: None,
        }
    }

    /// Store backed by `path`; existing events are replayed first.
    pub fn with_journal(library: ModelLibrary, path: &Path) -> ApiResult<Self> {
        let mut store = SessionStore::new(library);
        if path.exists() {
            let f = File::open(path).map_err(|e| ApiError::io(path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| ApiError::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let ev: JournalEvent = serde_json::from_str(&line)
                    .map_err(|e| ApiError::malformed(format!("journal line {}: {e}", i + 1)))?;
                store.replay(ev)?;
            }
        }
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ApiError::io(path, e))?;
        store.journal = Some(Mutex::new(f));
        store.journal_path = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn library(&self) -> &ModelLibrary {
        &self.library
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal_path.as_deref()
    }

    fn replay(&self, ev: JournalEvent) -> ApiResult<()> {
        match ev {
            JournalEvent::Create { session, at, request } => {
                let model = self.library.session(&request)?;
                if let Some(n) = session.strip_prefix("s-").and_then(|n| n.parse::<u64>().ok()) {
                    self.next.fetch_max(n + 1, Ordering::SeqCst);
                }
                let record = SessionRecord {
                    id: session.clone(),
                    request,
                    log: Vec::new(),
                    created_ms: at,
                    updated_ms: at,
                };
                self.sessions.write().expect("store lock").insert(
                    session,
                    Arc::new(Mutex::new(Entry {
                        record,
                        session: model,
                    })),
                );
            }
            JournalEvent::Step { session, at, step } => {
                let entry = self.get(&session)?;
                let mut e = entry.lock().expect("session lock");
                apply_step(&mut e.session, &step)?;
                e.record.log.push(step);
                e.record.updated_ms = at;
            }
        }
        Ok(())
    }

    fn append(&self, ev: &JournalEvent) -> ApiResult<()> {
        if let Some(j) = &self.journal {
            let mut line = serde_json::to_string(ev).expect("journal events serialize");
            line.push('\n');
            let mut f = j.lock().expect("journal lock");
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| ApiError::new("io-error", format!("journal: {e}")))?;
        }
        Ok(())
    }

    pub fn create(&self, request: ModelRequest) -> ApiResult<SessionView> {
        let session = self.library.session(&request)?;
        let id = format!("s-{}", self.next.fetch_add(1, Ordering::SeqCst));
        let at = now_ms();
        self.append(&JournalEvent::Create {
            session: id.clone(),
            at,
            request: request.clone(),
        })?;
        let entry = Entry {
            record: SessionRecord {
                id: id.clone(),
                request,
                log: Vec::new(),
                created_ms: at,
                updated_ms: at,
            },
            session,
        };
        let view = entry.view();
        self.sessions.write().expect("store lock").insert(id, Arc::new(Mutex::new(entry)));
        Ok(view)
    }

    pub fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("store lock").keys().cloned().collect()
    }

    /// Applies `step` under the session's lock; only successful steps are logged.
    pub fn apply(&self, id: &str, step: Step) -> ApiResult<SessionView> {
        let entry = self.get(id)?;
        let mut e = entry.lock().expect("session lock");
        apply_step(&mut e.session, &step).map_err(|err| e.error(err))?;
        let at = now_ms();
        self.append(&JournalEvent::Step {
            session: id.to_string(),
            at,
            step: step.clone(),
        })?;
        e.record.log.push(step);
        e.record.updated_ms = at;
        Ok(e.view())
    }

    /// Runs `f` on the session under its lock.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&Entry) -> ApiResult<T>) -> ApiResult<T> {
        let entry = self.get(id)?;
        let e = entry.lock().expect("session lock");
        f(&e)
    }
}
