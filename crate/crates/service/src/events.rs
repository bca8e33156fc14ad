//! Append-only event log and state snapshots.
//!
//! The log is a JSON-lines file; each line is one [`LogRecord`] with a
//! consecutive sequence number starting at 1. A record is durable once its
//! trailing newline is on disk. On open, a final fragment without a newline
//! is a torn write from a crash: it is dropped and the file truncated.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wallfilter_core::{ClassPosterior, PolicyConfig, RawMessage};

use crate::domain::{MessageStatus, ReviewAction};
use crate::error::ServiceError;
use crate::state::ServiceState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    WallCreated {
        wall_id: String,
        owner_id: String,
        policy: PolicyConfig,
        at_ms: u64,
    },
    /// A post together with the decision made for it. `policy` is the wall
    /// policy in force, needed to replay the author's profile update.
    MessagePosted {
        message: RawMessage,
        seq: u64,
        wall_id: String,
        status: MessageStatus,
        evidence: Option<ClassPosterior>,
        model_version: Option<String>,
        policy: PolicyConfig,
        at_ms: u64,
    },
    ManagerReviewed {
        message_id: String,
        action: ReviewAction,
        actor: String,
        at_ms: u64,
    },
    MessageDeleted {
        message_id: String,
        actor: String,
        at_ms: u64,
    },
    UserBlockSet {
        user_id: String,
        blocked: bool,
        actor: String,
        at_ms: u64,
    },
    RulesChanged {
        wall_id: String,
        policy: PolicyConfig,
        actor: String,
        at_ms: u64,
    },
    ModelRetrained {
        version: String,
        corpus_path: String,
        at_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub event: Event,
}

pub struct EventLog {
    file: File,
    path: PathBuf,
    last_seq: u64,
    fsync: bool,
}

impl EventLog {
    /// Opens (creating if needed) the log at `path` and returns every
    /// durable record in order.
    pub fn open(path: impl Into<PathBuf>, fsync: bool) -> Result<(Self, Vec<LogRecord>), ServiceError> {
        let path = path.into();
        let ctx = |what: &str| format!("{what} {}", path.display());
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(|e| ServiceError::io(ctx("open"), e))?;
        let bytes = std::fs::read(&path).map_err(|e| ServiceError::io(ctx("read"), e))?;

        let durable_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if durable_len < bytes.len() {
            log::warn!(
                "dropping {} bytes of torn write at the end of {}",
                bytes.len() - durable_len,
                path.display()
            );
            file.set_len(durable_len as u64)
                .map_err(|e| ServiceError::io(ctx("truncate"), e))?;
            file.flush().map_err(|e| ServiceError::io(ctx("flush"), e))?;
        }

        let mut records = Vec::new();
        for (i, line) in bytes[..durable_len].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_slice(line)
                .map_err(|e| ServiceError::Log(format!("line {}: {e}", i + 1)))?;
            let expected = records.len() as u64 + 1;
            if record.seq != expected {
                return Err(ServiceError::Log(format!(
                    "line {}: sequence {} where {expected} was expected",
                    i + 1,
                    record.seq
                )));
            }
            records.push(record);
        }
        let last_seq = records.len() as u64;
        Ok((
            EventLog {
                file,
                path,
                last_seq,
                fsync,
            },
            records,
        ))
    }

    /// Writes one record and returns its sequence number.
    pub fn append(&mut self, event: Event) -> Result<LogRecord, ServiceError> {
        let record = LogRecord {
            seq: self.last_seq + 1,
            event,
        };
        let mut line = serde_json::to_vec(&record).map_err(|e| ServiceError::Log(e.to_string()))?;
        line.push(b'\n');
        let ctx = || format!("append {}", self.path.display());
        self.file
            .write_all(&line)
            .map_err(|e| ServiceError::io(ctx(), e))?;
        self.file.flush().map_err(|e| ServiceError::io(ctx(), e))?;
        if self.fsync {
            self.file.sync_data().map_err(|e| ServiceError::io(ctx(), e))?;
        }
        self.last_seq = record.seq;
        Ok(record)
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Full state as of `state.last_seq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub state: ServiceState,
}

const SNAPSHOT_FORMAT: &str = "wallfilter-snapshot-1";

pub fn write_snapshot(path: &Path, state: &ServiceState) -> Result<(), ServiceError> {
    let snap = Snapshot {
        format: SNAPSHOT_FORMAT.into(),
        state: state.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&snap).map_err(|e| ServiceError::Log(e.to_string()))?;
    bytes.push(b'\n');
    let tmp = path.with_extension("json.tmp");
    let ctx = |what: &str| format!("{what} {}", tmp.display());
    let mut f = File::create(&tmp).map_err(|e| ServiceError::io(ctx("create"), e))?;
    f.write_all(&bytes).map_err(|e| ServiceError::io(ctx("write"), e))?;
    f.sync_all().map_err(|e| ServiceError::io(ctx("sync"), e))?;
    std::fs::rename(&tmp, path).map_err(|e| ServiceError::io(ctx("rename"), e))
}

pub fn read_snapshot(path: &Path) -> Result<Option<ServiceState>, ServiceError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(ServiceError::io(format!("read {}", path.display()), e)),
    };
    let snap: Snapshot = serde_json::from_slice(&bytes)
        .map_err(|e| ServiceError::Log(format!("snapshot {}: {e}", path.display())))?;
    if snap.format != SNAPSHOT_FORMAT {
        return Err(ServiceError::Log(format!("unknown snapshot format {:?}", snap.format)));
    }
    Ok(Some(snap.state))
}
