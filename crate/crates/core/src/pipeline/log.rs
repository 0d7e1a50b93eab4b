//! Append-only decision log, one JSON record per line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::datamodel::{CategoryId, MaskRle};

use super::candidate::{Candidate, CandidateId, RejectReason, ScoredBox, Stage, Verdict};
use super::filter::FilterFlags;
use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Filtered {
        flags: FilterFlags,
    },
    Labeled {
        label: Option<String>,
    },
    Boxes {
        boxes: Vec<ScoredBox>,
        width: u32,
        height: u32,
    },
    Passed,
    Mapped {
        category: CategoryId,
    },
    Masked {
        mask: MaskRle,
    },
    Rejected {
        reason: RejectReason,
        #[serde(default)]
        detail: String,
    },
    Reviewed {
        verdict: Verdict,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub candidate_id: CandidateId,
    pub stage: Stage,
    pub outcome: Outcome,
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Manually driven clock for tests.
#[derive(Debug)]
pub struct FixedClock(Mutex<DateTime<Utc>>);

impl FixedClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        Self(Mutex::new(at))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap_or_else(|e| e.into_inner()) = at;
    }

    pub fn advance(&self, by: chrono::Duration) {
        let mut t = self.0.lock().unwrap_or_else(|e| e.into_inner());
        *t += by;
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Parses log bytes. Returns the records and the length of the well-formed
/// prefix: an unterminated last line that does not parse is treated as a torn
/// write and excluded, any other bad line is an error.
pub fn parse_records(bytes: &[u8]) -> Result<(Vec<Record>, usize), PipelineError> {
    let mut records = Vec::new();
    let mut pos = 0;
    let mut line_no = 0;
    while pos < bytes.len() {
        line_no += 1;
        let (line, next, terminated) = match bytes[pos..].iter().position(|&b| b == b'\n') {
            Some(n) => (&bytes[pos..pos + n], pos + n + 1, true),
            None => (&bytes[pos..], bytes.len(), false),
        };
        if line.iter().all(u8::is_ascii_whitespace) {
            pos = next;
            continue;
        }
        match serde_json::from_slice::<Record>(line) {
            Ok(r) => records.push(r),
            Err(_) if !terminated => return Ok((records, pos)),
            Err(e) => {
                return Err(PipelineError::LogParse {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
        pos = next;
    }
    Ok((records, pos))
}

/// Single-writer handle on a log file. Every append is synced to disk before
/// it returns.
#[derive(Debug)]
pub struct DecisionLog {
    path: PathBuf,
    file: File,
    records: Vec<Record>,
}

impl DecisionLog {
    /// Opens or creates the log, dropping a torn trailing write if present.
    pub fn open(path: &Path) -> Result<Self, PipelineError> {
        let ctx = || format!("opening decision log {}", path.display());
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| PipelineError::io(ctx(), e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)
            .map_err(|e| PipelineError::io(ctx(), e))?;
        let (records, valid) = parse_records(&bytes)?;
        if valid < bytes.len() {
            file.set_len(valid as u64)
                .map_err(|e| PipelineError::io(ctx(), e))?;
        } else if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            file.write_all(b"\n")
                .map_err(|e| PipelineError::io(ctx(), e))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn append(&mut self, r: Record) -> Result<(), PipelineError> {
        let mut line = serde_json::to_vec(&r)
            .map_err(|e| PipelineError::io("encoding decision record", std::io::Error::other(e)))?;
        line.push(b'\n');
        let ctx = || format!("writing decision log {}", self.path.display());
        self.file
            .write_all(&line)
            .map_err(|e| PipelineError::io(ctx(), e))?;
        self.file
            .sync_data()
            .map_err(|e| PipelineError::io(ctx(), e))?;
        self.records.push(r);
        Ok(())
    }
}

/// Replays `records` over the initial candidates.
pub fn fold(
    initial: Vec<Candidate>,
    records: &[Record],
) -> Result<BTreeMap<CandidateId, Candidate>, PipelineError> {
    let mut state: BTreeMap<_, _> = initial.into_iter().map(|c| (c.id.clone(), c)).collect();
    for (index, r) in records.iter().enumerate() {
        let c = state
            .get_mut(&r.candidate_id)
            .ok_or_else(|| PipelineError::UnknownCandidate(r.candidate_id.clone()))?;
        c.apply(r).map_err(|message| PipelineError::BadTransition {
            index,
            candidate: r.candidate_id.clone(),
            message,
        })?;
    }
    Ok(state)
}
