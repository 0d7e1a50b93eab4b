//! Human review queue over a pipeline workspace.
//!
//! Two modes share the machinery: `filter` decides the exclusion criteria on
//! fresh candidates, `quality` approves or flags automatically annotated ones.

mod api;
mod progress;

use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use curatekit::pipeline::{Candidate, CandidateId, Stage, Status, Workspace};

pub use api::{decode_decision, router, Decision};
pub use progress::{compute_progress, QueueProgress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReviewMode {
    Filter,
    Quality,
}

impl ReviewMode {
    fn stage(self) -> Stage {
        match self {
            ReviewMode::Filter => Stage::Filter,
            ReviewMode::Quality => Stage::Review,
        }
    }

    /// Waiting for a decision in this mode.
    pub fn is_queued(self, c: &Candidate) -> bool {
        match self {
            ReviewMode::Filter => {
                c.status == Status::Pending && c.filter.is_none() && !c.done(Stage::Label)
            }
            ReviewMode::Quality => c.status == Status::AwaitingReview,
        }
    }

    /// Already decided in this mode.
    pub fn is_decided(self, c: &Candidate) -> bool {
        c.done(self.stage())
    }
}

/// Everything the HTTP handlers share. Decisions go through the mutex, which
/// makes the decision log single-writer.
#[derive(Clone)]
pub struct ReviewService {
    inner: Arc<Mutex<Session>>,
}

pub(crate) struct Session {
    pub ws: Workspace,
    pub mode: ReviewMode,
    pub started_at: DateTime<Utc>,
    pub window: Duration,
}

impl ReviewService {
    pub fn new(ws: Workspace, mode: ReviewMode, window: Duration) -> Self {
        let started_at = ws.clock().now();
        Self {
            inner: Arc::new(Mutex::new(Session {
                ws,
                mode,
                started_at,
                window,
            })),
        }
    }

    pub(crate) fn lock(&self) -> MutexGuard<'_, Session> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn mode(&self) -> ReviewMode {
        self.lock().mode
    }

    pub fn progress(&self) -> QueueProgress {
        self.lock().progress()
    }

    /// Next queued candidate id, in id order.
    pub fn next(&self) -> Option<CandidateId> {
        let s = self.lock();
        let id =
            s.ws.candidates()
                .find(|c| s.mode.is_queued(c))
                .map(|c| c.id.clone());
        id
    }
}

impl Session {
    pub fn progress(&self) -> QueueProgress {
        let mode = self.mode;
        let relevant = self
            .ws
            .candidates()
            .filter(|c| mode.is_queued(c) || mode.is_decided(c));
        let (mut total, mut completed) = (0, 0);
        for c in relevant {
            total += 1;
            completed += usize::from(mode.is_decided(c));
        }
        let stage = mode.stage();
        let times: Vec<DateTime<Utc>> = self
            .ws
            .log()
            .records()
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.timestamp)
            .collect();
        compute_progress(
            total,
            completed,
            self.started_at,
            self.window,
            &times,
            self.ws.clock().now(),
        )
    }
}
