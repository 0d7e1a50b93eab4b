use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;

use super::candidate::{Candidate, CandidateId, RejectReason, Stage, Status, Verdict};
use super::export::export_dataset;
use super::filter::FilterFlags;
use super::log::{fold, Clock, DecisionLog, Outcome, Record};
use super::ontology::{map_label, normalize_label, LabelRejection, Ontology};
use super::oracle::{BoxOracle, LabelOracle, MaskOracle, OracleImage};
use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Text prompt for the box oracle.
    pub prompt: String,
    pub workers: usize,
    /// Only run candidates that a human has already passed through the filter.
    pub require_filter: bool,
    pub actor: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prompt: "an object".into(),
            workers: 4,
            require_filter: false,
            actor: "pipeline".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub processed: usize,
    pub records_written: usize,
    pub status_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionResult {
    Applied,
    /// Same decision as the one already recorded; nothing was written.
    Repeated,
}

/// Candidates, their decision log and everything needed to advance them.
pub struct Workspace {
    candidates: BTreeMap<CandidateId, Candidate>,
    log: DecisionLog,
    clock: Arc<dyn Clock>,
    image_root: PathBuf,
    ontology: Ontology,
}

impl std::fmt::Debug for Workspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workspace")
            .field("candidates", &self.candidates.len())
            .field("log", &self.log.path())
            .finish()
    }
}

impl Workspace {
    /// Opens the log at `log_path` and replays it over `candidates`.
    pub fn open(
        candidates: Vec<Candidate>,
        log_path: &Path,
        image_root: &Path,
        ontology: Ontology,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, PipelineError> {
        let log = DecisionLog::open(log_path)?;
        let candidates = fold(candidates, log.records())?;
        Ok(Self {
            candidates,
            log,
            clock,
            image_root: image_root.to_path_buf(),
            ontology,
        })
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.values()
    }

    pub fn get(&self, id: &CandidateId) -> Option<&Candidate> {
        self.candidates.get(id)
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn image_root(&self) -> &Path {
        &self.image_root
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn status_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in self.candidates.values() {
            *out.entry(c.status.to_string()).or_insert(0) += 1;
        }
        out
    }

    fn commit(&mut self, r: Record) -> Result<(), PipelineError> {
        let c = self
            .candidates
            .get_mut(&r.candidate_id)
            .ok_or_else(|| PipelineError::UnknownCandidate(r.candidate_id.clone()))?;
        let mut next = c.clone();
        next.apply(&r)
            .map_err(|message| PipelineError::BadTransition {
                index: self.log.records().len(),
                candidate: r.candidate_id.clone(),
                message,
            })?;
        self.log.append(r)?;
        *c = next;
        Ok(())
    }

    /// Advances every eligible pending candidate through the automatic stages.
    ///
    /// Stages already in the log are skipped, so rerunning after an
    /// interruption only calls oracles for the work that is missing. Oracle
    /// calls run on a pool of `cfg.workers` threads; records are written by
    /// this thread only.
    pub fn run(
        &mut self,
        cfg: &RunConfig,
        labels: &dyn LabelOracle,
        boxes: &dyn BoxOracle,
        masks: &dyn MaskOracle,
    ) -> Result<RunSummary, PipelineError> {
        let todo: Vec<Candidate> = self
            .candidates
            .values()
            .filter(|c| c.status == Status::Pending && (!cfg.require_filter || c.filter.is_some()))
            .cloned()
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.max(1))
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;

        let mut summary = RunSummary {
            processed: todo.len(),
            ..RunSummary::default()
        };
        let ctx = StageContext {
            cfg,
            labels,
            boxes,
            masks,
            clock: Arc::clone(&self.clock),
            image_root: self.image_root.clone(),
            ontology: self.ontology.clone(),
        };
        std::thread::scope(|scope| -> Result<(), PipelineError> {
            let (tx, rx) = mpsc::channel::<Record>();
            let ctx = &ctx;
            scope.spawn(move || {
                pool.install(|| {
                    todo.into_par_iter().for_each_with(tx, |tx, c| {
                        advance(c, ctx, &mut |r| tx.send(r).is_ok());
                    })
                })
            });
            for r in rx {
                self.commit(r)?;
                summary.records_written += 1;
            }
            Ok(())
        })?;
        summary.status_counts = self.status_counts();
        Ok(summary)
    }

    /// Records a human filter decision on a pending candidate.
    pub fn record_filter(
        &mut self,
        id: &CandidateId,
        flags: FilterFlags,
        actor: &str,
        idempotency_key: Option<String>,
    ) -> Result<DecisionResult, PipelineError> {
        let c = self
            .get(id)
            .ok_or_else(|| PipelineError::UnknownCandidate(id.clone()))?;
        if let Some(prev) = &c.filter {
            if prev.flags == flags {
                return Ok(DecisionResult::Repeated);
            }
            return Err(conflict(c, "changing the filter decision"));
        }
        if c.status != Status::Pending || c.done(Stage::Label) {
            return Err(conflict(c, "filtering"));
        }
        self.commit(Record {
            candidate_id: id.clone(),
            stage: Stage::Filter,
            outcome: Outcome::Filtered { flags },
            timestamp: self.clock.now(),
            actor: actor.to_string(),
            idempotency_key,
        })?;
        Ok(DecisionResult::Applied)
    }

    /// Records a quality-review verdict. Repeating the verdict that settled the
    /// candidate is a no-op; any other decision on a settled candidate fails.
    pub fn record_review(
        &mut self,
        id: &CandidateId,
        verdict: Verdict,
        actor: &str,
        idempotency_key: Option<String>,
    ) -> Result<DecisionResult, PipelineError> {
        let c = self
            .get(id)
            .ok_or_else(|| PipelineError::UnknownCandidate(id.clone()))?;
        let settled_as = match c.status {
            Status::Approved => Some(Verdict::Approve),
            Status::Flagged(r) => Some(Verdict::Flag(r)),
            _ => None,
        };
        if settled_as == Some(verdict) {
            return Ok(DecisionResult::Repeated);
        }
        if c.status != Status::AwaitingReview {
            return Err(conflict(c, "reviewing"));
        }
        self.commit(Record {
            candidate_id: id.clone(),
            stage: Stage::Review,
            outcome: Outcome::Reviewed { verdict },
            timestamp: self.clock.now(),
            actor: actor.to_string(),
            idempotency_key,
        })?;
        Ok(DecisionResult::Applied)
    }

    /// Exports every approved candidate.
    pub fn export(&self) -> Result<Dataset, PipelineError> {
        export_dataset(
            self.candidates
                .values()
                .filter(|c| c.status == Status::Approved),
            &self.ontology,
        )
    }
}

fn conflict(c: &Candidate, action: &'static str) -> PipelineError {
    PipelineError::Conflict {
        candidate: c.id.clone(),
        status: c.status.to_string(),
        action,
    }
}

struct StageContext<'a> {
    cfg: &'a RunConfig,
    labels: &'a dyn LabelOracle,
    boxes: &'a dyn BoxOracle,
    masks: &'a dyn MaskOracle,
    clock: Arc<dyn Clock>,
    image_root: PathBuf,
    ontology: Ontology,
}

/// Runs the missing stages of one candidate, emitting a record per stage.
/// Stops at the first rejection or when `emit` reports the writer is gone.
fn advance(mut c: Candidate, ctx: &StageContext<'_>, emit: &mut dyn FnMut(Record) -> bool) {
    let mut step = |c: &mut Candidate, stage: Stage, outcome: Outcome| -> bool {
        let r = Record {
            candidate_id: c.id.clone(),
            stage,
            outcome,
            timestamp: ctx.clock.now(),
            actor: ctx.cfg.actor.clone(),
            idempotency_key: None,
        };
        c.apply(&r).is_ok() && emit(r) && c.status == Status::Pending
    };
    let reject = |reason: RejectReason, detail: String| Outcome::Rejected { reason, detail };

    if !c.done(Stage::Label) {
        let outcome = match ctx.labels.label(&c.description) {
            Ok(l) => Outcome::Labeled {
                label: l.map(|s| normalize_label(&s)).filter(|s| !s.is_empty()),
            },
            Err(e) => reject(RejectReason::OracleError, e.to_string()),
        };
        if !step(&mut c, Stage::Label, outcome) {
            return;
        }
    }

    let file = ctx.image_root.join(&c.image.path);
    if !c.done(Stage::Boxes) {
        let extent = c
            .image
            .extent()
            .map(Ok)
            .unwrap_or_else(|| image::image_dimensions(&file).map_err(|e| e.to_string()));
        let outcome = match extent {
            Err(e) => reject(RejectReason::UnreadableImage, e),
            Ok((width, height)) => {
                let img = OracleImage {
                    key: &c.image.path,
                    file: &file,
                    width,
                    height,
                };
                match ctx.boxes.boxes(&img, &ctx.cfg.prompt) {
                    Ok(boxes) => Outcome::Boxes {
                        boxes,
                        width,
                        height,
                    },
                    Err(e) => reject(RejectReason::OracleError, e.to_string()),
                }
            }
        };
        if !step(&mut c, Stage::Boxes, outcome) {
            return;
        }
    }

    if !c.done(Stage::Anomaly) {
        let outcome = if c.label.is_none() {
            reject(RejectReason::Anomaly, "no label".into())
        } else if c.boxes.len() != 1 {
            reject(RejectReason::Anomaly, format!("{} boxes", c.boxes.len()))
        } else {
            Outcome::Passed
        };
        if !step(&mut c, Stage::Anomaly, outcome) {
            return;
        }
    }

    if !c.done(Stage::Ontology) {
        let label = c.label.clone().unwrap_or_default();
        let outcome = match map_label(&label, &ctx.ontology) {
            Ok(cat) => Outcome::Mapped { category: cat.id },
            Err(e @ LabelRejection::Excluded { .. }) => {
                reject(RejectReason::ExcludedCategory, e.to_string())
            }
            Err(e @ LabelRejection::Unknown(_)) => {
                reject(RejectReason::UnknownLabel, e.to_string())
            }
        };
        if !step(&mut c, Stage::Ontology, outcome) {
            return;
        }
    }

    if !c.done(Stage::Mask) {
        let Some((width, height)) = c.image.extent() else {
            return;
        };
        let img = OracleImage {
            key: &c.image.path,
            file: &file,
            width,
            height,
        };
        let outcome = match ctx.masks.mask(&img, &c.boxes[0].bbox) {
            Err(e) => reject(RejectReason::OracleError, e.to_string()),
            Ok(m) if (m.width, m.height) != (width, height) => reject(
                RejectReason::BadMask,
                format!("mask is {}x{}, image {width}x{height}", m.width, m.height),
            ),
            Ok(m) => match m.check() {
                Err(e) => reject(RejectReason::BadMask, e.to_string()),
                Ok(()) => Outcome::Masked { mask: m },
            },
        };
        step(&mut c, Stage::Mask, outcome);
    }
}
