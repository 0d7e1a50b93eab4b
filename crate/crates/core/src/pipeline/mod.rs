//! Model-assisted annotation pipeline.
//!
//! ```text
//! manifest -> candidates (one per product image)
//!          -> filter (human, optional)
//!          -> label oracle -> box oracle -> anomaly filter
//!          -> ontology mapping -> mask oracle
//!          -> quality review (human) -> export
//! ```
//!
//! Every stage outcome is appended to a [`DecisionLog`]; candidate state is the
//! fold of the log, so a run can stop at any point and resume without calling
//! an oracle twice for the same stage.

mod candidate;
mod export;
mod filter;
mod log;
mod manifest;
mod ontology;
mod oracle;
mod workspace;

use thiserror::Error;

pub use candidate::{
    Candidate, CandidateId, FlagReason, ImageRef, RejectReason, ScoredBox, Stage, Status, Verdict,
};
pub use export::export_dataset;
pub use filter::{apply_filter, FilterDecision, FilterFlags, FilterOutcome};
pub use log::{fold, parse_records, Clock, DecisionLog, FixedClock, Outcome, Record, SystemClock};
pub use manifest::{
    candidates_for, ingest, ingest_file, Ingested, ManifestImage, ProductEntry, Skipped,
};
pub use ontology::{map_label, normalize_label, LabelRejection, Ontology};
pub use oracle::{
    BoxOracle, LabelOracle, MaskOracle, OracleError, OracleImage, RectMaskOracle, TableBoxOracle,
    TableLabelOracle,
};
pub use workspace::{DecisionResult, RunConfig, RunSummary, Workspace};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("duplicate product id {0:?}")]
    DuplicateProduct(String),
    #[error("decision log line {line}: {message}")]
    LogParse { line: usize, message: String },
    #[error("decision log record {index} for {candidate}: {message}")]
    BadTransition {
        index: usize,
        candidate: CandidateId,
        message: String,
    },
    #[error("unknown candidate {0}")]
    UnknownCandidate(CandidateId),
    #[error("candidate {candidate} is {status}; {action} is not allowed")]
    Conflict {
        candidate: CandidateId,
        status: String,
        action: &'static str,
    },
    #[error("invalid filter decision: {0}")]
    InvalidDecision(String),
    #[error("export aborted at candidate {candidate}: {message}")]
    Export {
        candidate: CandidateId,
        message: String,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        PipelineError::Io {
            context: context.into(),
            source,
        }
    }
}
