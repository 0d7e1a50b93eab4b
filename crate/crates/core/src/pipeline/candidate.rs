use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datamodel::{BBox, CategoryId, MaskRle};

use super::filter::FilterDecision;
use super::log::{Outcome, Record};

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateId(pub String);

impl CandidateId {
    /// `{product}_{index}`; unique because product ids are unique and the
    /// suffix after the last underscore is always the image index.
    pub fn new(product: &str, index: usize) -> Self {
        Self(format!("{product}_{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Image path as written in the manifest; the extent is filled in once known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl ImageRef {
    pub fn extent(&self) -> Option<(u32, u32)> {
        Some((self.width?, self.height?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Filter,
    Label,
    Boxes,
    Anomaly,
    Ontology,
    Mask,
    Review,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    OracleError,
    Anomaly,
    BadMask,
    ExcludedCategory,
    UnknownLabel,
    FilteredOut,
    UnreadableImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    BadLabel,
    BadBox,
    BadMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approve,
    Flag(FlagReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "reason")]
pub enum Status {
    Pending,
    AutoRejected(RejectReason),
    AwaitingReview,
    Approved,
    Flagged(FlagReason),
}

impl Status {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            Status::AutoRejected(_) | Status::Approved | Status::Flagged(_)
        )
    }
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pending => f.write_str("pending"),
            Status::AutoRejected(r) => write!(f, "auto_rejected({})", snake(r)),
            Status::AwaitingReview => f.write_str("awaiting_review"),
            Status::Approved => f.write_str("approved"),
            Status::Flagged(r) => write!(f, "flagged({})", snake(r)),
        }
    }
}

/// One product image moving through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub product_id: String,
    pub description: String,
    pub image: ImageRef,
    pub filter: Option<FilterDecision>,
    pub label: Option<String>,
    pub boxes: Vec<ScoredBox>,
    pub category: Option<CategoryId>,
    pub mask: Option<MaskRle>,
    pub status: Status,
    /// Free-text detail of an automatic rejection.
    pub rejection: Option<String>,
    /// Idempotency key of the human decision that settled the candidate.
    pub decision_key: Option<String>,
    pub completed: Vec<Stage>,
}

impl Candidate {
    pub fn new(product_id: &str, index: usize, description: &str, image: ImageRef) -> Self {
        Self {
            id: CandidateId::new(product_id, index),
            product_id: product_id.to_string(),
            description: description.to_string(),
            image,
            filter: None,
            label: None,
            boxes: Vec::new(),
            category: None,
            mask: None,
            status: Status::Pending,
            rejection: None,
            decision_key: None,
            completed: Vec::new(),
        }
    }

    pub fn done(&self, stage: Stage) -> bool {
        self.completed.contains(&stage)
    }

    /// Applies one log record, refusing anything that is not a legal next step.
    pub fn apply(&mut self, r: &Record) -> Result<(), String> {
        if self.done(r.stage) {
            return Err(format!("stage {:?} already recorded", r.stage));
        }
        let needs = |c: &Self, stages: &[Stage]| -> Result<(), String> {
            match stages.iter().find(|s| !c.done(**s)) {
                Some(s) => Err(format!("stage {:?} needs {s:?} first", r.stage)),
                None => Ok(()),
            }
        };
        match r.stage {
            Stage::Review => {
                if self.status != Status::AwaitingReview {
                    return Err(format!("review on a {} candidate", self.status));
                }
            }
            Stage::Filter => {
                if self.status != Status::Pending || self.done(Stage::Label) {
                    return Err("filter decision after automatic stages began".into());
                }
            }
            _ => {
                if self.status != Status::Pending {
                    return Err(format!(
                        "{:?} stage on a {} candidate",
                        r.stage, self.status
                    ));
                }
            }
        }
        match r.stage {
            Stage::Filter | Stage::Label | Stage::Review => {}
            Stage::Boxes => needs(self, &[Stage::Label])?,
            Stage::Anomaly => needs(self, &[Stage::Label, Stage::Boxes])?,
            Stage::Ontology => needs(self, &[Stage::Anomaly])?,
            Stage::Mask => needs(self, &[Stage::Ontology])?,
        }

        match (&r.stage, &r.outcome) {
            (Stage::Filter, Outcome::Filtered { flags }) => {
                self.filter = Some(FilterDecision {
                    flags: *flags,
                    decided_at: r.timestamp,
                    annotator: r.actor.clone(),
                });
                self.decision_key = r.idempotency_key.clone();
                if flags.any() {
                    self.status = Status::AutoRejected(RejectReason::FilteredOut);
                }
            }
            (Stage::Label, Outcome::Labeled { label }) => self.label = label.clone(),
            (
                Stage::Boxes,
                Outcome::Boxes {
                    boxes,
                    width,
                    height,
                },
            ) => {
                if *width == 0 || *height == 0 {
                    return Err("image extent must be positive".into());
                }
                self.boxes = boxes.clone();
                self.image.width = Some(*width);
                self.image.height = Some(*height);
            }
            (Stage::Anomaly, Outcome::Passed) => {
                if self.label.is_none() || self.boxes.len() != 1 {
                    return Err("anomalous candidate cannot pass the anomaly filter".into());
                }
            }
            (Stage::Ontology, Outcome::Mapped { category }) => self.category = Some(*category),
            (Stage::Mask, Outcome::Masked { mask }) => {
                if Some((mask.width, mask.height)) != self.image.extent() || mask.check().is_err() {
                    return Err("mask does not fit the image".into());
                }
                self.mask = Some(mask.clone());
                self.status = Status::AwaitingReview;
            }
            (Stage::Review, Outcome::Reviewed { verdict }) => {
                self.status = match verdict {
                    Verdict::Approve => Status::Approved,
                    Verdict::Flag(reason) => Status::Flagged(*reason),
                };
                self.decision_key = r.idempotency_key.clone();
            }
            (s, Outcome::Rejected { reason, detail })
                if !matches!(s, Stage::Filter | Stage::Review) =>
            {
                self.status = Status::AutoRejected(*reason);
                self.rejection = (!detail.is_empty()).then(|| detail.clone());
            }
            (s, o) => return Err(format!("outcome {o:?} does not belong to stage {s:?}")),
        }
        self.completed.push(r.stage);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_display_and_serde() {
        let s = Status::AutoRejected(RejectReason::OracleError);
        assert_eq!(s.to_string(), "auto_rejected(oracle_error)");
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"state":"auto_rejected","reason":"oracle_error"}"#
        );
        assert_eq!(
            Status::Flagged(FlagReason::BadMask).to_string(),
            "flagged(bad_mask)"
        );
        assert!(!Status::AwaitingReview.is_terminal());
        assert!(Status::Approved.is_terminal());
    }

    #[test]
    fn candidate_ids() {
        assert_eq!(CandidateId::new("p-17", 2).as_str(), "p-17_2");
    }
}
