use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Exclusion criteria checked by a human before automatic annotation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilterFlags {
    #[serde(default)]
    pub multiple_objects: bool,
    #[serde(default)]
    pub human_body_visible: bool,
    #[serde(default)]
    pub extreme_closeup: bool,
}

impl FilterFlags {
    pub fn any(&self) -> bool {
        self.multiple_objects || self.human_body_visible || self.extreme_closeup
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub flags: FilterFlags,
    pub decided_at: DateTime<Utc>,
    pub annotator: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOutcome {
    Kept,
    Excluded,
}

/// An image is excluded as soon as any criterion applies.
pub fn apply_filter(decision: &FilterDecision) -> FilterOutcome {
    if decision.flags.any() {
        FilterOutcome::Excluded
    } else {
        FilterOutcome::Kept
    }
}
