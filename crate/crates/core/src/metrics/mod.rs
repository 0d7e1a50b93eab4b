//! Class-frequency-weighted detection metrics.
//!
//! Detections are matched greedily per (image, category) pair, precision and
//! recall are taken as functions of the confidence threshold, and per-class
//! interpolated AP and top-k AR are combined with weights proportional to
//! each class's share of ground-truth annotations:
//!
//! ```text
//! mAP_w@phi = sum_c w_c * AP_c@phi            w_c = n_c / N
//! mAP_w     = mean over phi of mAP_w@phi
//! mAR_w^k   = sum_c w_c * AR_c^k
//! ```
//!
//! Classes without ground truth carry no weight and get no AP entry.

mod curve;
mod evaluate;
mod matching;
mod recall;
mod report;
mod weighting;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{AnnotationId, CategoryId, ImageId};
use crate::geometry::GeometryError;

pub use curve::{interpolated_ap, operating_points, precision_recall, OperatingPoint};
pub use evaluate::{evaluate, EvalReport};
pub use matching::{match_detections, MatchResult};
pub use recall::ar_top_k;
pub use report::{render_per_class, render_table, MetricSet, TableRow};
pub use weighting::{weighted_map, weighted_map_at_iou, weighted_mar_top_k, ClassWeights};

/// Which overlap measure drives matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouKind {
    Box,
    Mask,
}

impl std::fmt::Display for IouKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IouKind::Box => "box",
            IouKind::Mask => "mask",
        })
    }
}

impl std::str::FromStr for IouKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "box" | "bbox" => Ok(IouKind::Box),
            "mask" | "segm" => Ok(IouKind::Mask),
            other => Err(format!("unknown evaluation kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub recall_grid: Vec<f64>,
    pub score_floor: f64,
    pub top_k_values: Vec<usize>,
    pub kind: IouKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            recall_grid: (0..=100).map(|i| i as f64 / 100.0).collect(),
            score_floor: 0.05,
            top_k_values: vec![1, 100],
            kind: IouKind::Box,
        }
    }
}

impl EvalConfig {
    pub fn with_kind(kind: IouKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), MetricsError> {
        let strictly_increasing_unit = |v: &[f64]| {
            !v.is_empty()
                && v.iter().all(|x| (0.0..=1.0).contains(x))
                && v.windows(2).all(|w| w[0] < w[1])
        };
        if !strictly_increasing_unit(&self.iou_thresholds) {
            return Err(MetricsError::Config(
                "IoU thresholds must be non-empty, strictly increasing and within [0, 1]".into(),
            ));
        }
        if !strictly_increasing_unit(&self.recall_grid) {
            return Err(MetricsError::Config(
                "recall grid must be non-empty, strictly increasing and within [0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.score_floor) {
            return Err(MetricsError::Config("score floor must be in [0, 1)".into()));
        }
        if self.top_k_values.is_empty() || self.top_k_values.contains(&0) {
            return Err(MetricsError::Config(
                "top-k values must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Position of `phi` among the configured thresholds.
    pub fn threshold_index(&self, phi: f64) -> Option<usize> {
        threshold_index(&self.iou_thresholds, phi)
    }
}

pub(crate) fn threshold_index(thresholds: &[f64], phi: f64) -> Option<usize> {
    thresholds.iter().position(|t| (t - phi).abs() < 1e-9)
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("IoU threshold {0} is not part of the evaluation")]
    UnknownThreshold(f64),
    #[error("detection {index} references unknown image {image}")]
    UnknownImage { index: usize, image: ImageId },
    #[error("detection {index} references unknown category {category}")]
    UnknownCategory { index: usize, category: CategoryId },
    #[error("ground truth annotation {0} references an unknown image")]
    UnknownGroundTruthImage(AnnotationId),
    #[error("mask evaluation needs a mask on ground truth annotation {0}")]
    MissingGroundTruthMask(AnnotationId),
    #[error("class weights and values cover different classes: {0}")]
    WeightKeyMismatch(String),
    #[error("per-class values have inconsistent threshold counts")]
    RaggedThresholds,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
