//! Evaluation and curation toolkit for object-detection and instance
//! segmentation datasets.
//!
//! - [`datamodel`]: COCO-style datasets, detections and validation
//! - [`geometry`]: IoU, run-length masks, union boxes
//! - [`metrics`]: frequency-weighted mAP / mAR evaluation
//! - [`stats`]: class distributions, relative mask sizes, stratified splits
//! - [`augment`]: flip, photometric, union-box crop and scale-jitter transforms
//! - [`pipeline`]: model-assisted annotation pipeline and review state machine

pub mod augment;
pub mod datamodel;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod stats;

pub use datamodel::{
    BBox, Category, CategoryId, Dataset, Detection, GroundTruthAnnotation, ImageId, ImageRecord,
    MaskRle,
};
