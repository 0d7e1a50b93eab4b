//! Model interfaces used by the automatic stages, with table-driven mocks.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::datamodel::{BBox, MaskRle};
use crate::geometry::{rle_encode, BitMask};

use super::candidate::ScoredBox;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle timed out")]
    Timeout,
    #[error("oracle failed: {0}")]
    Failed(String),
}

/// What the box and mask oracles see of an image.
#[derive(Debug, Clone, Copy)]
pub struct OracleImage<'a> {
    /// Path as written in the manifest.
    pub key: &'a str,
    /// Path resolved against the image root.
    pub file: &'a Path,
    pub width: u32,
    pub height: u32,
}

/// Product description to apparel label. `None` means no label.
pub trait LabelOracle: Send + Sync {
    fn label(&self, description: &str) -> Result<Option<String>, OracleError>;
}

/// Image and text prompt to scored boxes.
pub trait BoxOracle: Send + Sync {
    fn boxes(&self, image: &OracleImage<'_>, prompt: &str) -> Result<Vec<ScoredBox>, OracleError>;
}

/// Image and box to a mask over the whole image.
pub trait MaskOracle: Send + Sync {
    fn mask(&self, image: &OracleImage<'_>, bbox: &BBox) -> Result<MaskRle, OracleError>;
}

impl<F> LabelOracle for F
where
    F: Fn(&str) -> Result<Option<String>, OracleError> + Send + Sync,
{
    fn label(&self, description: &str) -> Result<Option<String>, OracleError> {
        self(description)
    }
}

impl<F> BoxOracle for F
where
    F: Fn(&OracleImage<'_>, &str) -> Result<Vec<ScoredBox>, OracleError> + Send + Sync,
{
    fn boxes(&self, image: &OracleImage<'_>, prompt: &str) -> Result<Vec<ScoredBox>, OracleError> {
        self(image, prompt)
    }
}

impl<F> MaskOracle for F
where
    F: Fn(&OracleImage<'_>, &BBox) -> Result<MaskRle, OracleError> + Send + Sync,
{
    fn mask(&self, image: &OracleImage<'_>, bbox: &BBox) -> Result<MaskRle, OracleError> {
        self(image, bbox)
    }
}

/// Labels looked up by exact description; unknown descriptions get no label.
#[derive(Debug, Default)]
pub struct TableLabelOracle {
    table: HashMap<String, Result<Option<String>, OracleError>>,
    calls: AtomicUsize,
}

impl TableLabelOracle {
    pub fn new(table: HashMap<String, Result<Option<String>, OracleError>>) -> Self {
        Self {
            table,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_labels<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(k, v)| (k.into(), Ok(Some(v.into()))))
                .collect(),
        )
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LabelOracle for TableLabelOracle {
    fn label(&self, description: &str) -> Result<Option<String>, OracleError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.table.get(description).cloned().unwrap_or(Ok(None))
    }
}

/// Boxes looked up by manifest path; unknown images get one box covering the
/// whole image.
#[derive(Debug, Default)]
pub struct TableBoxOracle {
    table: HashMap<String, Result<Vec<ScoredBox>, OracleError>>,
    calls: AtomicUsize,
}

impl TableBoxOracle {
    pub fn new(table: HashMap<String, Result<Vec<ScoredBox>, OracleError>>) -> Self {
        Self {
            table,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl BoxOracle for TableBoxOracle {
    fn boxes(&self, image: &OracleImage<'_>, _prompt: &str) -> Result<Vec<ScoredBox>, OracleError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.table.get(image.key).cloned().unwrap_or_else(|| {
            Ok(vec![ScoredBox {
                bbox: BBox::new(0.0, 0.0, f64::from(image.width), f64::from(image.height)),
                score: 1.0,
            }])
        })
    }
}

/// Fills the box rectangle (rounded to the pixel grid).
#[derive(Debug, Default)]
pub struct RectMaskOracle {
    calls: AtomicUsize,
}

impl RectMaskOracle {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl MaskOracle for RectMaskOracle {
    fn mask(&self, image: &OracleImage<'_>, bbox: &BBox) -> Result<MaskRle, OracleError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(rle_encode(&BitMask::from_box(
            image.height,
            image.width,
            bbox,
        )))
    }
}
