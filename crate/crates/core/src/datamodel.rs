//! Dataset and prediction types plus COCO-style annotation I/O.
//!
//! Annotation files follow the COCO JSON dialect: `images`, `annotations` and
//! `categories` arrays, with instance masks stored as uncompressed
//! column-major run-length encodings (`{"size": [h, w], "counts": [...]}`).
//! Detection files are COCO results arrays.
//!
//! Serialization is canonical: records are sorted by id and written with a
//! fixed layout, so `save -> load -> save` is byte-identical.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                Self(v)
            }
        }
    };
}

id_newtype!(
    /// Identifier of an [`ImageRecord`].
    ImageId
);
id_newtype!(
    /// Identifier of a [`Category`].
    CategoryId
);
id_newtype!(
    /// Identifier of a [`GroundTruthAnnotation`].
    AnnotationId
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
    #[serde(default)]
    pub supercategory: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

impl ImageRecord {
    pub fn pixel_count(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

/// Axis-aligned box in pixel units, top-left origin, `x` right and `y` down.
///
/// Serialized as the COCO `[x, y, w, h]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Whether the box lies inside a `width x height` canvas.
    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.right() <= f64::from(width)
            && self.bottom() <= f64::from(height)
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Uncompressed COCO run-length encoding of a binary mask.
///
/// Runs alternate background/foreground over a column-major scan and always
/// start with a (possibly empty) background run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRle", into = "RawRle")]
pub struct MaskRle {
    pub height: u32,
    pub width: u32,
    pub counts: Vec<u32>,
}

impl MaskRle {
    pub fn new(height: u32, width: u32, counts: Vec<u32>) -> Self {
        Self {
            height,
            width,
            counts,
        }
    }

    pub fn pixel_count(&self) -> u64 {
        u64::from(self.height) * u64::from(self.width)
    }

    pub fn counts_sum(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Number of foreground pixels (the odd-indexed runs).
    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| u64::from(c))
            .sum()
    }

    /// Structural problems with the run list, if any.
    pub fn check(&self) -> Result<(), RleDefect> {
        let sum = self.counts_sum();
        if sum != self.pixel_count() {
            return Err(RleDefect::LengthMismatch {
                expected: self.pixel_count(),
                actual: sum,
            });
        }
        if let Some(pos) = self.counts.windows(2).position(|w| w[0] == 0 && w[1] == 0) {
            return Err(RleDefect::ConsecutiveZeroRuns { at: pos });
        }
        Ok(())
    }

    /// Tight bounding box of the foreground, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        let h = u64::from(self.height);
        if h == 0 {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (u64::MAX, u64::MAX, 0u64, 0u64);
        let mut pos = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            let c = u64::from(c);
            if i % 2 == 1 && c > 0 {
                let (start, end) = (pos, pos + c - 1);
                let (cs, ce) = (start / h, end / h);
                x0 = x0.min(cs);
                x1 = x1.max(ce);
                if cs == ce {
                    y0 = y0.min(start % h);
                    y1 = y1.max(end % h);
                } else {
                    // a run crossing a column boundary touches both the last and first rows
                    y0 = 0;
                    y1 = h - 1;
                }
            }
            pos += c;
        }
        (x0 != u64::MAX).then(|| {
            BBox::new(
                x0 as f64,
                y0 as f64,
                (x1 - x0 + 1) as f64,
                (y1 - y0 + 1) as f64,
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleDefect {
    #[error("run lengths sum to {actual}, expected {expected}")]
    LengthMismatch { expected: u64, actual: u64 },
    #[error("two consecutive zero-length runs at position {at}")]
    ConsecutiveZeroRuns { at: usize },
}

#[derive(Serialize, Deserialize)]
struct RawRle {
    size: [u32; 2],
    counts: RawCounts,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawCounts {
    Runs(Vec<u32>),
    Packed(String),
}

impl TryFrom<RawRle> for MaskRle {
    type Error = String;

    fn try_from(raw: RawRle) -> Result<Self, Self::Error> {
        match raw.counts {
            RawCounts::Runs(counts) => Ok(MaskRle::new(raw.size[0], raw.size[1], counts)),
            RawCounts::Packed(_) => Err("compressed (string) RLE counts are not supported".into()),
        }
    }
}

impl From<MaskRle> for RawRle {
    fn from(m: MaskRle) -> Self {
        RawRle {
            size: [m.height, m.width],
            counts: RawCounts::Runs(m.counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthAnnotation {
    pub id: AnnotationId,
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub bbox: BBox,
    pub mask: Option<MaskRle>,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub bbox: BBox,
    pub mask: Option<MaskRle>,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<GroundTruthAnnotation>,
    pub categories: Vec<Category>,
}

impl Dataset {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (
            self.images.len(),
            self.annotations.len(),
            self.categories.len(),
        )
    }

    /// Sorts every record list by id.
    pub fn canonicalize(&mut self) {
        self.images.sort_by_key(|i| i.id);
        self.annotations.sort_by_key(|a| a.id);
        self.categories.sort_by_key(|c| c.id);
    }

    pub fn image(&self, id: ImageId) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn category(&self, id: CategoryId) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn image_index(&self) -> BTreeMap<ImageId, &ImageRecord> {
        self.images.iter().map(|i| (i.id, i)).collect()
    }
}

/// Record a validation violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Image(ImageId),
    Annotation(AnnotationId),
    Category(CategoryId),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Image(id) => write!(f, "image {id}"),
            Subject::Annotation(id) => write!(f, "annotation {id}"),
            Subject::Category(id) => write!(f, "category {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    NonPositiveId,
    DuplicateId,
    EmptyName,
    EmptyExtent,
    MissingImage(ImageId),
    MissingCategory(CategoryId),
    NonPositiveBoxSize,
    NonFiniteBox,
    BoxOutsideImage,
    MalformedMask(RleDefect),
    MaskExtentMismatch { mask: (u32, u32), image: (u32, u32) },
    AreaMismatch { stated: f64, mask: u64 },
    InvalidArea(f64),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::NonPositiveId => write!(f, "id must be positive"),
            Rule::DuplicateId => write!(f, "id is not unique"),
            Rule::EmptyName => write!(f, "name is empty"),
            Rule::EmptyExtent => write!(f, "width and height must be at least 1"),
            Rule::MissingImage(id) => write!(f, "references missing image {id}"),
            Rule::MissingCategory(id) => write!(f, "references missing category {id}"),
            Rule::NonPositiveBoxSize => write!(f, "bbox width and height must be positive"),
            Rule::NonFiniteBox => write!(f, "bbox has non-finite coordinates"),
            Rule::BoxOutsideImage => write!(f, "bbox extends outside the image"),
            Rule::MalformedMask(d) => write!(f, "malformed mask: {d}"),
            Rule::MaskExtentMismatch { mask, image } => write!(
                f,
                "mask size {}x{} differs from image size {}x{}",
                mask.0, mask.1, image.0, image.1
            ),
            Rule::AreaMismatch { stated, mask } => {
                write!(f, "area {stated} differs from mask foreground {mask}")
            }
            Rule::InvalidArea(a) => write!(f, "area {a} is negative or non-finite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: Subject,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

/// Checks every structural invariant of `d`. An empty result means valid.
pub fn validate(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject, rule| out.push(Violation { subject, rule });

    let mut seen = HashSet::new();
    for c in &d.categories {
        let s = Subject::Category(c.id);
        if c.id.0 == 0 {
            push(s, Rule::NonPositiveId);
        }
        if !seen.insert(c.id) {
            push(s, Rule::DuplicateId);
        }
        if c.name.trim().is_empty() {
            push(s, Rule::EmptyName);
        }
    }

    let mut images = BTreeMap::new();
    for img in &d.images {
        let s = Subject::Image(img.id);
        if img.id.0 == 0 {
            push(s, Rule::NonPositiveId);
        }
        if images.insert(img.id, img).is_some() {
            push(s, Rule::DuplicateId);
        }
        if img.width == 0 || img.height == 0 {
            push(s, Rule::EmptyExtent);
        }
    }

    let mut seen = HashSet::new();
    for a in &d.annotations {
        let s = Subject::Annotation(a.id);
        if a.id.0 == 0 {
            push(s, Rule::NonPositiveId);
        }
        if !seen.insert(a.id) {
            push(s, Rule::DuplicateId);
        }
        if !d.categories.iter().any(|c| c.id == a.category_id) {
            push(s, Rule::MissingCategory(a.category_id));
        }
        let b = a.bbox;
        if ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) {
            push(s, Rule::NonFiniteBox);
        } else if b.w <= 0.0 || b.h <= 0.0 {
            push(s, Rule::NonPositiveBoxSize);
        }
        if !(a.area.is_finite() && a.area >= 0.0) {
            push(s, Rule::InvalidArea(a.area));
        }
        let image = images.get(&a.image_id);
        match image {
            None => push(s, Rule::MissingImage(a.image_id)),
            Some(img) => {
                if b.w > 0.0 && b.h > 0.0 && !b.fits_within(img.width, img.height) {
                    push(s, Rule::BoxOutsideImage);
                }
            }
        }
        if let Some(m) = &a.mask {
            if let Err(defect) = m.check() {
                push(s, Rule::MalformedMask(defect));
            } else if a.area != m.area() as f64 {
                push(
                    s,
                    Rule::AreaMismatch {
                        stated: a.area,
                        mask: m.area(),
                    },
                );
            }
            if let Some(img) = image {
                if (m.height, m.width) != (img.height, img.width) {
                    push(
                        s,
                        Rule::MaskExtentMismatch {
                            mask: (m.height, m.width),
                            image: (img.height, img.width),
                        },
                    );
                }
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported segmentation on annotation {id}: {what}")]
    UnsupportedSegmentation { id: u64, what: String },
    #[error("dataset is invalid: {}", summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("detection {index}: score {score} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("detection {index}: {reason}")]
    InvalidDetection { index: usize, reason: String },
}

fn summarize(v: &[Violation]) -> String {
    let mut s = v
        .iter()
        .take(5)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ");
    if v.len() > 5 {
        s.push_str(&format!("; and {} more", v.len() - 5));
    }
    s
}

#[derive(Deserialize)]
struct RawDataset {
    #[serde(default)]
    images: Vec<ImageRecord>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    categories: Vec<Category>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    id: AnnotationId,
    image_id: ImageId,
    category_id: CategoryId,
    bbox: BBox,
    #[serde(default)]
    segmentation: Option<Value>,
    #[serde(default)]
    area: Option<f64>,
}

fn parse_segmentation(id: u64, seg: Option<Value>) -> Result<Option<MaskRle>, DataError> {
    match seg {
        None | Some(Value::Null) => Ok(None),
        Some(v @ Value::Object(_)) => {
            serde_json::from_value(v)
                .map(Some)
                .map_err(|e| DataError::UnsupportedSegmentation {
                    id,
                    what: e.to_string(),
                })
        }
        Some(Value::Array(a)) if a.is_empty() => Ok(None),
        Some(_) => Err(DataError::UnsupportedSegmentation {
            id,
            what: "only RLE objects are accepted (polygons are not)".into(),
        }),
    }
}

/// Parses COCO annotation text without validating it.
pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset, DataError> {
    let raw: RawDataset = serde_json::from_slice(bytes)?;
    let mut annotations = Vec::with_capacity(raw.annotations.len());
    for a in raw.annotations {
        let mask = parse_segmentation(a.id.0, a.segmentation)?;
        let area = match (a.area, &mask) {
            (Some(area), _) => area,
            (None, Some(m)) => m.area() as f64,
            (None, None) => a.bbox.area(),
        };
        annotations.push(GroundTruthAnnotation {
            id: a.id,
            image_id: a.image_id,
            category_id: a.category_id,
            bbox: a.bbox,
            mask,
            area,
        });
    }
    Ok(Dataset {
        images: raw.images,
        annotations,
        categories: raw.categories,
    })
}

/// Loads and validates a COCO annotation file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DataError::Read {
        path: path.to_owned(),
        source,
    })?;
    let d = parse_dataset(&bytes)?;
    let violations = validate(&d);
    if violations.is_empty() {
        Ok(d)
    } else {
        Err(DataError::Invalid(violations))
    }
}

#[derive(Serialize)]
struct OutDataset<'a> {
    images: Vec<&'a ImageRecord>,
    annotations: Vec<OutAnnotation<'a>>,
    categories: Vec<&'a Category>,
}

#[derive(Serialize)]
struct OutAnnotation<'a> {
    id: AnnotationId,
    image_id: ImageId,
    category_id: CategoryId,
    bbox: BBox,
    #[serde(skip_serializing_if = "Option::is_none")]
    segmentation: Option<&'a MaskRle>,
    area: f64,
}

/// Canonical serialized form of `d`: records sorted by id, pretty-printed.
pub fn to_canonical_json(d: &Dataset) -> Vec<u8> {
    let mut images: Vec<_> = d.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let mut categories: Vec<_> = d.categories.iter().collect();
    categories.sort_by_key(|c| c.id);
    let mut anns: Vec<_> = d.annotations.iter().collect();
    anns.sort_by_key(|a| a.id);
    let out = OutDataset {
        images,
        annotations: anns
            .into_iter()
            .map(|a| OutAnnotation {
                id: a.id,
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: a.bbox,
                segmentation: a.mask.as_ref(),
                area: a.area,
            })
            .collect(),
        categories,
    };
    let mut bytes = serde_json::to_vec_pretty(&out).expect("dataset serialization is infallible");
    bytes.push(b'\n');
    bytes
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, to_canonical_json(d)).map_err(|source| DataError::Write {
        path: path.to_owned(),
        source,
    })
}

#[derive(Deserialize)]
struct RawDetection {
    image_id: ImageId,
    category_id: CategoryId,
    #[serde(default)]
    bbox: Option<BBox>,
    score: f64,
    #[serde(default)]
    segmentation: Option<Value>,
}

#[derive(Serialize)]
struct OutDetection<'a> {
    image_id: ImageId,
    category_id: CategoryId,
    bbox: BBox,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    segmentation: Option<&'a MaskRle>,
}

/// Parses a COCO results array, preserving order and scores.
pub fn parse_detections(bytes: &[u8]) -> Result<Vec<Detection>, DataError> {
    let raw: Vec<RawDetection> = serde_json::from_slice(bytes)?;
    raw.into_iter()
        .enumerate()
        .map(|(index, r)| {
            if !(0.0..=1.0).contains(&r.score) {
                return Err(DataError::ScoreOutOfRange {
                    index,
                    score: r.score,
                });
            }
            let mask = parse_segmentation(index as u64, r.segmentation)?;
            if let Some(m) = &mask {
                m.check().map_err(|d| DataError::InvalidDetection {
                    index,
                    reason: d.to_string(),
                })?;
            }
            let bbox = match (r.bbox, &mask) {
                (Some(b), _) => b,
                (None, Some(m)) => m.bbox().unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0)),
                (None, None) => {
                    return Err(DataError::InvalidDetection {
                        index,
                        reason: "needs a bbox or a segmentation".into(),
                    })
                }
            };
            let b = bbox;
            if ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) || b.w < 0.0 || b.h < 0.0 {
                return Err(DataError::InvalidDetection {
                    index,
                    reason: "bbox has negative size".into(),
                });
            }
            Ok(Detection {
                image_id: r.image_id,
                category_id: r.category_id,
                bbox,
                mask,
                score: r.score,
            })
        })
        .collect()
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DataError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_detections(&bytes)
}

pub fn detections_to_json(dets: &[Detection]) -> Vec<u8> {
    let out: Vec<_> = dets
        .iter()
        .map(|d| OutDetection {
            image_id: d.image_id,
            category_id: d.category_id,
            bbox: d.bbox,
            score: d.score,
            segmentation: d.mask.as_ref(),
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&out).expect("detection serialization is infallible");
    bytes.push(b'\n');
    bytes
}

pub fn save_detections(dets: &[Detection], path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, detections_to_json(dets)).map_err(|source| DataError::Write {
        path: path.to_owned(),
        source,
    })
}
