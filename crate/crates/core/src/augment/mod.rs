//! Training-time augmentations for detection and instance segmentation samples.
//!
//! Four transforms are provided: horizontal flip, photometric distortion,
//! cropping to the union of all boxes, and large-scale jitter (rescale the
//! content and restore the canvas by padding or cropping). [`apply_pipeline`]
//! applies each with its own probability in the order
//! flip, photometric, crop, jitter.

mod geometric;
mod photometric;

use image::RgbImage;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{BBox, CategoryId};
use crate::geometry::BitMask;

pub use geometric::{box_crop, horizontal_flip, jitter_with_anchor, large_scale_jitter};
pub use photometric::{
    apply_photometric, photometric_distortion, PhotometricConfig, PhotometricParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("box crop needs at least one box")]
    NoBoxes,
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error("jitter scale {0} must be positive and finite")]
    BadScale(f64),
}

/// One annotated object: its box, optional mask and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub bbox: BBox,
    pub mask: Option<BitMask>,
    pub label: CategoryId,
}

/// An RGB image together with its annotated instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub raster: RgbImage,
    pub instances: Vec<Instance>,
}

impl Sample {
    pub fn new(raster: RgbImage, instances: Vec<Instance>) -> Result<Self, AugmentError> {
        let s = Self { raster, instances };
        s.check()?;
        Ok(s)
    }

    pub fn width(&self) -> u32 {
        self.raster.width()
    }

    pub fn height(&self) -> u32 {
        self.raster.height()
    }

    pub fn boxes(&self) -> Vec<BBox> {
        self.instances.iter().map(|i| i.bbox).collect()
    }

    pub fn labels(&self) -> Vec<CategoryId> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Boxes inside the canvas, masks matching its extent.
    pub fn check(&self) -> Result<(), AugmentError> {
        let (w, h) = (self.width(), self.height());
        for (i, inst) in self.instances.iter().enumerate() {
            let b = inst.bbox;
            if !(b.w > 0.0 && b.h > 0.0) {
                return Err(AugmentError::InvalidSample(format!(
                    "instance {i}: empty box"
                )));
            }
            if !b.fits_within(w, h) {
                return Err(AugmentError::InvalidSample(format!(
                    "instance {i}: box {b:?} outside {w}x{h} canvas"
                )));
            }
            if let Some(m) = &inst.mask {
                if (m.width(), m.height()) != (w, h) {
                    return Err(AugmentError::InvalidSample(format!(
                        "instance {i}: mask is {}x{}, canvas {w}x{h}",
                        m.width(),
                        m.height()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub flip_probability: f64,
    pub photometric_probability: f64,
    pub crop_probability: f64,
    pub jitter_probability: f64,
    pub jitter_scale_range: (f64, f64),
    pub pad_value: [u8; 3],
    /// Place jittered content at a random offset instead of the top-left corner.
    pub random_anchor: bool,
    pub photometric: PhotometricConfig,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            photometric_probability: 0.5,
            crop_probability: 0.5,
            jitter_probability: 0.5,
            jitter_scale_range: (0.1, 2.0),
            pad_value: [128, 128, 128],
            random_anchor: false,
            photometric: PhotometricConfig::default(),
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Every transform disabled.
    pub fn disabled() -> Self {
        Self {
            flip_probability: 0.0,
            photometric_probability: 0.0,
            crop_probability: 0.0,
            jitter_probability: 0.0,
            ..Self::default()
        }
    }

    /// Every transform always applied.
    pub fn always() -> Self {
        Self {
            flip_probability: 1.0,
            photometric_probability: 1.0,
            crop_probability: 1.0,
            jitter_probability: 1.0,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), AugmentError> {
        let probs = [
            self.flip_probability,
            self.photometric_probability,
            self.crop_probability,
            self.jitter_probability,
            self.photometric.step_probability,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(AugmentError::Config(
                "probabilities must be in [0, 1]".into(),
            ));
        }
        let (lo, hi) = self.jitter_scale_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(AugmentError::Config(format!(
                "jitter scale range ({lo}, {hi}) must be positive with min < max"
            )));
        }
        self.photometric.check()
    }

    /// Per-sample generator derived from the config seed.
    pub fn rng_for(&self, sample_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample_index);
        rng
    }
}

/// The random draws of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelinePlan {
    pub flip: bool,
    pub photometric: Option<PhotometricParams>,
    pub crop: bool,
    /// Scale and anchor fractions in `[0, 1]`.
    pub jitter: Option<(f64, (f64, f64))>,
}

impl PipelinePlan {
    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let flip = rng.random_bool(cfg.flip_probability);
        let photometric = rng
            .random_bool(cfg.photometric_probability)
            .then(|| PhotometricParams::sample(&cfg.photometric, rng));
        let crop = rng.random_bool(cfg.crop_probability);
        let jitter = rng.random_bool(cfg.jitter_probability).then(|| {
            let (lo, hi) = cfg.jitter_scale_range;
            let scale = rng.random_range(lo..=hi);
            let anchor = if cfg.random_anchor {
                (rng.random::<f64>(), rng.random::<f64>())
            } else {
                (0.0, 0.0)
            };
            (scale, anchor)
        });
        Self {
            flip,
            photometric,
            crop,
            jitter,
        }
    }

    pub fn apply(&self, s: &Sample, cfg: &AugmentConfig) -> Result<Sample, AugmentError> {
        let mut out = s.clone();
        if self.flip {
            out = horizontal_flip(&out);
        }
        if let Some(p) = &self.photometric {
            out = apply_photometric(&out, p);
        }
        if self.crop && !out.instances.is_empty() {
            out = box_crop(&out)?;
        }
        if let Some((scale, anchor)) = self.jitter {
            out = jitter_with_anchor(&out, scale, cfg.pad_value, anchor)?;
        }
        Ok(out)
    }
}

/// Applies each transform independently with its configured probability.
/// The box crop is skipped for samples without instances.
pub fn apply_pipeline<R: Rng + ?Sized>(
    s: &Sample,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Sample, AugmentError> {
    cfg.check()?;
    PipelinePlan::sample(cfg, rng).apply(s, cfg)
}

/// Original and augmented samples side by side with box outlines.
pub fn preview_composite(original: &Sample, augmented: &Sample) -> RgbImage {
    const GAP: u32 = 8;
    let w = original.width() + GAP + augmented.width();
    let h = original.height().max(augmented.height());
    let mut canvas = RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
    for (s, x0) in [(original, 0), (augmented, original.width() + GAP)] {
        image::imageops::replace(&mut canvas, &s.raster, i64::from(x0), 0);
        for inst in &s.instances {
            outline(&mut canvas, &inst.bbox, x0, image::Rgb([255, 0, 0]));
        }
    }
    canvas
}

fn outline(img: &mut RgbImage, b: &BBox, dx: u32, color: image::Rgb<u8>) {
    let x0 = b.x.floor().max(0.0) as u32 + dx;
    let y0 = b.y.floor().max(0.0) as u32;
    let x1 = (b.right().ceil() as u32 + dx)
        .saturating_sub(1)
        .min(img.width() - 1);
    let y1 = (b.bottom().ceil() as u32)
        .saturating_sub(1)
        .min(img.height() - 1);
    for x in x0..=x1 {
        img.put_pixel(x, y0, color);
        img.put_pixel(x, y1, color);
    }
    for y in y0..=y1 {
        img.put_pixel(x0, y, color);
        img.put_pixel(x1, y, color);
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Deterministic textured raster with rectangular instances.
    pub fn sample(w: u32, h: u32, boxes: &[(u32, u32, u32, u32)]) -> Sample {
        let raster = RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([
                (x * 7 % 256) as u8,
                (y * 11 % 256) as u8,
                ((x + y) * 3 % 256) as u8,
            ])
        });
        let instances = boxes
            .iter()
            .enumerate()
            .map(|(i, &(x, y, bw, bh))| {
                let bbox = BBox::new(f64::from(x), f64::from(y), f64::from(bw), f64::from(bh));
                Instance {
                    bbox,
                    mask: Some(BitMask::from_box(h, w, &bbox)),
                    label: CategoryId(i as u64 + 1),
                }
            })
            .collect();
        Sample::new(raster, instances).unwrap()
    }
}
