use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use rand::Rng;

use crate::datamodel::BBox;
use crate::geometry::{union_box, BitMask};

use super::{AugmentConfig, AugmentError, Instance, Sample};

/// Mirrors raster, masks and boxes about the vertical centre line.
pub fn horizontal_flip(s: &Sample) -> Sample {
    let w = s.width();
    let instances = s
        .instances
        .iter()
        .map(|inst| Instance {
            bbox: BBox::new(
                f64::from(w) - inst.bbox.x - inst.bbox.w,
                inst.bbox.y,
                inst.bbox.w,
                inst.bbox.h,
            ),
            mask: inst.mask.as_ref().map(flip_mask),
            label: inst.label,
        })
        .collect();
    Sample {
        raster: imageops::flip_horizontal(&s.raster),
        instances,
    }
}

fn flip_mask(m: &BitMask) -> BitMask {
    let mut out = BitMask::empty(m.height(), m.width());
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                out.set(m.width() - 1 - x, y, true);
            }
        }
    }
    out
}

/// Crops to the pixel-aligned union of all boxes and shifts annotations into
/// the new frame.
pub fn box_crop(s: &Sample) -> Result<Sample, AugmentError> {
    let u = union_box(&s.boxes()).map_err(|_| AugmentError::NoBoxes)?;
    let x0 = u.x.floor().max(0.0) as u32;
    let y0 = u.y.floor().max(0.0) as u32;
    let x1 = (u.right().ceil() as u32).min(s.width()).max(x0 + 1);
    let y1 = (u.bottom().ceil() as u32).min(s.height()).max(y0 + 1);
    let (cw, ch) = (x1 - x0, y1 - y0);
    let instances = s
        .instances
        .iter()
        .map(|inst| Instance {
            bbox: BBox::new(
                inst.bbox.x - f64::from(x0),
                inst.bbox.y - f64::from(y0),
                inst.bbox.w,
                inst.bbox.h,
            ),
            mask: inst.mask.as_ref().map(|m| crop_mask(m, x0, y0, cw, ch)),
            label: inst.label,
        })
        .collect();
    Ok(Sample {
        raster: imageops::crop_imm(&s.raster, x0, y0, cw, ch).to_image(),
        instances,
    })
}

fn crop_mask(m: &BitMask, x0: u32, y0: u32, w: u32, h: u32) -> BitMask {
    let mut out = BitMask::empty(h, w);
    for y in 0..h {
        for x in 0..w {
            if m.get(x0 + x, y0 + y) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Rescales the content by `scale` and restores the original canvas size by
/// padding (scale < 1) or cropping (scale > 1). The content is anchored at the
/// top-left corner unless the config asks for a random anchor.
pub fn large_scale_jitter<R: Rng + ?Sized>(
    s: &Sample,
    scale: f64,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Sample, AugmentError> {
    let anchor = if cfg.random_anchor {
        (rng.random::<f64>(), rng.random::<f64>())
    } else {
        (0.0, 0.0)
    };
    jitter_with_anchor(s, scale, cfg.pad_value, anchor)
}

/// [`large_scale_jitter`] with explicit anchor fractions: `(0, 0)` puts the
/// content (or the crop window) at the top-left, `(1, 1)` at the bottom-right.
///
/// Rasters are resampled bilinearly and masks by nearest neighbour. Boxes whose
/// visible part is under one pixel in either dimension are dropped together
/// with their masks and labels.
pub fn jitter_with_anchor(
    s: &Sample,
    scale: f64,
    pad: [u8; 3],
    anchor: (f64, f64),
) -> Result<Sample, AugmentError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(AugmentError::BadScale(scale));
    }
    let (w, h) = (s.width(), s.height());
    let nw = ((f64::from(w) * scale).round() as u32).max(1);
    let nh = ((f64::from(h) * scale).round() as u32).max(1);
    let place = |canvas: u32, content: u32, a: f64| -> i64 {
        let slack = (i64::from(canvas) - i64::from(content)).abs() as f64;
        let off = (a.clamp(0.0, 1.0) * slack).round() as i64;
        if content <= canvas {
            off
        } else {
            -off
        }
    };
    let (px, py) = (place(w, nw, anchor.0), place(h, nh, anchor.1));

    if (nw, nh, px, py) == (w, h, 0, 0) {
        return Ok(s.clone());
    }

    let resized = imageops::resize(&s.raster, nw, nh, FilterType::Triangle);
    let mut raster = RgbImage::from_pixel(w, h, Rgb(pad));
    imageops::replace(&mut raster, &resized, px, py);

    let sx = f64::from(nw) / f64::from(w);
    let sy = f64::from(nh) / f64::from(h);
    let (fw, fh) = (f64::from(w), f64::from(h));
    let instances = s
        .instances
        .iter()
        .filter_map(|inst| {
            let b = inst.bbox;
            let x0 = (b.x * sx + px as f64).clamp(0.0, fw);
            let y0 = (b.y * sy + py as f64).clamp(0.0, fh);
            let x1 = (b.right() * sx + px as f64).clamp(0.0, fw);
            let y1 = (b.bottom() * sy + py as f64).clamp(0.0, fh);
            if x1 - x0 < 1.0 || y1 - y0 < 1.0 {
                return None;
            }
            Some(Instance {
                bbox: BBox::new(x0, y0, x1 - x0, y1 - y0),
                mask: inst.mask.as_ref().map(|m| place_mask(m, nw, nh, px, py)),
                label: inst.label,
            })
        })
        .collect();
    Ok(Sample { raster, instances })
}

/// Nearest-neighbour resize of `m` to `nw x nh`, placed at `(px, py)` on a
/// canvas of the original size.
fn place_mask(m: &BitMask, nw: u32, nh: u32, px: i64, py: i64) -> BitMask {
    let (w, h) = (m.width(), m.height());
    let src = |dst: i64, n: u32, orig: u32| -> Option<u32> {
        if dst < 0 || dst >= i64::from(n) {
            return None;
        }
        let v = ((dst as f64 + 0.5) * f64::from(orig) / f64::from(n)).floor() as u32;
        Some(v.min(orig - 1))
    };
    let cols: Vec<Option<u32>> = (0..w).map(|cx| src(i64::from(cx) - px, nw, w)).collect();
    let mut out = BitMask::empty(h, w);
    for cy in 0..h {
        let Some(sy) = src(i64::from(cy) - py, nh, h) else {
            continue;
        };
        for (cx, sx) in cols.iter().enumerate() {
            if let Some(sx) = *sx {
                if m.get(sx, sy) {
                    out.set(cx as u32, cy, true);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::testing::sample;
    use proptest::prelude::*;

    #[test]
    fn flip_moves_box_to_mirrored_position() {
        let s = sample(4, 4, &[(0, 0, 2, 4)]);
        let f = horizontal_flip(&s);
        assert_eq!(f.instances[0].bbox, BBox::new(2.0, 0.0, 2.0, 4.0));
        assert_eq!(
            f.instances[0].mask.as_ref().unwrap().bbox(),
            Some(f.instances[0].bbox)
        );
        assert_eq!(f.raster.get_pixel(0, 1), s.raster.get_pixel(3, 1));
    }

    #[test]
    fn double_flip_is_identity() {
        let s = sample(37, 21, &[(0, 0, 5, 5), (10, 3, 27, 18)]);
        assert_eq!(horizontal_flip(&horizontal_flip(&s)), s);
    }

    #[test]
    fn crop_to_union() {
        let s = sample(100, 80, &[(10, 10, 20, 20), (50, 50, 10, 10)]);
        let c = box_crop(&s).unwrap();
        assert_eq!((c.width(), c.height()), (50, 50));
        assert_eq!(c.instances[0].bbox, BBox::new(0.0, 0.0, 20.0, 20.0));
        assert_eq!(c.instances[1].bbox, BBox::new(40.0, 40.0, 10.0, 10.0));
        assert_eq!(c.raster.get_pixel(0, 0), s.raster.get_pixel(10, 10));
        assert_eq!(box_crop(&c).unwrap(), c);
        c.check().unwrap();
    }

    #[test]
    fn crop_without_boxes_fails() {
        assert_eq!(box_crop(&sample(10, 10, &[])), Err(AugmentError::NoBoxes));
    }

    #[test]
    fn half_scale_pads_bottom_right() {
        let s = sample(200, 200, &[(0, 0, 100, 100)]);
        let j = jitter_with_anchor(&s, 0.5, [1, 2, 3], (0.0, 0.0)).unwrap();
        assert_eq!((j.width(), j.height()), (200, 200));
        assert_eq!(j.instances[0].bbox, BBox::new(0.0, 0.0, 50.0, 50.0));
        assert_eq!(j.instances[0].mask.as_ref().unwrap().area(), 2500);
        assert_eq!(j.raster.get_pixel(150, 150).0, [1, 2, 3]);
        assert_eq!(j.raster.get_pixel(100, 0).0, [1, 2, 3]);
        assert_ne!(j.raster.get_pixel(99, 0).0, [1, 2, 3]);
    }

    #[test]
    fn upscale_crops_and_drops_invisible_boxes() {
        let s = sample(100, 100, &[(10, 10, 20, 20), (80, 80, 15, 15)]);
        let j = jitter_with_anchor(&s, 2.0, [0, 0, 0], (0.0, 0.0)).unwrap();
        assert_eq!(j.instances.len(), 1);
        assert_eq!(j.instances[0].bbox, BBox::new(20.0, 20.0, 40.0, 40.0));
        assert_eq!(j.instances[0].label, s.instances[0].label);
    }

    #[test]
    fn bottom_right_anchor() {
        let s = sample(100, 100, &[(0, 0, 100, 100)]);
        let j = jitter_with_anchor(&s, 0.5, [0, 0, 0], (1.0, 1.0)).unwrap();
        assert_eq!(j.instances[0].bbox, BBox::new(50.0, 50.0, 50.0, 50.0));
        let j = jitter_with_anchor(&s, 2.0, [0, 0, 0], (1.0, 1.0)).unwrap();
        assert_eq!(j.instances[0].bbox, BBox::new(0.0, 0.0, 100.0, 100.0));
    }

    #[test]
    fn unit_scale_is_identity() {
        let s = sample(30, 20, &[(3, 4, 5, 6)]);
        assert_eq!(
            jitter_with_anchor(&s, 1.0, [0, 0, 0], (0.0, 0.0)).unwrap(),
            s
        );
    }

    #[test]
    fn bad_scale_is_rejected() {
        let s = sample(10, 10, &[]);
        assert!(jitter_with_anchor(&s, 0.0, [0, 0, 0], (0.0, 0.0)).is_err());
        assert!(jitter_with_anchor(&s, f64::NAN, [0, 0, 0], (0.0, 0.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn jitter_keeps_canvas_and_valid_boxes(
            scale in 0.1f64..2.0,
            ax in 0.0f64..1.0,
            ay in 0.0f64..1.0,
            x in 0u32..30, y in 0u32..20, bw in 1u32..30, bh in 1u32..20,
        ) {
            let s = sample(60, 40, &[(x, y, bw, bh)]);
            let j = jitter_with_anchor(&s, scale, [9, 9, 9], (ax, ay)).unwrap();
            prop_assert_eq!((j.width(), j.height()), (60, 40));
            prop_assert!(j.check().is_ok());
            for inst in &j.instances {
                prop_assert!(inst.bbox.w >= 1.0 && inst.bbox.h >= 1.0);
            }
        }

        #[test]
        fn flip_twice_restores(x in 0u32..30, y in 0u32..20, bw in 1u32..30, bh in 1u32..20) {
            let s = sample(60, 40, &[(x, y, bw, bh)]);
            prop_assert_eq!(horizontal_flip(&horizontal_flip(&s)), s);
        }

        #[test]
        fn crop_is_idempotent(x in 0u32..30, y in 0u32..20, bw in 1u32..30, bh in 1u32..20) {
            let s = sample(60, 40, &[(x, y, bw, bh), (5, 5, 3, 3)]);
            let once = box_crop(&s).unwrap();
            prop_assert_eq!(box_crop(&once).unwrap(), once.clone());
            prop_assert!(once.check().is_ok());
        }
    }
}
