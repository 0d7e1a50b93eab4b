use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AugmentError, Sample};

/// Ranges for the random photometric steps. Brightness is an additive delta in
/// 8-bit channel units, hue a shift in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotometricConfig {
    pub brightness_delta: f32,
    pub contrast_range: (f32, f32),
    pub saturation_range: (f32, f32),
    pub hue_delta: f32,
    /// Chance that each individual step is applied.
    pub step_probability: f64,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        Self {
            brightness_delta: 32.0,
            contrast_range: (0.5, 1.5),
            saturation_range: (0.5, 1.5),
            hue_delta: 18.0,
            step_probability: 0.5,
        }
    }
}

impl PhotometricConfig {
    pub fn check(&self) -> Result<(), AugmentError> {
        let range_ok = |(lo, hi): (f32, f32)| lo >= 0.0 && lo <= hi && hi.is_finite();
        if !(self.brightness_delta >= 0.0 && self.brightness_delta.is_finite())
            || !(self.hue_delta >= 0.0 && self.hue_delta <= 180.0)
            || !range_ok(self.contrast_range)
            || !range_ok(self.saturation_range)
        {
            return Err(AugmentError::Config("bad photometric ranges".into()));
        }
        Ok(())
    }
}

/// Concrete photometric adjustment. Neutral values (0, 1, 1, 0) skip their step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotometricParams {
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    pub hue: f32,
}

impl Default for PhotometricParams {
    fn default() -> Self {
        Self {
            brightness: 0.0,
            contrast: 1.0,
            saturation: 1.0,
            hue: 0.0,
        }
    }
}

impl PhotometricParams {
    pub fn sample<R: Rng + ?Sized>(cfg: &PhotometricConfig, rng: &mut R) -> Self {
        let mut p = Self::default();
        let p_step = cfg.step_probability;
        if rng.random_bool(p_step) {
            p.brightness = rng.random_range(-cfg.brightness_delta..=cfg.brightness_delta);
        }
        if rng.random_bool(p_step) {
            p.contrast = rng.random_range(cfg.contrast_range.0..=cfg.contrast_range.1);
        }
        if rng.random_bool(p_step) {
            p.saturation = rng.random_range(cfg.saturation_range.0..=cfg.saturation_range.1);
        }
        if rng.random_bool(p_step) {
            p.hue = rng.random_range(-cfg.hue_delta..=cfg.hue_delta);
        }
        p
    }
}

/// Adjusts pixel values only; boxes, masks and labels are untouched.
pub fn apply_photometric(s: &Sample, p: &PhotometricParams) -> Sample {
    let mut out = s.clone();
    let hsv = p.saturation != 1.0 || p.hue != 0.0;
    for px in out.raster.pixels_mut() {
        let mut c = px.0.map(f32::from);
        if p.brightness != 0.0 {
            c = c.map(|v| (v + p.brightness).clamp(0.0, 255.0));
        }
        if p.contrast != 1.0 {
            c = c.map(|v| (v * p.contrast).clamp(0.0, 255.0));
        }
        if hsv {
            let (h, s, v) = rgb_to_hsv(c);
            let h = (h + p.hue).rem_euclid(360.0);
            let s = (s * p.saturation).clamp(0.0, 1.0);
            c = hsv_to_rgb(h, s, v);
        }
        px.0 = c.map(|v| v.round().clamp(0.0, 255.0) as u8);
    }
    out
}

pub fn photometric_distortion<R: Rng + ?Sized>(
    s: &Sample,
    cfg: &PhotometricConfig,
    rng: &mut R,
) -> Sample {
    apply_photometric(s, &PhotometricParams::sample(cfg, rng))
}

fn rgb_to_hsv([r, g, b]: [f32; 3]) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::testing::sample;
    use image::{Rgb, RgbImage};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn brightness_shift_on_constant_image() {
        let mut s = sample(8, 8, &[(1, 1, 3, 3)]);
        s.raster = RgbImage::from_pixel(8, 8, Rgb([100, 100, 100]));
        let p = PhotometricParams {
            brightness: 10.0,
            ..Default::default()
        };
        let out = apply_photometric(&s, &p);
        assert!(out.raster.pixels().all(|px| px.0 == [110, 110, 110]));
        assert_eq!(out.instances, s.instances);
    }

    #[test]
    fn output_is_clamped() {
        let mut s = sample(4, 4, &[]);
        s.raster = RgbImage::from_pixel(4, 4, Rgb([250, 5, 128]));
        let p = PhotometricParams {
            brightness: 30.0,
            contrast: 1.5,
            ..Default::default()
        };
        let out = apply_photometric(&s, &p);
        assert!(out.raster.pixels().all(|px| px.0 == [255, 53, 237]));
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let s = sample(30, 20, &[(2, 2, 5, 5)]);
        let cfg = PhotometricConfig {
            brightness_delta: 0.0,
            contrast_range: (1.0, 1.0),
            saturation_range: (1.0, 1.0),
            hue_delta: 0.0,
            step_probability: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(photometric_distortion(&s, &cfg, &mut rng), s);
    }

    #[test]
    fn hsv_round_trip_is_exact_after_rounding() {
        let s = sample(64, 64, &[]);
        let p = PhotometricParams {
            saturation: 1.0,
            hue: 360.0,
            ..Default::default()
        };
        assert_eq!(apply_photometric(&s, &p).raster, s.raster);
    }

    #[test]
    fn hue_shift_rotates_primaries() {
        let mut s = sample(1, 1, &[]);
        s.raster.put_pixel(0, 0, Rgb([255, 0, 0]));
        let p = PhotometricParams {
            hue: 120.0,
            ..Default::default()
        };
        assert_eq!(
            apply_photometric(&s, &p).raster.get_pixel(0, 0).0,
            [0, 255, 0]
        );
    }

    #[test]
    fn zero_saturation_gives_gray() {
        let mut s = sample(1, 1, &[]);
        s.raster.put_pixel(0, 0, Rgb([200, 50, 100]));
        let p = PhotometricParams {
            saturation: 0.0,
            ..Default::default()
        };
        assert_eq!(
            apply_photometric(&s, &p).raster.get_pixel(0, 0).0,
            [200, 200, 200]
        );
    }
}
