//! Box and mask geometry.
//!
//! Box IoU is analytic on real-valued coordinates. Mask IoU works directly on
//! run lengths by intersecting foreground intervals, so masks are never
//! expanded to pixel grids on the evaluation path.

use thiserror::Error;

use crate::datamodel::{BBox, ImageRecord, MaskRle, RleDefect};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("malformed RLE: {0}")]
    MalformedRle(#[from] RleDefect),
    #[error("mask sizes differ: {a:?} vs {b:?}")]
    SizeMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("bit grid has {actual} cells, expected {expected}")]
    GridLength { expected: usize, actual: usize },
    #[error("union of an empty box list")]
    EmptyBoxList,
    #[error("image has zero area")]
    ZeroAreaImage,
    #[error("mask area {area} outside [0, {max}]")]
    AreaOutOfRange { area: f64, max: f64 },
}

/// Binary mask on a row-major grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    height: u32,
    width: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(height: u32, width: u32, bits: Vec<bool>) -> Result<Self, GeometryError> {
        let expected = height as usize * width as usize;
        if bits.len() != expected {
            return Err(GeometryError::GridLength {
                expected,
                actual: bits.len(),
            });
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn empty(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height as usize * width as usize],
        }
    }

    /// Mask with the pixels covered by `b` (after rounding to the pixel grid) set.
    pub fn from_box(height: u32, width: u32, b: &BBox) -> Self {
        let mut m = Self::empty(height, width);
        let x0 = b.x.round().clamp(0.0, f64::from(width)) as u32;
        let y0 = b.y.round().clamp(0.0, f64::from(height)) as u32;
        let x1 = b.right().round().clamp(0.0, f64::from(width)) as u32;
        let y1 = b.bottom().round().clamp(0.0, f64::from(height)) as u32;
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x, y, true);
            }
        }
        m
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Tight pixel bounding box of the foreground.
    pub fn bbox(&self) -> Option<BBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != u32::MAX).then(|| {
            BBox::new(
                f64::from(x0),
                f64::from(y0),
                f64::from(x1 - x0 + 1),
                f64::from(y1 - y0 + 1),
            )
        })
    }
}

/// Intersection-over-union of two boxes; 0 when the union is empty.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Column-major RLE of `m`, starting with a background run.
pub fn rle_encode(m: &BitMask) -> MaskRle {
    let (h, w) = (m.height as usize, m.width as usize);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = m.bits[y * w + x];
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    MaskRle::new(m.height, m.width, counts)
}

pub fn rle_decode(r: &MaskRle) -> Result<BitMask, GeometryError> {
    let sum = r.counts_sum();
    if sum != r.pixel_count() {
        return Err(RleDefect::LengthMismatch {
            expected: r.pixel_count(),
            actual: sum,
        }
        .into());
    }
    let (h, w) = (r.height as usize, r.width as usize);
    let mut bits = vec![false; h * w];
    let mut pos = 0usize;
    for (i, &c) in r.counts.iter().enumerate() {
        let c = c as usize;
        if i % 2 == 1 {
            for k in pos..pos + c {
                bits[(k % h) * w + k / h] = true;
            }
        }
        pos += c;
    }
    Ok(BitMask {
        height: r.height,
        width: r.width,
        bits,
    })
}

/// Foreground `[start, end)` intervals of the linear column-major scan.
fn foreground_intervals(r: &MaskRle) -> impl Iterator<Item = (u64, u64)> + '_ {
    let mut pos = 0u64;
    r.counts.iter().enumerate().filter_map(move |(i, &c)| {
        let start = pos;
        pos += u64::from(c);
        (i % 2 == 1 && c > 0).then_some((start, pos))
    })
}

/// Foreground pixels shared by two same-sized masks.
pub fn rle_intersection(a: &MaskRle, b: &MaskRle) -> Result<u64, GeometryError> {
    check_pair(a, b)?;
    let ia: Vec<_> = foreground_intervals(a).collect();
    let ib: Vec<_> = foreground_intervals(b).collect();
    let (mut i, mut j, mut total) = (0, 0, 0u64);
    while i < ia.len() && j < ib.len() {
        let lo = ia[i].0.max(ib[j].0);
        let hi = ia[i].1.min(ib[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if ia[i].1 < ib[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(total)
}

fn check_pair(a: &MaskRle, b: &MaskRle) -> Result<(), GeometryError> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(GeometryError::SizeMismatch {
            a: (a.height, a.width),
            b: (b.height, b.width),
        });
    }
    a.check()?;
    b.check()?;
    Ok(())
}

/// IoU of two masks of equal size; 0 when both are empty.
pub fn mask_iou(a: &MaskRle, b: &MaskRle) -> Result<f64, GeometryError> {
    let inter = rle_intersection(a, b)?;
    let union = a.area() + b.area() - inter;
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Smallest axis-aligned box containing every input box.
pub fn union_box(boxes: &[BBox]) -> Result<BBox, GeometryError> {
    let first = boxes.first().ok_or(GeometryError::EmptyBoxList)?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.right(), first.bottom());
    for b in &boxes[1..] {
        x0 = x0.min(b.x);
        y0 = y0.min(b.y);
        x1 = x1.max(b.right());
        y1 = y1.max(b.bottom());
    }
    Ok(BBox::new(x0, y0, x1 - x0, y1 - y0))
}

/// Square root of the mask area divided by the image area.
pub fn relative_mask_size(mask_area: f64, image: &ImageRecord) -> Result<f64, GeometryError> {
    let total = image.pixel_count() as f64;
    if total == 0.0 {
        return Err(GeometryError::ZeroAreaImage);
    }
    if !(0.0..=total).contains(&mask_area) {
        return Err(GeometryError::AreaOutOfRange {
            area: mask_area,
            max: total,
        });
    }
    Ok((mask_area / total).sqrt())
}
