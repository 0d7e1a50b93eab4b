//! Dataset statistics, stratified splitting and scale/performance correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{Category, CategoryId, Dataset, ImageId};
use crate::geometry::{relative_mask_size, GeometryError};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("correlation needs at least 2 shared classes, found {0}")]
    TooFewClasses(usize),
    #[error("annotation {annotation}: {source}")]
    Geometry {
        annotation: u64,
        source: GeometryError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub count: usize,
    pub frequency: f64,
}

/// Annotation counts and relative frequencies per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub total: usize,
    pub classes: BTreeMap<CategoryId, ClassShare>,
}

impl ClassDistribution {
    pub fn frequency(&self, c: CategoryId) -> f64 {
        self.classes.get(&c).map_or(0.0, |s| s.frequency)
    }

    pub fn count(&self, c: CategoryId) -> usize {
        self.classes.get(&c).map_or(0, |s| s.count)
    }
}

/// Counts ground-truth annotations per category. Every declared category is
/// listed, including those without annotations.
pub fn class_distribution(d: &Dataset) -> ClassDistribution {
    let mut counts: BTreeMap<CategoryId, usize> = d.categories.iter().map(|c| (c.id, 0)).collect();
    for a in &d.annotations {
        *counts.entry(a.category_id).or_insert(0) += 1;
    }
    let total = d.annotations.len();
    let classes = counts
        .into_iter()
        .map(|(c, count)| {
            let frequency = if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            };
            (c, ClassShare { count, frequency })
        })
        .collect();
    ClassDistribution { total, classes }
}

/// Relative mask size of every annotation, grouped by category.
pub fn mask_size_distribution(d: &Dataset) -> Result<BTreeMap<CategoryId, Vec<f64>>, StatsError> {
    let images = d.image_index();
    let mut out: BTreeMap<CategoryId, Vec<f64>> =
        d.categories.iter().map(|c| (c.id, Vec::new())).collect();
    for a in &d.annotations {
        let Some(img) = images.get(&a.image_id) else {
            continue;
        };
        let size = relative_mask_size(a.area, img).map_err(|source| StatsError::Geometry {
            annotation: a.id.0,
            source,
        })?;
        out.entry(a.category_id).or_default().push(size);
    }
    Ok(out)
}

/// Mean relative mask size per category, skipping empty categories.
pub fn mean_relative_sizes(d: &Dataset) -> Result<BTreeMap<CategoryId, f64>, StatsError> {
    Ok(mask_size_distribution(d)?
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(c, v)| (c, v.iter().sum::<f64>() / v.len() as f64))
        .collect())
}

/// Relative sizes keyed by category name, ready for box plots.
pub fn size_values_by_name(d: &Dataset) -> Result<BTreeMap<String, Vec<f64>>, StatsError> {
    let names: BTreeMap<_, _> = d
        .categories
        .iter()
        .map(|c| (c.id, c.name.clone()))
        .collect();
    Ok(mask_size_distribution(d)?
        .into_iter()
        .map(|(c, v)| (names.get(&c).cloned().unwrap_or_else(|| c.to_string()), v))
        .collect())
}

/// Text table of per-category counts and percentages for several datasets.
pub fn render_distribution_table(
    columns: &[(&str, &ClassDistribution)],
    categories: &[Category],
) -> String {
    let name_w = categories
        .iter()
        .map(|c| c.name.chars().count())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "category");
    for (title, _) in columns {
        let _ = write!(out, " | {title:>16}");
    }
    out.push('\n');
    let mut cats: Vec<_> = categories.iter().collect();
    cats.sort_by_key(|c| c.id);
    for c in cats {
        let _ = write!(out, "{:<name_w$}", c.name);
        for (_, dist) in columns {
            let cell = format!(
                "{} ({:.1}%)",
                dist.count(c.id),
                dist.frequency(c.id) * 100.0
            );
            let _ = write!(out, " | {cell:>16}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<name_w$}", "total");
    for (_, dist) in columns {
        let _ = write!(out, " | {:>16}", dist.total);
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: [f64; 3], seed: u64) -> Result<Self, StatsError> {
        let sum: f64 = fractions.iter().sum();
        if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(StatsError::BadFractions(fractions));
        }
        Ok(Self { fractions, seed })
    }

    pub fn fractions(&self) -> [f64; 3] {
        self.fractions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

impl SplitOutcome {
    pub fn parts(&self) -> [&Dataset; 3] {
        [&self.train, &self.val, &self.test]
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Largest-remainder apportionment of `total` items over `fractions`.
fn apportion(total: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| total as f64 * f);
    let mut out = exact.map(|e| e.floor() as usize);
    let mut left = total.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Per-stratum quotas whose rows sum to the stratum sizes and whose columns
/// sum to the global split sizes, rounding fractional shares by largest
/// remainder.
fn stratum_quotas(sizes: &[usize], fractions: &[f64; 3]) -> Vec<[usize; 3]> {
    let totals = apportion(sizes.iter().sum(), fractions);
    let mut quotas: Vec<[usize; 3]> = Vec::with_capacity(sizes.len());
    let mut remainders = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        let exact = fractions.map(|f| n as f64 * f);
        let floor = exact.map(|e| e.floor() as usize);
        for (i, e) in exact.iter().enumerate() {
            remainders.push((e - e.floor(), c, i));
        }
        quotas.push(floor);
    }
    let mut row_left: Vec<usize> = sizes
        .iter()
        .zip(&quotas)
        .map(|(&n, q)| n - q.iter().sum::<usize>())
        .collect();
    let mut col_left: [usize; 3] =
        std::array::from_fn(|i| totals[i] - quotas.iter().map(|q| q[i]).sum::<usize>());

    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, c, i) in &remainders {
        if row_left[c] > 0 && col_left[i] > 0 {
            quotas[c][i] += 1;
            row_left[c] -= 1;
            col_left[i] -= 1;
        }
    }
    // greedy can strand a unit when the only open cells had small remainders
    while let Some(c) = row_left.iter().position(|&d| d > 0) {
        let i = (0..3)
            .filter(|&i| col_left[i] > 0)
            .max_by(|&a, &b| fractions[a].total_cmp(&fractions[b]))
            .expect("row and column deficits balance");
        quotas[c][i] += 1;
        row_left[c] -= 1;
        col_left[i] -= 1;
    }
    quotas
}

/// Stratum of an image: its most frequent category (lowest id on ties).
fn image_strata(d: &Dataset) -> BTreeMap<Option<CategoryId>, Vec<ImageId>> {
    let mut per_image: BTreeMap<ImageId, BTreeMap<CategoryId, usize>> =
        d.images.iter().map(|i| (i.id, BTreeMap::new())).collect();
    for a in &d.annotations {
        if let Some(m) = per_image.get_mut(&a.image_id) {
            *m.entry(a.category_id).or_insert(0) += 1;
        }
    }
    let mut strata: BTreeMap<Option<CategoryId>, Vec<ImageId>> = BTreeMap::new();
    for (img, counts) in per_image {
        let key = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(c, _)| *c);
        strata.entry(key).or_default().push(img);
    }
    strata
}

fn subset(d: &Dataset, ids: &BTreeSet<ImageId>) -> Dataset {
    Dataset {
        images: d
            .images
            .iter()
            .filter(|i| ids.contains(&i.id))
            .cloned()
            .collect(),
        annotations: d
            .annotations
            .iter()
            .filter(|a| ids.contains(&a.image_id))
            .cloned()
            .collect(),
        categories: d.categories.clone(),
    }
}

/// Partitions images into train/val/test while keeping each category's share
/// of images close to its global share. Deterministic for a given seed; the
/// per-category quotas do not depend on the seed.
pub fn stratified_split(d: &Dataset, spec: &SplitSpec) -> SplitOutcome {
    let strata = image_strata(d);
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = stratum_quotas(&sizes, &spec.fractions);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assigned: [BTreeSet<ImageId>; 3] = Default::default();
    for (images, quota) in strata.values().zip(&quotas) {
        let mut images = images.clone();
        images.shuffle(&mut rng);
        let mut it = images.into_iter();
        for (i, &q) in quota.iter().enumerate() {
            assigned[i].extend(it.by_ref().take(q));
        }
    }

    let mut warnings = Vec::new();
    if !d.categories.is_empty() {
        for (i, set) in assigned.iter().enumerate() {
            if set.is_empty() {
                warnings.push(format!(
                    "{} split is empty (fraction {})",
                    SPLIT_NAMES[i], spec.fractions[i]
                ));
            }
        }
    }
    let [train, val, test] = assigned.each_ref().map(|ids| subset(d, ids));
    SplitOutcome {
        train,
        val,
        test,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub category: CategoryId,
    pub size_delta: f64,
    pub ap_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub points: Vec<CorrelationPoint>,
    /// `None` when either delta series has zero variance.
    pub pearson: Option<f64>,
}

/// Sample Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    (denom > 0.0).then(|| (sxy / denom).clamp(-1.0, 1.0))
}

/// Per-class absolute differences in mean relative size and in AP between two
/// datasets, and their Pearson correlation over the classes known on all sides.
pub fn scale_performance_correlation(
    sizes_a: &BTreeMap<CategoryId, f64>,
    sizes_b: &BTreeMap<CategoryId, f64>,
    ap_a: &BTreeMap<CategoryId, f64>,
    ap_b: &BTreeMap<CategoryId, f64>,
) -> Result<Correlation, StatsError> {
    let points: Vec<CorrelationPoint> = sizes_a
        .iter()
        .filter_map(|(c, sa)| {
            let sb = sizes_b.get(c)?;
            let (aa, ab) = (ap_a.get(c)?, ap_b.get(c)?);
            Some(CorrelationPoint {
                category: *c,
                size_delta: (sa - sb).abs(),
                ap_delta: (aa - ab).abs(),
            })
        })
        .collect();
    if points.len() < 2 {
        return Err(StatsError::TooFewClasses(points.len()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.size_delta).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ap_delta).collect();
    Ok(Correlation {
        pearson: pearson(&xs, &ys),
        points,
    })
}
