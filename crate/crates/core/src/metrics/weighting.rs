use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{CategoryId, Dataset};

use super::MetricsError;

/// Class weights proportional to ground-truth annotation counts.
///
/// Only classes with at least one annotation are present. Weighted sums are
/// computed as `sum(n_c * v_c) / N` so that uniform values come back exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassWeights {
    counts: BTreeMap<CategoryId, usize>,
    total: usize,
}

impl ClassWeights {
    pub fn from_counts(counts: impl IntoIterator<Item = (CategoryId, usize)>) -> Self {
        let mut map = BTreeMap::new();
        for (c, n) in counts {
            if n > 0 {
                *map.entry(c).or_insert(0) += n;
            }
        }
        let total = map.values().sum();
        Self { counts: map, total }
    }

    pub fn from_dataset(d: &Dataset) -> Self {
        Self::from_counts(d.annotations.iter().map(|a| (a.category_id, 1)))
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn classes(&self) -> impl Iterator<Item = CategoryId> + '_ {
        self.counts.keys().copied()
    }

    pub fn count(&self, c: CategoryId) -> usize {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn weight(&self, c: CategoryId) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(c) as f64 / self.total as f64
        }
    }

    pub fn weights(&self) -> BTreeMap<CategoryId, f64> {
        self.classes().map(|c| (c, self.weight(c))).collect()
    }

    /// `sum_c w_c * values[c]`; the key sets must coincide.
    pub fn weighted_sum(&self, values: &BTreeMap<CategoryId, f64>) -> Result<f64, MetricsError> {
        if !values.keys().eq(self.counts.keys()) {
            let have: Vec<_> = values.keys().map(|c| c.0).collect();
            let want: Vec<_> = self.counts.keys().map(|c| c.0).collect();
            return Err(MetricsError::WeightKeyMismatch(format!(
                "values for {have:?}, weights for {want:?}"
            )));
        }
        if self.total == 0 {
            return Ok(0.0);
        }
        let acc: f64 = self.counts.iter().map(|(c, &n)| n as f64 * values[c]).sum();
        Ok(acc / self.total as f64)
    }
}

/// Weighted mAP at a single IoU threshold.
pub fn weighted_map_at_iou(
    ap_at_iou: &BTreeMap<CategoryId, f64>,
    weights: &ClassWeights,
) -> Result<f64, MetricsError> {
    weights.weighted_sum(ap_at_iou)
}

/// Weighted mAP averaged over thresholds; `ap_by_iou[c][t]` is AP of class
/// `c` at threshold index `t`.
pub fn weighted_map(
    ap_by_iou: &BTreeMap<CategoryId, Vec<f64>>,
    weights: &ClassWeights,
) -> Result<f64, MetricsError> {
    let Some(n) = ap_by_iou.values().next().map(Vec::len) else {
        return weights.weighted_sum(&BTreeMap::new());
    };
    if ap_by_iou.values().any(|v| v.len() != n) {
        return Err(MetricsError::RaggedThresholds);
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for t in 0..n {
        let column = ap_by_iou.iter().map(|(c, v)| (*c, v[t])).collect();
        sum += weighted_map_at_iou(&column, weights)?;
    }
    Ok(sum / n as f64)
}

/// Weighted mean of per-class top-k average recall.
pub fn weighted_mar_top_k(
    ar: &BTreeMap<CategoryId, f64>,
    weights: &ClassWeights,
) -> Result<f64, MetricsError> {
    weights.weighted_sum(ar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(v: &[(u64, f64)]) -> BTreeMap<CategoryId, f64> {
        v.iter().map(|&(c, x)| (CategoryId(c), x)).collect()
    }

    #[test]
    fn weights_follow_counts() {
        let w =
            ClassWeights::from_counts([(CategoryId(1), 3), (CategoryId(2), 1), (CategoryId(3), 0)]);
        assert_eq!(w.weights(), map(&[(1, 0.75), (2, 0.25)]));
        assert_eq!(w.total(), 4);
        let s: f64 = w.weights().values().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_map_examples() {
        let one = ClassWeights::from_counts([(CategoryId(5), 9)]);
        assert_eq!(weighted_map_at_iou(&map(&[(5, 0.37)]), &one).unwrap(), 0.37);

        let w = ClassWeights::from_counts([(CategoryId(1), 3), (CategoryId(2), 1)]);
        assert_eq!(
            weighted_map_at_iou(&map(&[(1, 1.0), (2, 0.0)]), &w).unwrap(),
            0.75
        );

        let even = ClassWeights::from_counts([(CategoryId(1), 4), (CategoryId(2), 4)]);
        let (a, b) = (0.3, 0.8);
        assert!(
            (weighted_map_at_iou(&map(&[(1, a), (2, b)]), &even).unwrap() - (a + b) / 2.0).abs()
                < 1e-15
        );
    }

    #[test]
    fn key_mismatch_is_an_error() {
        let w = ClassWeights::from_counts([(CategoryId(1), 3)]);
        assert!(matches!(
            weighted_map_at_iou(&map(&[(2, 1.0)]), &w),
            Err(MetricsError::WeightKeyMismatch(_))
        ));
    }

    #[test]
    fn threshold_averaging() {
        let w = ClassWeights::from_counts([(CategoryId(1), 2)]);
        let same: BTreeMap<_, _> = [(CategoryId(1), vec![0.6; 10])].into();
        assert!((weighted_map(&same, &w).unwrap() - 0.6).abs() < 1e-15);
        let ones: BTreeMap<_, _> = [(CategoryId(1), vec![1.0; 10])].into();
        assert_eq!(weighted_map(&ones, &w).unwrap(), 1.0);
        let two: BTreeMap<_, _> = [(CategoryId(1), vec![0.4, 0.2])].into();
        assert!((weighted_map(&two, &w).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn weighted_mar_examples() {
        let w = ClassWeights::from_counts([(CategoryId(1), 3), (CategoryId(2), 1)]);
        assert_eq!(
            weighted_mar_top_k(&map(&[(1, 1.0), (2, 0.0)]), &w).unwrap(),
            0.75
        );
        let one = ClassWeights::from_counts([(CategoryId(1), 1)]);
        assert_eq!(weighted_mar_top_k(&map(&[(1, 0.42)]), &one).unwrap(), 0.42);
    }
}
