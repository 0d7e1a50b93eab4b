use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{CategoryId, Dataset, Detection, GroundTruthAnnotation, ImageId};

use super::curve::interpolated_ap;
use super::matching::{match_detections, MatchResult};
use super::recall::ar_top_k;
use super::weighting::{weighted_map_at_iou, weighted_mar_top_k, ClassWeights};
use super::{EvalConfig, IouKind, MetricsError};

/// Every metric for one evaluation kind, as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: IouKind,
    pub map_w: f64,
    pub map_w_50: Option<f64>,
    pub map_w_75: Option<f64>,
    pub mar_w_top1: Option<f64>,
    pub mar_w_top100: Option<f64>,
    pub iou_thresholds: Vec<f64>,
    pub map_w_by_iou: Vec<f64>,
    pub mar_w_by_k: BTreeMap<usize, f64>,
    /// AP averaged over all IoU thresholds.
    pub per_class_ap: BTreeMap<CategoryId, f64>,
    pub per_class_ap_by_iou: BTreeMap<CategoryId, Vec<f64>>,
    pub per_class_ar: BTreeMap<usize, BTreeMap<CategoryId, f64>>,
    pub class_weights: BTreeMap<CategoryId, f64>,
    pub class_counts: BTreeMap<CategoryId, usize>,
}

type PairKey = (ImageId, CategoryId);

/// Evaluates `dets` against `gt`.
///
/// Detections under the score floor are dropped, matching runs per
/// (image, category) pair in parallel, and the result is independent of the
/// schedule and of the input order of ground truths.
pub fn evaluate(
    gt: &Dataset,
    dets: &[Detection],
    cfg: &EvalConfig,
) -> Result<EvalReport, MetricsError> {
    cfg.check()?;
    let images = gt.image_index();

    let mut pairs: BTreeMap<PairKey, (Vec<&GroundTruthAnnotation>, Vec<&Detection>)> =
        BTreeMap::new();
    for a in &gt.annotations {
        if !images.contains_key(&a.image_id) {
            return Err(MetricsError::UnknownGroundTruthImage(a.id));
        }
        pairs
            .entry((a.image_id, a.category_id))
            .or_default()
            .0
            .push(a);
    }
    for (index, d) in dets.iter().enumerate() {
        if !images.contains_key(&d.image_id) {
            return Err(MetricsError::UnknownImage {
                index,
                image: d.image_id,
            });
        }
        if gt.category(d.category_id).is_none() {
            return Err(MetricsError::UnknownCategory {
                index,
                category: d.category_id,
            });
        }
        if d.score >= cfg.score_floor {
            pairs
                .entry((d.image_id, d.category_id))
                .or_default()
                .1
                .push(d);
        }
    }

    let matched: Vec<MatchResult> = pairs
        .into_par_iter()
        .map(|((image, category), (g, d))| match_detections(&g, &d, cfg, category, images[&image]))
        .collect::<Result<_, _>>()?;

    let mut by_class: BTreeMap<CategoryId, Vec<MatchResult>> = BTreeMap::new();
    for m in matched {
        by_class.entry(m.category_id).or_default().push(m);
    }

    let weights = ClassWeights::from_dataset(gt);
    let empty = Vec::new();

    let mut per_class_ap_by_iou = BTreeMap::new();
    for c in weights.classes() {
        let ms = by_class.get(&c).unwrap_or(&empty);
        let aps = cfg
            .iou_thresholds
            .iter()
            .map(|&phi| interpolated_ap(ms, phi, &cfg.recall_grid))
            .collect::<Result<Vec<_>, _>>()?;
        per_class_ap_by_iou.insert(c, aps);
    }

    let map_w_by_iou = (0..cfg.iou_thresholds.len())
        .map(|t| {
            let column = per_class_ap_by_iou
                .iter()
                .map(|(c, v): (&CategoryId, &Vec<f64>)| (*c, v[t]))
                .collect();
            weighted_map_at_iou(&column, &weights)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let map_w = map_w_by_iou.iter().sum::<f64>() / map_w_by_iou.len() as f64;

    let per_class_ap = per_class_ap_by_iou
        .iter()
        .map(|(c, v)| (*c, v.iter().sum::<f64>() / v.len() as f64))
        .collect();

    let mut per_class_ar = BTreeMap::new();
    let mut mar_w_by_k = BTreeMap::new();
    for &k in &cfg.top_k_values {
        let ar: BTreeMap<CategoryId, f64> = weights
            .classes()
            .map(|c| {
                let ms = by_class.get(&c).unwrap_or(&empty);
                (c, ar_top_k(ms, k, &cfg.iou_thresholds, c).unwrap_or(0.0))
            })
            .collect();
        mar_w_by_k.insert(k, weighted_mar_top_k(&ar, &weights)?);
        per_class_ar.insert(k, ar);
    }

    let at = |phi: f64| cfg.threshold_index(phi).map(|t| map_w_by_iou[t]);
    Ok(EvalReport {
        kind: cfg.kind,
        map_w,
        map_w_50: at(0.5),
        map_w_75: at(0.75),
        mar_w_top1: mar_w_by_k.get(&1).copied(),
        mar_w_top100: mar_w_by_k.get(&100).copied(),
        iou_thresholds: cfg.iou_thresholds.clone(),
        map_w_by_iou,
        mar_w_by_k,
        per_class_ap,
        per_class_ap_by_iou,
        per_class_ar,
        class_weights: weights.weights(),
        class_counts: weights.classes().map(|c| (c, weights.count(c))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{AnnotationId, BBox, Category, ImageRecord, MaskRle};

    fn dataset() -> Dataset {
        let images = (1..=3)
            .map(|i| ImageRecord {
                id: ImageId(i),
                width: 50,
                height: 40,
                file_name: format!("{i}.jpg"),
            })
            .collect();
        let categories = (1..=2)
            .map(|i| Category {
                id: CategoryId(i),
                name: format!("c{i}"),
                supercategory: "s".into(),
            })
            .collect();
        let boxes = [
            (1, 1, BBox::new(0.0, 0.0, 10.0, 10.0)),
            (1, 2, BBox::new(20.0, 20.0, 10.0, 5.0)),
            (2, 1, BBox::new(5.0, 5.0, 20.0, 20.0)),
            (3, 1, BBox::new(1.0, 2.0, 3.0, 4.0)),
        ];
        let annotations = boxes
            .iter()
            .enumerate()
            .map(|(i, &(img, cat, b))| {
                let mask =
                    crate::geometry::rle_encode(&crate::geometry::BitMask::from_box(40, 50, &b));
                GroundTruthAnnotation {
                    id: AnnotationId(i as u64 + 1),
                    image_id: ImageId(img),
                    category_id: CategoryId(cat),
                    bbox: b,
                    area: mask.area() as f64,
                    mask: Some(mask),
                }
            })
            .collect();
        Dataset {
            images,
            annotations,
            categories,
        }
    }

    fn perfect(d: &Dataset) -> Vec<Detection> {
        d.annotations
            .iter()
            .map(|a| Detection {
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: a.bbox,
                mask: a.mask.clone(),
                score: 1.0,
            })
            .collect()
    }

    fn all_values(r: &EvalReport) -> Vec<f64> {
        vec![
            r.map_w,
            r.map_w_50.unwrap(),
            r.map_w_75.unwrap(),
            r.mar_w_top1.unwrap(),
            r.mar_w_top100.unwrap(),
        ]
    }

    #[test]
    fn perfect_detections_score_one_for_both_kinds() {
        let d = dataset();
        for kind in [IouKind::Box, IouKind::Mask] {
            let r = evaluate(&d, &perfect(&d), &EvalConfig::with_kind(kind)).unwrap();
            assert!(all_values(&r).iter().all(|&v| v == 1.0), "{kind}: {r:?}");
            assert!(r.per_class_ap.values().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn no_detections_score_zero() {
        let d = dataset();
        let r = evaluate(&d, &[], &EvalConfig::default()).unwrap();
        assert!(all_values(&r).iter().all(|&v| v == 0.0));
        assert_eq!(r.class_weights[&CategoryId(1)], 0.75);
    }

    #[test]
    fn below_floor_detections_are_ignored() {
        let d = dataset();
        let mut dets = perfect(&d);
        let base = evaluate(&d, &dets, &EvalConfig::default()).unwrap();
        dets.push(Detection {
            score: 0.04,
            ..dets[0].clone()
        });
        assert_eq!(evaluate(&d, &dets, &EvalConfig::default()).unwrap(), base);
    }

    #[test]
    fn unresolved_references_fail() {
        let d = dataset();
        let mut dets = perfect(&d);
        dets[0].image_id = ImageId(99);
        assert!(matches!(
            evaluate(&d, &dets, &EvalConfig::default()),
            Err(MetricsError::UnknownImage { index: 0, .. })
        ));
        let mut dets = perfect(&d);
        dets[1].category_id = CategoryId(9);
        assert!(matches!(
            evaluate(&d, &dets, &EvalConfig::default()),
            Err(MetricsError::UnknownCategory { index: 1, .. })
        ));
    }

    #[test]
    fn mask_kind_rejects_mismatched_mask_sizes() {
        let d = dataset();
        let mut dets = perfect(&d);
        dets[0].mask = Some(MaskRle::new(2, 2, vec![4]));
        assert!(matches!(
            evaluate(&d, &dets, &EvalConfig::with_kind(IouKind::Mask)),
            Err(MetricsError::Geometry(_))
        ));
    }

    #[test]
    fn report_serializes() {
        let d = dataset();
        let r = evaluate(&d, &perfect(&d), &EvalConfig::default()).unwrap();
        let j = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r);
    }
}
