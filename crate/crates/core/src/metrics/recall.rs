use crate::datamodel::CategoryId;

use super::matching::MatchResult;

/// Average recall of `category` when each image admits only detections scoring
/// at least its k-th highest score.
///
/// Images without ground truth for the category are skipped; an image with no
/// detections uses threshold 1.0 and contributes zero recall. When an image
/// has fewer than `k` detections all of them are admitted. Returns `None` if
/// no image carries ground truth for the category.
pub fn ar_top_k(
    matches_per_image: &[MatchResult],
    k: usize,
    iou_thresholds: &[f64],
    category: CategoryId,
) -> Option<f64> {
    let mut total = 0.0;
    let mut images = 0usize;
    for m in matches_per_image
        .iter()
        .filter(|m| m.category_id == category && m.num_gt() > 0)
    {
        images += 1;
        let tau = match m.scores.len() {
            0 => 1.0,
            n => m.scores[k.clamp(1, n) - 1],
        };
        let admitted = m.scores.partition_point(|&s| s >= tau);
        for &phi in iou_thresholds {
            let Some(t) = super::threshold_index(&m.thresholds, phi) else {
                continue;
            };
            let tp = (0..admitted).filter(|&d| m.is_tp(t, d)).count();
            total += tp as f64 / m.num_gt() as f64;
        }
    }
    (images > 0).then(|| total / (images * iou_thresholds.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{AnnotationId, ImageId};

    fn result(image: u64, ngt: usize, dets: &[(f64, [bool; 2])]) -> MatchResult {
        MatchResult {
            image_id: ImageId(image),
            category_id: CategoryId(7),
            thresholds: vec![0.5, 0.75],
            scores: dets.iter().map(|d| d.0).collect(),
            det_matches: (0..2)
                .map(|t| {
                    dets.iter()
                        .enumerate()
                        .map(|(i, d)| d.1[t].then_some(AnnotationId(i as u64)))
                        .collect()
                })
                .collect(),
            gt_ids: (0..ngt as u64).map(AnnotationId).collect(),
            gt_matched: vec![vec![false; ngt]; 2],
        }
    }

    const TH: [f64; 2] = [0.5, 0.75];

    #[test]
    fn top_detection_hits_everywhere() {
        let m = [result(1, 1, &[(0.9, [true, true])])];
        assert_eq!(ar_top_k(&m, 1, &TH, CategoryId(7)), Some(1.0));
    }

    #[test]
    fn image_without_detections_contributes_zero() {
        let m = [result(1, 1, &[])];
        assert_eq!(ar_top_k(&m, 1, &TH, CategoryId(7)), Some(0.0));
    }

    #[test]
    fn per_image_averaging() {
        let m = [
            result(1, 1, &[(0.9, [true, true])]),
            result(2, 1, &[(0.9, [false, false])]),
        ];
        assert_eq!(ar_top_k(&m, 1, &TH, CategoryId(7)), Some(0.5));
    }

    #[test]
    fn k_limits_admitted_detections() {
        let m = [result(
            1,
            2,
            &[
                (0.9, [false, false]),
                (0.8, [true, true]),
                (0.7, [true, false]),
            ],
        )];
        assert_eq!(ar_top_k(&m, 1, &TH, CategoryId(7)), Some(0.0));
        assert_eq!(ar_top_k(&m, 2, &TH, CategoryId(7)), Some(0.5));
        assert_eq!(ar_top_k(&m, 100, &TH, CategoryId(7)), Some(0.75));
    }

    #[test]
    fn images_without_ground_truth_are_skipped() {
        let m = [result(1, 0, &[(0.9, [false, false])])];
        assert_eq!(ar_top_k(&m, 1, &TH, CategoryId(7)), None);
        assert_eq!(ar_top_k(&[], 1, &TH, CategoryId(7)), None);
    }
}
