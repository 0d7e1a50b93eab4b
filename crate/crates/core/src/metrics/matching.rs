use crate::datamodel::{
    AnnotationId, CategoryId, Detection, GroundTruthAnnotation, ImageId, ImageRecord,
};
use crate::geometry::{box_iou, mask_iou};

use super::{EvalConfig, IouKind, MetricsError};

/// Matching outcome for one (image, category) pair at every IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub thresholds: Vec<f64>,
    /// Detection scores, descending; ties keep input order.
    pub scores: Vec<f64>,
    /// `det_matches[t][d]`: ground truth claimed by detection `d` at threshold `t`.
    pub det_matches: Vec<Vec<Option<AnnotationId>>>,
    /// Ground-truth ids, ascending.
    pub gt_ids: Vec<AnnotationId>,
    /// `gt_matched[t][g]`: whether ground truth `g` was claimed at threshold `t`.
    pub gt_matched: Vec<Vec<bool>>,
}

impl MatchResult {
    pub fn num_gt(&self) -> usize {
        self.gt_ids.len()
    }

    pub fn is_tp(&self, t: usize, d: usize) -> bool {
        self.det_matches[t][d].is_some()
    }
}

fn pair_iou(
    kind: IouKind,
    gt: &GroundTruthAnnotation,
    det: &Detection,
) -> Result<Option<f64>, MetricsError> {
    match kind {
        IouKind::Box => Ok(Some(box_iou(&gt.bbox, &det.bbox))),
        IouKind::Mask => {
            let gm = gt
                .mask
                .as_ref()
                .ok_or(MetricsError::MissingGroundTruthMask(gt.id))?;
            // a detection without a mask can never be a true positive
            match &det.mask {
                None => Ok(None),
                Some(dm) => Ok(Some(mask_iou(gm, dm)?)),
            }
        }
    }
}

/// Greedy matching of `dets` to `gts` for one image and category.
///
/// Detections are visited in descending score order; each claims the
/// still-unclaimed ground truth of highest IoU at or above the threshold
/// (lowest annotation id on ties). Thresholds are matched independently.
/// Callers are expected to have removed detections below the score floor.
pub fn match_detections(
    gts: &[&GroundTruthAnnotation],
    dets: &[&Detection],
    cfg: &EvalConfig,
    category: CategoryId,
    image: &ImageRecord,
) -> Result<MatchResult, MetricsError> {
    let mut gts = gts.to_vec();
    gts.sort_by_key(|g| g.id);
    let mut dets = dets.to_vec();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));

    let ious = dets
        .iter()
        .map(|d| {
            gts.iter()
                .map(|g| pair_iou(cfg.kind, g, d))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut det_matches = Vec::with_capacity(cfg.iou_thresholds.len());
    let mut gt_matched = Vec::with_capacity(cfg.iou_thresholds.len());
    for &phi in &cfg.iou_thresholds {
        let mut taken = vec![false; gts.len()];
        let mut claims = vec![None; dets.len()];
        for (d, row) in ious.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (g, iou) in row.iter().enumerate() {
                let Some(iou) = *iou else { continue };
                if taken[g] || iou <= 0.0 || iou < phi {
                    continue;
                }
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
                claims[d] = Some(gts[g].id);
            }
        }
        det_matches.push(claims);
        gt_matched.push(taken);
    }

    Ok(MatchResult {
        image_id: image.id,
        category_id: category,
        thresholds: cfg.iou_thresholds.clone(),
        scores: dets.iter().map(|d| d.score).collect(),
        det_matches,
        gt_ids: gts.iter().map(|g| g.id).collect(),
        gt_matched,
    })
}
