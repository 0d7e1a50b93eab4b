use super::matching::MatchResult;
use super::{threshold_index, MetricsError};

/// Precision and recall when admitting every detection scoring at least `score`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
}

fn resolve(matches: &[MatchResult], phi: f64) -> Result<Option<usize>, MetricsError> {
    match matches.first() {
        None => Ok(None),
        Some(m) => threshold_index(&m.thresholds, phi)
            .map(Some)
            .ok_or(MetricsError::UnknownThreshold(phi)),
    }
}

/// One operating point per distinct detection score, in descending score order.
pub fn operating_points(matches: &[MatchResult], t: usize) -> Vec<OperatingPoint> {
    let npos: usize = matches.iter().map(MatchResult::num_gt).sum();
    let mut entries: Vec<(f64, bool)> = matches
        .iter()
        .flat_map(|m| {
            m.scores
                .iter()
                .enumerate()
                .map(move |(d, &s)| (s, m.is_tp(t, d)))
        })
        .collect();
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(score, hit)) in entries.iter().enumerate() {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        // equal scores are admitted together, so only the last of a run is a real point
        if entries.get(i + 1).is_some_and(|next| next.0 == score) {
            continue;
        }
        points.push(OperatingPoint {
            score,
            precision: tp as f64 / (tp + fp) as f64,
            recall: if npos == 0 {
                0.0
            } else {
                tp as f64 / npos as f64
            },
        });
    }
    points
}

/// Precision and recall at IoU `phi` over detections scoring at least `tau`.
///
/// Precision is 1 when nothing is admitted; recall is 0 without ground truth.
pub fn precision_recall(
    matches: &[MatchResult],
    phi: f64,
    tau: f64,
) -> Result<(f64, f64), MetricsError> {
    let Some(t) = resolve(matches, phi)? else {
        return Ok((1.0, 0.0));
    };
    let (mut tp, mut fp, mut npos) = (0usize, 0usize, 0usize);
    for m in matches {
        npos += m.num_gt();
        for (d, &s) in m.scores.iter().enumerate() {
            if s >= tau {
                if m.is_tp(t, d) {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if npos == 0 {
        0.0
    } else {
        tp as f64 / npos as f64
    };
    Ok((precision, recall))
}

/// Interpolated AP at IoU `phi`: the mean over `recall_grid` of the best
/// precision reachable at recall at least `r`, counting 0 where none is.
pub fn interpolated_ap(
    matches: &[MatchResult],
    phi: f64,
    recall_grid: &[f64],
) -> Result<f64, MetricsError> {
    let Some(t) = resolve(matches, phi)? else {
        return Ok(0.0);
    };
    Ok(ap_from_points(&operating_points(matches, t), recall_grid))
}

pub(crate) fn ap_from_points(points: &[OperatingPoint], recall_grid: &[f64]) -> f64 {
    if points.is_empty() || recall_grid.is_empty() {
        return 0.0;
    }
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let total: f64 = recall_grid
        .iter()
        .map(|&r| {
            let idx = points.partition_point(|p| p.recall < r);
            envelope.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / recall_grid.len() as f64
}
