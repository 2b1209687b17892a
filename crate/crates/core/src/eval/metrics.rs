//! Non-maxima suppression and average precision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::GroundTruth;
use crate::geometry::{iou, Window};

/// Default overlap above which NMS discards the lower-scored window.
pub const NMS_THRESHOLD: f64 = 0.3;
/// A detection is correct when its overlap with a ground-truth box exceeds
/// this.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub window: Window,
    pub score: f64,
}

/// Indices of `scores` sorted by descending score; equal scores keep input
/// order.
fn rank(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Greedy NMS over detections of a single image. The output is in greedy
/// (descending score) order.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let order = rank(detections.iter().map(|d| d.score));
    let mut kept: Vec<&Detection> = Vec::new();
    for i in order {
        let d = &detections[i];
        if kept.iter().all(|k| iou(&k.window, &d.window) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept.into_iter().cloned().collect()
}

/// Applies [`nms`] separately within each image. Output is grouped by image
/// id in ascending order.
pub fn nms_per_image(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut groups: BTreeMap<&str, Vec<Detection>> = BTreeMap::new();
    for d in detections {
        groups.entry(&d.image_id).or_default().push(d.clone());
    }
    groups.values().flat_map(|g| nms(g, iou_threshold)).collect()
}

/// Precision and recall after each ranked detection.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub true_positive: Vec<bool>,
    pub num_ground_truth: usize,
}

/// Ranks detections by score and matches each to the highest-IoU unmatched
/// ground-truth box of its image.
pub fn precision_recall(detections: &[Detection], ground_truth: &GroundTruth, iou_match: f64) -> PrCurve {
    let num_gt: usize = ground_truth.values().map(Vec::len).sum();
    let mut matched: BTreeMap<&str, Vec<bool>> = ground_truth
        .iter()
        .map(|(k, v)| (k.as_str(), vec![false; v.len()]))
        .collect();
    let mut tp_flags = Vec::with_capacity(detections.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut precision = Vec::with_capacity(detections.len());
    let mut recall = Vec::with_capacity(detections.len());
    for i in rank(detections.iter().map(|d| d.score)) {
        let d = &detections[i];
        let mut hit = false;
        if let (Some(boxes), Some(used)) = (ground_truth.get(&d.image_id), matched.get_mut(d.image_id.as_str())) {
            let mut best: Option<(usize, f64)> = None;
            for (g, b) in boxes.iter().enumerate() {
                if used[g] {
                    continue;
                }
                let o = iou(&d.window, b);
                if best.is_none_or(|(_, bo)| o > bo) {
                    best = Some((g, o));
                }
            }
            if let Some((g, o)) = best {
                if o > iou_match {
                    used[g] = true;
                    hit = true;
                }
            }
        }
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        tp_flags.push(hit);
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(if num_gt > 0 { tp as f64 / num_gt as f64 } else { 0.0 });
    }
    PrCurve {
        precision,
        recall,
        true_positive: tp_flags,
        num_ground_truth: num_gt,
    }
}

/// All-points interpolated average precision: the area under the monotone
/// precision envelope of the PR curve.
///
/// Returns `None` when there is no ground truth at all; AP is undefined
/// there rather than zero.
pub fn average_precision(detections: &[Detection], ground_truth: &GroundTruth, iou_match: f64) -> Option<f64> {
    let pr = precision_recall(detections, ground_truth, iou_match);
    if pr.num_ground_truth == 0 {
        return None;
    }
    // envelope: running max from the right
    let mut env = pr.precision.clone();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, &r) in pr.recall.iter().enumerate() {
        if r > prev_recall {
            ap += (r - prev_recall) * env[i];
            prev_recall = r;
        }
    }
    Some(ap)
}
