//! Offline detector evaluation: mAP over IoU 0.50..0.95 and F1 at 0.50.

use serde::{Deserialize, Serialize};

use super::{Annotation, Detection};
use crate::geometry::obb_iou;

pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map_50_95: f64,
    pub f1: f64,
    /// `(threshold, AP)` pairs in ascending threshold order.
    pub ap_per_threshold: Vec<(f64, f64)>,
}

struct Matched {
    /// True-positive flags in descending-confidence order.
    tp: Vec<bool>,
    n_gt: usize,
}

fn match_at(preds: &[Vec<Detection>], gts: &[Vec<Annotation>], threshold: f64) -> Matched {
    let mut order: Vec<(usize, usize)> = preds
        .iter()
        .enumerate()
        .flat_map(|(s, ds)| (0..ds.len()).map(move |d| (s, d)))
        .collect();
    // Stable sort keeps scene/detection order among equal confidences.
    order.sort_by(|a, b| {
        preds[b.0][b.1]
            .confidence
            .total_cmp(&preds[a.0][a.1].confidence)
    });
    let mut taken: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let tp = order
        .iter()
        .map(|&(s, d)| {
            let det = &preds[s][d];
            let best = gts[s]
                .iter()
                .enumerate()
                .filter(|(g, _)| !taken[s][*g])
                .map(|(g, a)| (g, obb_iou(&det.obb, &a.obb)))
                .filter(|&(_, iou)| iou >= threshold)
                .max_by(|x, y| x.1.total_cmp(&y.1));
            match best {
                Some((g, _)) => {
                    taken[s][g] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Matched {
        tp,
        n_gt: gts.iter().map(Vec::len).sum(),
    }
}

/// All-point interpolated area under the precision/recall curve.
pub(crate) fn average_precision(tp: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if tp.is_empty() { 1.0 } else { 0.0 };
    }
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += t as usize;
        recall.push(hits as f64 / n_gt as f64);
        precision.push(hits as f64 / (k + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

fn f1_score(m: &Matched) -> f64 {
    let hits = m.tp.iter().filter(|&&t| t).count() as f64;
    let n_pred = m.tp.len() as f64;
    if m.n_gt == 0 && m.tp.is_empty() {
        return 1.0;
    }
    if hits == 0.0 {
        return 0.0;
    }
    let p = hits / n_pred;
    let r = hits / m.n_gt as f64;
    2.0 * p * r / (p + r)
}

/// Greedy confidence-ordered matching per IoU threshold, AP per threshold,
/// their mean, and F1 at IoU 0.50.
///
/// `preds` and `gts` are per-scene lists and must have the same length.
pub fn eval_offline(preds: &[Vec<Detection>], gts: &[Vec<Annotation>]) -> EvalResult {
    assert_eq!(
        preds.len(),
        gts.len(),
        "prediction and ground-truth scene counts differ"
    );
    let mut ap_per_threshold = Vec::with_capacity(IOU_THRESHOLDS.len());
    let mut f1 = 0.0;
    for &t in &IOU_THRESHOLDS {
        let m = match_at(preds, gts, t);
        if t == 0.50 {
            f1 = f1_score(&m);
        }
        ap_per_threshold.push((t, average_precision(&m.tp, m.n_gt)));
    }
    let map_50_95 =
        ap_per_threshold.iter().map(|(_, ap)| ap).sum::<f64>() / ap_per_threshold.len() as f64;
    EvalResult {
        map_50_95,
        f1,
        ap_per_threshold,
    }
}
