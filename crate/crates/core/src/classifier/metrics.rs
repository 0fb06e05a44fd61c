//! Classifier evaluation metrics.

use crate::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC curve and AUC from decision values. `labels[i]` is true for the
/// positive class. Thresholds sweep the unique scores descending; tied
/// scores advance TP and FP together, so the trapezoidal AUC equals the
/// Mann–Whitney U statistic divided by `n₊·n₋` with ties counted ½.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(Vec<RocPoint>, f64)> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        // consume the whole tie group
        while idx < order.len() && scores[order[idx]] == threshold {
            if labels[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        // trapezoid between the previous and current operating point
        auc += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold,
        });
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok((points, auc / (n_pos as f64 * n_neg as f64)))
}

/// Confusion-matrix metrics with aphasia as the positive class.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

pub fn confusion_metrics(
    predicted_positive: &[bool],
    actual_positive: &[bool],
) -> ConfusionMetrics {
    assert_eq!(predicted_positive.len(), actual_positive.len());
    let (mut tp, mut tn, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &a) in predicted_positive.iter().zip(actual_positive) {
        match (p, a) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let total = tp + tn + fp + fn_;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    ConfusionMetrics {
        accuracy: (tp + tn) / total,
        f1: if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        },
        sensitivity: recall,
        specificity: if tn + fp > 0.0 { tn / (tn + fp) } else { 0.0 },
    }
}
