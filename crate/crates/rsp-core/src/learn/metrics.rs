//! Evaluation metrics: per-class and micro precision/recall/F1, plus
//! label ranking average precision (LRAP).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_count: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub label: String,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassEval {
    pub fn from_counts(label: String, counts: ConfusionCounts) -> ClassEval {
        let (precision, recall, f1) = prf(counts.tp, counts.fp, counts.fn_count);
        ClassEval {
            label,
            counts,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassEval>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub lrap: f64,
}

/// Precision, recall, F1; zero denominators give zero.
pub fn prf(tp: u64, fp: u64, fn_count: u64) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_count == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_count) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Label ranking average precision: mean over samples of the average,
/// across true labels, of (true labels ranked at or above) / (labels ranked
/// at or above) under the sample's score ranking. Ties count as ranked at
/// or above. Samples with no true labels contribute 1.0.
pub fn lrap(scores: &[Vec<f64>], truth: &[Vec<bool>]) -> Result<f64> {
    if scores.is_empty() || scores.len() != truth.len() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut total = 0.0;
    for (s, t) in scores.iter().zip(truth) {
        if s.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                got: t.len(),
            });
        }
        let true_idx: Vec<usize> = (0..t.len()).filter(|&i| t[i]).collect();
        if true_idx.is_empty() || true_idx.len() == t.len() {
            total += 1.0;
            continue;
        }
        let mut sample = 0.0;
        for &j in &true_idx {
            let rank = s.iter().filter(|&&v| v >= s[j]).count();
            let true_at_or_above = true_idx.iter().filter(|&&k| s[k] >= s[j]).count();
            sample += true_at_or_above as f64 / rank as f64;
        }
        total += sample / true_idx.len() as f64;
    }
    Ok(total / scores.len() as f64)
}
