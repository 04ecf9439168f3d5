//! One-vs-rest multi-label classifier over hashed character n-gram counts
//! concatenated with the hand-crafted binary IPT features.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::ensemble::{train_on_matrix, EnsembleParams, TreeEnsembleModel};
use crate::learn::metrics::{lrap, ClassEval, ConfusionCounts, EvalReport};
use crate::learn::tree::{SparseMatrix, SparseRow};
use crate::textfeat::{binary_ipt_features, BinaryIptFeatures};
use crate::types::CategoryLabel;

pub const MULTILABEL_FORMAT: &str = "multilabel/1";
pub const HASH_DIM: usize = 1 << 15;
pub const NGRAM_SIZES: [usize; 3] = [1, 2, 3];
pub const TOTAL_DIM: usize = HASH_DIM + BinaryIptFeatures::DIM;
pub const MIN_LABEL_SUPPORT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelModel {
    pub format: String,
    pub labels: Vec<CategoryLabel>,
    pub hash_dim: usize,
    pub ngram_sizes: Vec<usize>,
    pub per_label: Vec<TreeEnsembleModel>,
}

impl MultiLabelModel {
    pub fn validate(&self) -> Result<()> {
        if self.format != MULTILABEL_FORMAT {
            return Err(Error::Model(format!(
                "unsupported model format {:?}",
                self.format
            )));
        }
        if self.labels.len() != self.per_label.len() || self.labels.is_empty() {
            return Err(Error::invariant("one ensemble per label required"));
        }
        if !self.hash_dim.is_power_of_two() {
            return Err(Error::invariant("hash dimension must be a power of two"));
        }
        for m in &self.per_label {
            m.validate()?;
        }
        Ok(())
    }

    /// Positive-class score per label, in model label order.
    pub fn predict_scores(&self, text: &str) -> Vec<f64> {
        let row = featurize_text(text);
        self.per_label
            .iter()
            .map(|m| m.proba_row(&row).get(1).copied().unwrap_or(0.0))
            .collect()
    }

    /// Labels at or above their threshold; argmax fallback guarantees at
    /// least one label per text.
    pub fn predict_labels(&self, text: &str) -> BTreeSet<CategoryLabel> {
        let scores = self.predict_scores(text);
        let mut out = BTreeSet::new();
        for (i, (&score, model)) in scores.iter().zip(&self.per_label).enumerate() {
            if score >= model.decision_threshold {
                out.insert(self.labels[i]);
            }
        }
        if out.is_empty() {
            let mut best = 0;
            for i in 1..scores.len() {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            out.insert(self.labels[best]);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<MultiLabelModel> {
        let model: MultiLabelModel = serde_json::from_str(json)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MultiLabelModel> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        MultiLabelModel::from_json(&s)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hashed char n-gram counts (n in NGRAM_SIZES) plus the 7 binary IPT
/// features at the tail of the vector.
pub fn featurize_text(text: &str) -> SparseRow {
    let chars: Vec<char> = text.chars().collect();
    let mut counts: HashMap<u32, f64> = HashMap::new();
    let mut buf = [0u8; 16];
    for &n in &NGRAM_SIZES {
        if chars.len() < n {
            continue;
        }
        for win in chars.windows(n) {
            let mut bytes = Vec::with_capacity(1 + n * 4);
            bytes.push(n as u8);
            for &c in win {
                bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
            let col = (fnv1a(&bytes) & (HASH_DIM as u64 - 1)) as u32;
            *counts.entry(col).or_insert(0.0) += 1.0;
        }
    }
    for (j, v) in binary_ipt_features(text).to_vec().into_iter().enumerate() {
        if v != 0.0 {
            counts.insert((HASH_DIM + j) as u32, v);
        }
    }
    let mut cols: Vec<(u32, f64)> = counts.into_iter().collect();
    cols.sort_unstable_by_key(|&(c, _)| c);
    SparseRow(cols)
}

/// Trains one-vs-rest ensembles for `labels`. Every label must be supported
/// by at least MIN_LABEL_SUPPORT corpus texts.
pub fn train_multilabel(
    corpus: &[(String, BTreeSet<CategoryLabel>)],
    labels: &[CategoryLabel],
    params: &EnsembleParams,
) -> Result<MultiLabelModel> {
    for &label in labels {
        let count = corpus.iter().filter(|(_, ls)| ls.contains(&label)).count();
        if count < MIN_LABEL_SUPPORT {
            return Err(Error::InsufficientLabelSupport {
                label: label.name().to_string(),
                count,
                required: MIN_LABEL_SUPPORT,
            });
        }
    }
    let rows: Vec<SparseRow> = corpus.iter().map(|(t, _)| featurize_text(t)).collect();
    let matrix = SparseMatrix::new(rows, TOTAL_DIM)?;

    let mut per_label = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        let y: Vec<usize> = corpus
            .iter()
            .map(|(_, ls)| usize::from(ls.contains(&label)))
            .collect();
        let mut label_params = params.clone();
        label_params.seed = params.seed.wrapping_add(7919 * (i as u64 + 1));
        per_label.push(train_on_matrix(&matrix, &y, Vec::new(), &label_params)?);
    }

    let model = MultiLabelModel {
        format: MULTILABEL_FORMAT.to_string(),
        labels: labels.to_vec(),
        hash_dim: HASH_DIM,
        ngram_sizes: NGRAM_SIZES.to_vec(),
        per_label,
    };
    model.validate()?;
    Ok(model)
}

/// Scores a held-out labeled set: per-class and micro precision/recall/F1
/// plus label-ranking average precision.
pub fn evaluate(
    model: &MultiLabelModel,
    heldout: &[(String, BTreeSet<CategoryLabel>)],
) -> Result<EvalReport> {
    if heldout.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    for (_, truth) in heldout {
        for label in truth {
            if !model.labels.contains(label) {
                return Err(Error::Model(format!(
                    "held-out label {label} is not in the model label set"
                )));
            }
        }
    }

    let k = model.labels.len();
    let mut counts = vec![ConfusionCounts::default(); k];
    let mut score_rows: Vec<Vec<f64>> = Vec::with_capacity(heldout.len());
    let mut truth_rows: Vec<Vec<bool>> = Vec::with_capacity(heldout.len());

    for (text, truth) in heldout {
        let scores = model.predict_scores(text);
        let predicted = model.predict_labels(text);
        for (i, label) in model.labels.iter().enumerate() {
            let p = predicted.contains(label);
            let t = truth.contains(label);
            match (p, t) {
                (true, true) => counts[i].tp += 1,
                (true, false) => counts[i].fp += 1,
                (false, true) => counts[i].fn_count += 1,
                (false, false) => counts[i].tn += 1,
            }
        }
        truth_rows.push(model.labels.iter().map(|l| truth.contains(l)).collect());
        score_rows.push(scores);
    }

    let per_class: Vec<ClassEval> = model
        .labels
        .iter()
        .zip(&counts)
        .map(|(label, c)| ClassEval::from_counts(label.name().to_string(), *c))
        .collect();

    let pooled = counts.iter().fold(ConfusionCounts::default(), |a, c| {
        ConfusionCounts {
            tp: a.tp + c.tp,
            fp: a.fp + c.fp,
            fn_count: a.fn_count + c.fn_count,
            tn: a.tn + c.tn,
        }
    });
    let micro = ClassEval::from_counts("micro".to_string(), pooled);

    Ok(EvalReport {
        per_class,
        micro_precision: micro.precision,
        micro_recall: micro.recall,
        micro_f1: micro.f1,
        lrap: lrap(&score_rows, &truth_rows)?,
    })
}
