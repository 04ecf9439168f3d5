//! Bagged tree ensembles: bootstrap per tree, balanced class weighting,
//! averaged leaf distributions, versioned JSON serialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::tree::{
    grow_tree, DenseMatrix, FeatureMatrix, FeatureRow, MaxFeatures, Tree, TreeParams,
};

pub const ENSEMBLE_FORMAT: &str = "tree-ensemble/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    None,
    Balanced,
}

#[derive(Debug, Clone)]
pub struct EnsembleParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub class_weight: ClassWeight,
    pub decision_threshold: f64,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for EnsembleParams {
    fn default() -> EnsembleParams {
        EnsembleParams {
            n_estimators: 91,
            max_features: MaxFeatures::One,
            class_weight: ClassWeight::Balanced,
            decision_threshold: 0.5,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub format: String,
    pub trees: Vec<Tree>,
    pub n_estimators: usize,
    pub split_criterion: String,
    pub class_weight: ClassWeight,
    /// Feature names; empty for anonymous (hashed) feature spaces.
    pub feature_order: Vec<String>,
    pub n_features: usize,
    pub n_classes: usize,
    pub decision_threshold: f64,
    pub seed: u64,
}

impl TreeEnsembleModel {
    pub fn validate(&self) -> Result<()> {
        if self.format != ENSEMBLE_FORMAT {
            return Err(Error::Model(format!(
                "unsupported model format {:?}",
                self.format
            )));
        }
        if self.n_estimators < 1 || self.trees.len() != self.n_estimators {
            return Err(Error::invariant("n_estimators must match tree count, >= 1"));
        }
        if !self.feature_order.is_empty() && self.feature_order.len() != self.n_features {
            return Err(Error::invariant("feature_order length != n_features"));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(Error::invariant("decision_threshold outside [0,1]"));
        }
        for tree in &self.trees {
            for node in &tree.nodes {
                match node.feature {
                    Some(f) => {
                        if f >= self.n_features {
                            return Err(Error::invariant("split feature index out of range"));
                        }
                        if node.left >= tree.nodes.len() || node.right >= tree.nodes.len() {
                            return Err(Error::invariant("child index out of range"));
                        }
                    }
                    None => {
                        if node.probs.len() != self.n_classes {
                            return Err(Error::invariant("leaf distribution wrong arity"));
                        }
                        let sum: f64 = node.probs.iter().sum();
                        if (sum - 1.0).abs() > 1e-9 {
                            return Err(Error::invariant("leaf probabilities do not sum to 1"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Class distribution for one sample: average of leaf distributions.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        Ok(self.proba_row(&features[..]))
    }

    /// Same as predict_proba for callers holding a sparse or trusted row.
    pub fn proba_row<R: FeatureRow + ?Sized>(&self, row: &R) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.decide(row)) {
                *a += p;
            }
        }
        for a in &mut acc {
            *a /= self.trees.len() as f64;
        }
        acc
    }

    /// Probability of class 1 (binary models).
    pub fn positive_proba(&self, features: &[f64]) -> Result<f64> {
        let dist = self.predict_proba(features)?;
        Ok(dist.get(1).copied().unwrap_or(0.0))
    }

    /// Binary decision: probability at or above the threshold is positive.
    pub fn classify(&self, features: &[f64]) -> Result<bool> {
        Ok(self.positive_proba(features)? >= self.decision_threshold)
    }

    pub fn classify_row<R: FeatureRow + ?Sized>(&self, row: &R) -> bool {
        let dist = self.proba_row(row);
        dist.get(1).copied().unwrap_or(0.0) >= self.decision_threshold
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<TreeEnsembleModel> {
        let model: TreeEnsembleModel = serde_json::from_str(json)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TreeEnsembleModel> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        TreeEnsembleModel::from_json(&s)
    }
}

/// Trains on dense rows. `labels` are class ids 0..k.
pub fn train_tree_ensemble(
    features: &[Vec<f64>],
    labels: &[usize],
    feature_order: Vec<String>,
    params: &EnsembleParams,
) -> Result<TreeEnsembleModel> {
    let matrix = DenseMatrix::new(features.to_vec())?;
    train_on_matrix(&matrix, labels, feature_order, params)
}

/// Trains on any column-addressable matrix (sparse text features included).
pub fn train_on_matrix(
    matrix: &dyn FeatureMatrix,
    labels: &[usize],
    feature_order: Vec<String>,
    params: &EnsembleParams,
) -> Result<TreeEnsembleModel> {
    let n = matrix.n_rows();
    if n == 0 || labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if !feature_order.is_empty() && feature_order.len() != matrix.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n_cols(),
            got: feature_order.len(),
        });
    }
    if params.n_estimators < 1 {
        return Err(Error::invariant("n_estimators must be >= 1"));
    }

    let n_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateDataset(
            "training set has fewer than two classes".into(),
        ));
    }

    // Balanced: w_c = n / (k * count_c) over classes present.
    let weights: Vec<f64> = match params.class_weight {
        ClassWeight::None => vec![1.0; n],
        ClassWeight::Balanced => labels
            .iter()
            .map(|&y| n as f64 / (present as f64 * counts[y] as f64))
            .collect(),
    };

    let tree_params = TreeParams {
        max_features: params.max_features,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
    };

    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(t as u64 + 1);
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        trees.push(grow_tree(
            matrix,
            labels,
            &weights,
            n_classes,
            bootstrap,
            &tree_params,
            &mut rng,
        ));
    }

    let model = TreeEnsembleModel {
        format: ENSEMBLE_FORMAT.to_string(),
        trees,
        n_estimators: params.n_estimators,
        split_criterion: "gini".to_string(),
        class_weight: params.class_weight,
        feature_order,
        n_features: matrix.n_cols(),
        n_classes,
        decision_threshold: params.decision_threshold,
        seed: params.seed,
    };
    model.validate()?;
    Ok(model)
}
