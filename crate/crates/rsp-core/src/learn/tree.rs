//! Single decision trees: flat node arrays, gini splits, weighted classes.
//!
//! Feature subsampling follows the continue-until-valid rule: candidate
//! features are drawn in random order and only features that are
//! non-constant within the node count toward the max_features budget, so a
//! budget of one always splits when any usable feature exists.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Read access to one sample's features at prediction time.
pub trait FeatureRow {
    fn feature(&self, col: usize) -> f64;
}

impl FeatureRow for [f64] {
    fn feature(&self, col: usize) -> f64 {
        self.get(col).copied().unwrap_or(0.0)
    }
}

/// Sorted (column, value) pairs; absent columns are zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseRow(pub Vec<(u32, f64)>);

impl FeatureRow for SparseRow {
    fn feature(&self, col: usize) -> f64 {
        match self.0.binary_search_by_key(&(col as u32), |&(c, _)| c) {
            Ok(i) => self.0[i].1,
            Err(_) => 0.0,
        }
    }
}

/// Column-addressable training data.
pub trait FeatureMatrix {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn get(&self, row: usize, col: usize) -> f64;
    /// Columns worth offering to the split search (nonzero somewhere).
    fn active_cols(&self) -> &[usize];
}

pub struct DenseMatrix {
    rows: Vec<Vec<f64>>,
    active: Vec<usize>,
}

impl DenseMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<DenseMatrix> {
        let dim = rows.first().map_or(0, Vec::len);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        Ok(DenseMatrix {
            rows,
            active: (0..dim).collect(),
        })
    }
}

impl FeatureMatrix for DenseMatrix {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }
    fn n_cols(&self) -> usize {
        self.active.len()
    }
    fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }
    fn active_cols(&self) -> &[usize] {
        &self.active
    }
}

pub struct SparseMatrix {
    rows: Vec<SparseRow>,
    n_cols: usize,
    active: Vec<usize>,
}

impl SparseMatrix {
    pub fn new(rows: Vec<SparseRow>, n_cols: usize) -> Result<SparseMatrix> {
        let mut active: Vec<usize> = Vec::new();
        for r in &rows {
            for &(c, _) in &r.0 {
                if c as usize >= n_cols {
                    return Err(Error::DimensionMismatch {
                        expected: n_cols,
                        got: c as usize + 1,
                    });
                }
                active.push(c as usize);
            }
        }
        active.sort_unstable();
        active.dedup();
        Ok(SparseMatrix {
            rows,
            n_cols,
            active,
        })
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }
}

impl FeatureMatrix for SparseMatrix {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row].feature(col)
    }
    fn active_cols(&self) -> &[usize] {
        &self.active
    }
}

/// Per-split feature budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    One,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

/// One node of a flat tree. `feature: None` marks a leaf carrying `probs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatNode {
    pub feature: Option<usize>,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub left: usize,
    #[serde(default)]
    pub right: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probs: Vec<f64>,
}

impl FlatNode {
    fn placeholder() -> FlatNode {
        FlatNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            probs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<FlatNode>,
}

impl Tree {
    /// Walks the tree: x[feature] <= threshold goes left.
    pub fn decide<R: FeatureRow + ?Sized>(&self, row: &R) -> &[f64] {
        let mut at = 0;
        for _ in 0..self.nodes.len() {
            let node = &self.nodes[at];
            match node.feature {
                None => return &node.probs,
                Some(f) => {
                    at = if row.feature(f) <= node.threshold {
                        node.left
                    } else {
                        node.right
                    };
                }
            }
        }
        // Cycle guard; a well-formed tree never gets here.
        &self.nodes[0].probs
    }
}

/// Grows one tree on `samples` (row indices, bootstrap repeats included).
/// `weights[row]` is the per-class sample weight of that row.
pub(crate) fn grow_tree(
    m: &dyn FeatureMatrix,
    labels: &[usize],
    weights: &[f64],
    n_classes: usize,
    root_samples: Vec<usize>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = vec![FlatNode::placeholder()];
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, root_samples, 0)];
    let mut scratch: Vec<usize> = Vec::new();

    while let Some((slot, samples, depth)) = stack.pop() {
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        let splittable = !depth_capped
            && samples.len() >= params.min_samples_split
            && !is_pure(labels, &samples);
        if splittable {
            if let Some((feature, threshold)) =
                find_split(m, labels, weights, &samples, n_classes, params, rng, &mut scratch)
            {
                let (left, right): (Vec<usize>, Vec<usize>) = samples
                    .iter()
                    .partition(|&&i| m.get(i, feature) <= threshold);
                if !left.is_empty() && !right.is_empty() {
                    let li = nodes.len();
                    nodes.push(FlatNode::placeholder());
                    let ri = nodes.len();
                    nodes.push(FlatNode::placeholder());
                    nodes[slot] = FlatNode {
                        feature: Some(feature),
                        threshold,
                        left: li,
                        right: ri,
                        probs: Vec::new(),
                    };
                    stack.push((ri, right, depth + 1));
                    stack.push((li, left, depth + 1));
                    continue;
                }
            }
        }
        nodes[slot] = FlatNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            probs: leaf_probs(labels, weights, &samples, n_classes),
        };
    }
    Tree { nodes }
}

fn is_pure(labels: &[usize], samples: &[usize]) -> bool {
    let first = labels[samples[0]];
    samples.iter().all(|&i| labels[i] == first)
}

fn leaf_probs(labels: &[usize], weights: &[f64], samples: &[usize], n_classes: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_classes];
    for &i in samples {
        sums[labels[i]] += weights[i];
    }
    let total: f64 = sums.iter().sum();
    if total > 0.0 {
        for s in &mut sums {
            *s /= total;
        }
    }
    sums
}

/// Weighted gini mass of one side: W * (1 - sum((w_c/W)^2)).
fn gini_mass(class_w: &[f64]) -> f64 {
    let total: f64 = class_w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    total - class_w.iter().map(|w| w * w).sum::<f64>() / total
}

#[allow(clippy::too_many_arguments)]
fn find_split(
    m: &dyn FeatureMatrix,
    labels: &[usize],
    weights: &[f64],
    samples: &[usize],
    n_classes: usize,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
    scratch: &mut Vec<usize>,
) -> Option<(usize, f64)> {
    // (quality, feature, threshold); lower quality wins, ties break to the
    // lowest feature index then the lowest threshold.
    let mut best: Option<(f64, usize, f64)> = None;
    let consider = |f: usize, q: f64, t: f64, best: &mut Option<(f64, usize, f64)>| {
        let better = match best {
            None => true,
            Some((bq, bf, bt)) => {
                q < *bq || (q == *bq && (f < *bf || (f == *bf && t < *bt)))
            }
        };
        if better {
            *best = Some((q, f, t));
        }
    };

    match params.max_features {
        MaxFeatures::All => {
            for &f in m.active_cols() {
                if let Some((q, t)) =
                    best_threshold(m, labels, weights, samples, f, n_classes, params)
                {
                    consider(f, q, t, &mut best);
                }
            }
        }
        MaxFeatures::Sqrt | MaxFeatures::One => {
            let budget = match params.max_features {
                MaxFeatures::One => 1,
                _ => (((m.n_cols() as f64).sqrt()) as usize).max(1),
            };
            scratch.clear();
            scratch.extend_from_slice(m.active_cols());
            let len = scratch.len();
            let mut usable = 0;
            for t in 0..len {
                let j = t + rng.gen_range(0..len - t);
                scratch.swap(t, j);
                let f = scratch[t];
                if let Some((q, thr)) =
                    best_threshold(m, labels, weights, samples, f, n_classes, params)
                {
                    consider(f, q, thr, &mut best);
                    usable += 1;
                    if usable >= budget {
                        break;
                    }
                }
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Best threshold for one feature, or None when the feature is constant
/// within the node or no boundary satisfies min_samples_leaf.
fn best_threshold(
    m: &dyn FeatureMatrix,
    labels: &[usize],
    weights: &[f64],
    samples: &[usize],
    feature: usize,
    n_classes: usize,
    params: &TreeParams,
) -> Option<(f64, f64)> {
    let mut vals: Vec<(f64, usize)> = samples.iter().map(|&i| (m.get(i, feature), i)).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len();
    if vals[0].0 == vals[n - 1].0 {
        return None;
    }

    let mut right_w = vec![0.0; n_classes];
    for &(_, i) in &vals {
        right_w[labels[i]] += weights[i];
    }
    let mut left_w = vec![0.0; n_classes];

    let mut best: Option<(f64, f64)> = None;
    for k in 0..n - 1 {
        let (v, i) = vals[k];
        left_w[labels[i]] += weights[i];
        right_w[labels[i]] -= weights[i];
        let next_v = vals[k + 1].0;
        if v == next_v {
            continue;
        }
        let left_n = k + 1;
        let right_n = n - left_n;
        if left_n < params.min_samples_leaf || right_n < params.min_samples_leaf {
            continue;
        }
        let threshold = v + (next_v - v) / 2.0;
        let quality = gini_mass(&left_w) + gini_mass(&right_w);
        // Strict improvement keeps the earliest (lowest) threshold on ties.
        if best.map_or(true, |(bq, _)| quality < bq) {
            best = Some((quality, threshold));
        }
    }
    best
}
