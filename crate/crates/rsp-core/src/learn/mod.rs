//! From-scratch decision-tree ensemble, the multi-label text classifier
//! built on it, and evaluation metrics.

pub mod ensemble;
pub mod metrics;
pub mod multilabel;
pub mod tree;

pub use ensemble::{
    train_on_matrix, train_tree_ensemble, ClassWeight, EnsembleParams, TreeEnsembleModel,
};
pub use metrics::{lrap, ClassEval, ConfusionCounts, EvalReport};
pub use multilabel::{evaluate, featurize_text, train_multilabel, MultiLabelModel};
pub use tree::{DenseMatrix, FeatureMatrix, FeatureRow, MaxFeatures, SparseMatrix, SparseRow};
