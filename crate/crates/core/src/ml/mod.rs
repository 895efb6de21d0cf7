//! From-scratch tree classifiers, stratified evaluation and model selection.
//!
//! Targets are binary: 1 marks a participant the opinion model mispredicted,
//! which is also the positive class for F1.

mod cv;
mod forest;
mod matrix;
mod metrics;
mod model;
mod split;
mod tree;

use thiserror::Error;

pub use cv::{
    cross_validate, grid_search, iterative_subset_selection, subset_sizes, CvConfig, CvResult, GridEntry, GridResult,
    GridSpec, SubsetResult,
};
pub use forest::{bootstrap_weights, vote, ForestParams};
pub use matrix::FeatureMatrix;
pub use metrics::{f1_score, impurity, Criterion};
pub use model::{fit_forest, fit_model, fit_tree, Learner, ModelFamily, ModelParams, Predictor, TrainedModel};
pub use split::{stratified_kfold, stratified_split};
pub use tree::{MaxFeatures, Node, Splitter, Tree, TreeParams};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("cannot stratify: class {class} has {count} member(s)")]
    CannotStratify { class: u8, count: usize },
    #[error("{folds} folds is infeasible: {reason}")]
    InfeasibleFolds { folds: usize, reason: String },
    #[error("empty grid")]
    EmptyGrid,
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
