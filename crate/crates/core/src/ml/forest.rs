//! Bagged forests of CART trees.
//!
//! The stratified variant resamples each class separately, drawing exactly as
//! many rows per class as the class holds, so every bootstrap sample keeps the
//! full-sample class proportions.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeParams};
use super::{FeatureMatrix, MlError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub stratified_bootstrap: bool,
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), MlError> {
        if self.n_estimators == 0 {
            return Err(MlError::InvalidParams("n_estimators must be positive".into()));
        }
        if self.stratified_bootstrap && !self.bootstrap {
            return Err(MlError::InvalidParams("stratified_bootstrap requires bootstrap".into()));
        }
        self.tree.validate()
    }
}

/// Seed of tree `t` under a model seed. A single tree fitted on its own uses
/// index 0, so a one-tree forest without bootstrap reproduces it.
pub fn tree_seed(seed: u64, t: usize) -> u64 {
    seed::derive_indexed(seed, "tree", t)
}

/// Per-row multiplicities of one bootstrap draw over `rows`.
pub fn bootstrap_weights(y: &[u8], rows: &[usize], stratified: bool, rng: &mut seed::Rng) -> Vec<u32> {
    let mut w = vec![0u32; y.len()];
    if stratified {
        for class in [0u8, 1] {
            let members: Vec<usize> = rows.iter().copied().filter(|&i| y[i] == class).collect();
            for _ in 0..members.len() {
                w[members[rng.random_range(0..members.len())]] += 1;
            }
        }
    } else if !rows.is_empty() {
        for _ in 0..rows.len() {
            w[rows[rng.random_range(0..rows.len())]] += 1;
        }
    }
    w
}

/// Fit `n_estimators` trees on `rows`; trees run in parallel with per-tree
/// RNG streams, so the result does not depend on scheduling.
pub fn fit_trees(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<Vec<Tree>, MlError> {
    params.validate()?;
    (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(tree_seed(seed, t));
            let weights = if params.bootstrap {
                bootstrap_weights(y, rows, params.stratified_bootstrap, &mut rng)
            } else {
                let mut w = vec![0u32; y.len()];
                rows.iter().for_each(|&i| w[i] = 1);
                w
            };
            Tree::fit(x, y, &weights, &params.tree, &mut rng)
        })
        .collect()
}

/// Majority vote; ties go to class 0.
pub fn vote(trees: &[Tree], row: &[f64]) -> u8 {
    let ones = trees.iter().filter(|t| t.predict_row(row) == 1).count();
    (2 * ones > trees.len()) as u8
}
