//! Trained models: one tree or a forest, tied to the feature names it saw.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::forest::{fit_trees, tree_seed, vote, ForestParams};
use super::tree::{Tree, TreeParams};
use super::{FeatureMatrix, MlError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelFamily {
    DecisionTree,
    RandomForest,
    #[serde(rename = "StratifiedRF")]
    StratifiedRandomForest,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [
        ModelFamily::DecisionTree,
        ModelFamily::RandomForest,
        ModelFamily::StratifiedRandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::DecisionTree => "DecisionTree",
            ModelFamily::RandomForest => "RandomForest",
            ModelFamily::StratifiedRandomForest => "StratifiedRF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase().replace(['_', '-'], "");
        match s.as_str() {
            "decisiontree" | "dt" => Some(ModelFamily::DecisionTree),
            "randomforest" | "rf" => Some(ModelFamily::RandomForest),
            "stratifiedrf" | "stratifiedrandomforest" | "srf" => Some(ModelFamily::StratifiedRandomForest),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Tree(TreeParams),
    Forest(ForestParams),
}

impl ModelParams {
    /// Parameters as the family uses them: the stratified forest always
    /// resamples per class when it bootstraps, the plain forest never does.
    pub fn for_family(self, family: ModelFamily) -> Result<ModelParams, MlError> {
        match (family, self) {
            (ModelFamily::DecisionTree, ModelParams::Tree(_)) => Ok(self),
            (ModelFamily::RandomForest, ModelParams::Forest(mut p)) => {
                p.stratified_bootstrap = false;
                Ok(ModelParams::Forest(p))
            }
            (ModelFamily::StratifiedRandomForest, ModelParams::Forest(mut p)) => {
                p.stratified_bootstrap = p.bootstrap;
                Ok(ModelParams::Forest(p))
            }
            _ => Err(MlError::InvalidParams(format!(
                "{family} does not take these parameters"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelFamily,
    pub trees: Vec<Tree>,
    pub feature_manifest: Vec<String>,
    pub importances: BTreeMap<String, f64>,
    pub params: ModelParams,
    pub seed: u64,
    /// The training target had a single class, so the model is constant.
    pub constant: bool,
}

/// Anything that can label one row laid out in training column order.
pub trait Predictor {
    fn predict_row(&self, row: &[f64]) -> u8;
}

/// Fits a predictor on a subset of rows. Used by cross-validation so that the
/// fold logic can be exercised with reference predictors too.
pub trait Learner: Sync {
    type Model: Predictor;
    fn fit(&self, x: &FeatureMatrix, y: &[u8], rows: &[usize], seed: u64) -> Result<Self::Model, MlError>;
}

impl Predictor for TrainedModel {
    fn predict_row(&self, row: &[f64]) -> u8 {
        if self.trees.len() == 1 {
            self.trees[0].predict_row(row)
        } else {
            vote(&self.trees, row)
        }
    }
}

impl Learner for (ModelFamily, ModelParams) {
    type Model = TrainedModel;
    fn fit(&self, x: &FeatureMatrix, y: &[u8], rows: &[usize], seed: u64) -> Result<TrainedModel, MlError> {
        fit_model(x, y, rows, self.0, self.1, seed)
    }
}

impl TrainedModel {
    /// Predict on a matrix whose columns are matched to the manifest by name.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>, MlError> {
        let cols = self
            .feature_manifest
            .iter()
            .map(|n| x.column_index(n).ok_or_else(|| MlError::UnknownFeature(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut buf = vec![0.0; cols.len()];
        Ok((0..x.n_rows())
            .map(|i| {
                for (b, &c) in buf.iter_mut().zip(&cols) {
                    *b = x.get(i, c);
                }
                self.predict_row(&buf)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String, MlError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, MlError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Features sorted by importance, descending; ties in name order.
    pub fn ranked_features(&self) -> Vec<String> {
        let mut v: Vec<(&String, f64)> = self.importances.iter().map(|(k, &v)| (k, v)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v.into_iter().map(|(k, _)| k.clone()).collect()
    }
}

fn check_rows(x: &FeatureMatrix, y: &[u8], rows: &[usize]) -> Result<(), MlError> {
    if y.len() != x.n_rows() {
        return Err(MlError::LengthMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(MlError::InvalidParams(format!("label {bad} is not binary")));
    }
    if rows.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.n_rows()) {
        return Err(MlError::Shape(format!("row {r} out of range")));
    }
    Ok(())
}

fn assemble(
    kind: ModelFamily,
    trees: Vec<Tree>,
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    params: ModelParams,
    seed: u64,
) -> TrainedModel {
    let d = x.n_cols();
    let mut imp = vec![0.0; d];
    for t in &trees {
        for (a, b) in imp.iter_mut().zip(&t.importances) {
            *a += b / trees.len() as f64;
        }
    }
    // Trees without any split contribute zeros, so the mean can fall short of 1.
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    let first = y[rows[0]];
    TrainedModel {
        kind,
        trees,
        feature_manifest: x.names().to_vec(),
        importances: x.names().iter().cloned().zip(imp).collect(),
        params,
        seed,
        constant: rows.iter().all(|&r| y[r] == first),
    }
}

/// Fit a single tree on `rows`.
pub fn fit_tree(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    seed: u64,
) -> Result<TrainedModel, MlError> {
    check_rows(x, y, rows)?;
    let mut w = vec![0u32; x.n_rows()];
    rows.iter().for_each(|&r| w[r] += 1);
    let tree = Tree::fit(x, y, &w, params, &mut seed::rng(tree_seed(seed, 0)))?;
    Ok(assemble(
        ModelFamily::DecisionTree,
        vec![tree],
        x,
        y,
        rows,
        ModelParams::Tree(*params),
        seed,
    ))
}

/// Fit a forest on `rows`; the family follows `params.stratified_bootstrap`.
pub fn fit_forest(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<TrainedModel, MlError> {
    check_rows(x, y, rows)?;
    let trees = fit_trees(x, y, rows, params, seed)?;
    let kind = if params.stratified_bootstrap {
        ModelFamily::StratifiedRandomForest
    } else {
        ModelFamily::RandomForest
    };
    Ok(assemble(kind, trees, x, y, rows, ModelParams::Forest(*params), seed))
}

pub fn fit_model(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    family: ModelFamily,
    params: ModelParams,
    seed: u64,
) -> Result<TrainedModel, MlError> {
    let mut model = match params.for_family(family)? {
        ModelParams::Tree(p) => fit_tree(x, y, rows, &p, seed)?,
        ModelParams::Forest(p) => fit_forest(x, y, rows, &p, seed)?,
    };
    model.kind = family;
    Ok(model)
}
