//! Stratified cross-validation, exhaustive grid search and the top-k
//! feature-subset loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{fit_model, Learner, ModelFamily, ModelParams, Predictor};
use super::split::stratified_kfold;
use super::tree::{MaxFeatures, Splitter, TreeParams};
use super::{f1_score, Criterion, FeatureMatrix, ForestParams, MlError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<(), MlError> {
        if self.folds < 2 {
            return Err(MlError::InfeasibleFolds {
                folds: self.folds,
                reason: "at least 2 folds are needed".into(),
            });
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(MlError::InvalidParams(format!(
                "test_fraction {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_f1: f64,
    pub fold_f1: Vec<f64>,
}

fn run_folds<L: Learner>(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    folds: &[Vec<usize>],
    learner: &L,
    seed: u64,
) -> Result<CvResult, MlError> {
    let mut fold_f1 = Vec::with_capacity(folds.len());
    let mut in_fold = vec![false; x.n_rows()];
    for (k, fold) in folds.iter().enumerate() {
        fold.iter().for_each(|&r| in_fold[r] = true);
        let train: Vec<usize> = rows.iter().copied().filter(|&r| !in_fold[r]).collect();
        fold.iter().for_each(|&r| in_fold[r] = false);
        let model = learner.fit(x, y, &train, seed::derive_indexed(seed, "fold", k))?;
        let truth: Vec<u8> = fold.iter().map(|&r| y[r]).collect();
        let pred: Vec<u8> = fold.iter().map(|&r| model.predict_row(x.row(r))).collect();
        fold_f1.push(f1_score(&truth, &pred)?);
    }
    let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
    Ok(CvResult { mean_f1, fold_f1 })
}

/// Stratified k-fold F1 of `learner` over `rows`.
pub fn cross_validate<L: Learner>(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    learner: &L,
    config: &CvConfig,
) -> Result<CvResult, MlError> {
    config.validate()?;
    let folds = stratified_kfold(y, rows, config.folds, config.seed)?;
    run_folds(x, y, rows, &folds, learner, config.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeGrid {
    pub criterion: Vec<Criterion>,
    pub splitter: Vec<Splitter>,
    pub max_depth: Vec<Option<usize>>,
    pub max_features: Vec<MaxFeatures>,
    pub min_samples_leaf: Vec<usize>,
    pub min_samples_split: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub bootstrap: Vec<bool>,
    pub criterion: Vec<Criterion>,
}

/// Hyperparameter search space. Expansion order is the field order, with the
/// last field varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Tree(TreeGrid),
    Forest(ForestGrid),
    Explicit(Vec<ModelParams>),
}

impl GridSpec {
    pub fn default_tree() -> Self {
        GridSpec::Tree(TreeGrid {
            criterion: vec![Criterion::Gini, Criterion::Entropy, Criterion::LogLoss],
            splitter: vec![Splitter::Best, Splitter::Random],
            max_depth: vec![Some(1), Some(25), Some(50)],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::All],
            min_samples_leaf: vec![1, 5, 10],
            min_samples_split: vec![2],
        })
    }

    pub fn default_forest() -> Self {
        GridSpec::Forest(ForestGrid {
            n_estimators: (50..=400).step_by(50).collect(),
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2],
            max_depth: (2..=8).map(Some).collect(),
            min_samples_split: (4..=8).collect(),
            min_samples_leaf: (2..=4).collect(),
            bootstrap: vec![true, false],
            criterion: vec![Criterion::Gini, Criterion::Entropy],
        })
    }

    pub fn default_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::DecisionTree => Self::default_tree(),
            _ => Self::default_forest(),
        }
    }

    pub fn configs(&self) -> Vec<ModelParams> {
        let mut out = Vec::new();
        match self {
            GridSpec::Tree(g) => {
                for &criterion in &g.criterion {
                    for &splitter in &g.splitter {
                        for &max_depth in &g.max_depth {
                            for &max_features in &g.max_features {
                                for &min_samples_leaf in &g.min_samples_leaf {
                                    for &min_samples_split in &g.min_samples_split {
                                        out.push(ModelParams::Tree(TreeParams {
                                            criterion,
                                            splitter,
                                            max_depth,
                                            max_features,
                                            min_samples_split,
                                            min_samples_leaf,
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            GridSpec::Forest(g) => {
                for &n_estimators in &g.n_estimators {
                    for &max_features in &g.max_features {
                        for &max_depth in &g.max_depth {
                            for &min_samples_split in &g.min_samples_split {
                                for &min_samples_leaf in &g.min_samples_leaf {
                                    for &bootstrap in &g.bootstrap {
                                        for &criterion in &g.criterion {
                                            out.push(ModelParams::Forest(ForestParams {
                                                n_estimators,
                                                tree: TreeParams {
                                                    criterion,
                                                    splitter: Splitter::Best,
                                                    max_depth,
                                                    max_features,
                                                    min_samples_split,
                                                    min_samples_leaf,
                                                },
                                                bootstrap,
                                                stratified_bootstrap: false,
                                            }));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            GridSpec::Explicit(v) => out.extend(v.iter().copied()),
        }
        out
    }

    pub fn len(&self) -> usize {
        match self {
            GridSpec::Tree(g) => {
                g.criterion.len()
                    * g.splitter.len()
                    * g.max_depth.len()
                    * g.max_features.len()
                    * g.min_samples_leaf.len()
                    * g.min_samples_split.len()
            }
            GridSpec::Forest(g) => {
                g.n_estimators.len()
                    * g.max_features.len()
                    * g.max_depth.len()
                    * g.min_samples_split.len()
                    * g.min_samples_leaf.len()
                    * g.bootstrap.len()
                    * g.criterion.len()
            }
            GridSpec::Explicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub index: usize,
    pub params: ModelParams,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub family: ModelFamily,
    pub best_index: usize,
    pub best: ModelParams,
    pub best_cv: CvResult,
    pub table: Vec<GridEntry>,
}

impl GridResult {
    /// One row per configuration: index, family, params as JSON, mean and per-fold F1.
    pub fn to_csv(&self) -> Result<String, MlError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| MlError::Shape(e.to_string());
        w.write_record(["index", "family", "params", "mean_f1", "fold_f1"])
            .map_err(io)?;
        for e in &self.table {
            let folds: Vec<String> = e.cv.fold_f1.iter().map(|f| format!("{f:.6}")).collect();
            w.write_record([
                e.index.to_string(),
                self.family.to_string(),
                serde_json::to_string(&e.params)?,
                format!("{:.6}", e.cv.mean_f1),
                folds.join(";"),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| MlError::Shape(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Evaluate every configuration with the same folds and keep the best mean F1;
/// the earliest configuration wins ties.
pub fn grid_search(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    family: ModelFamily,
    grid: &GridSpec,
    config: &CvConfig,
) -> Result<GridResult, MlError> {
    config.validate()?;
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(MlError::EmptyGrid);
    }
    let folds = stratified_kfold(y, rows, config.folds, config.seed)?;
    let table = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, p)| {
            let params = p.for_family(family)?;
            let cv = run_folds(x, y, rows, &folds, &(family, params), config.seed)?;
            Ok(GridEntry { index, params, cv })
        })
        .collect::<Result<Vec<_>, MlError>>()?;
    let mut best = 0;
    for (i, e) in table.iter().enumerate() {
        if e.cv.mean_f1 > table[best].cv.mean_f1 {
            best = i;
        }
    }
    Ok(GridResult {
        family,
        best_index: best,
        best: table[best].params,
        best_cv: table[best].cv.clone(),
        table,
    })
}

/// Candidate subset sizes for a feature set of `width` columns.
pub fn subset_sizes(width: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [15, 20, 30].into_iter().filter(|&k| k < width).collect();
    v.push(width);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    /// All features by importance of the full-width fit.
    pub ranking: Vec<String>,
    /// `(k, cv)` for each evaluated subset size.
    pub evaluated: Vec<(usize, CvResult)>,
    pub best_k: usize,
    pub features: Vec<String>,
    pub cv: CvResult,
}

/// Rank features by the importances of a full-width fit, then cross-validate
/// the top 15, 20 and 30 and the full set; the smallest best-scoring subset wins.
pub fn iterative_subset_selection(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    family: ModelFamily,
    params: ModelParams,
    config: &CvConfig,
) -> Result<SubsetResult, MlError> {
    config.validate()?;
    let full = fit_model(x, y, rows, family, params, seed::derive(config.seed, &["subset"]))?;
    let ranking = full.ranked_features();
    let folds = stratified_kfold(y, rows, config.folds, config.seed)?;
    let learner = (family, params);
    let mut evaluated = Vec::new();
    let mut best: Option<(usize, CvResult)> = None;
    for k in subset_sizes(x.n_cols()) {
        let sub = x.select(&ranking[..k])?;
        let cv = run_folds(&sub, y, rows, &folds, &learner, config.seed)?;
        if best.as_ref().is_none_or(|(_, b)| cv.mean_f1 > b.mean_f1) {
            best = Some((k, cv.clone()));
        }
        evaluated.push((k, cv));
    }
    let (best_k, cv) = best.expect("at least one subset size");
    Ok(SubsetResult {
        features: ranking[..best_k].to_vec(),
        ranking,
        evaluated,
        best_k,
        cv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        assert_eq!(GridSpec::default_tree().len(), 162);
        assert_eq!(GridSpec::default_tree().configs().len(), 162);
        assert_eq!(GridSpec::default_forest().len(), 6720);
    }

    #[test]
    fn subset_sizes_filter_by_width() {
        assert_eq!(subset_sizes(10), vec![10]);
        assert_eq!(subset_sizes(20), vec![15, 20]);
        assert_eq!(subset_sizes(100), vec![15, 20, 30, 100]);
    }
}
