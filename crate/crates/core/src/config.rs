//! Run configuration for the end-to-end audit, loadable from TOML or JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cogsnet::CogsnetParams;
use crate::data::{Format, SyntheticConfig};
use crate::fairness::{Aggregation, MinorityOpinionPolicy};
use crate::graph::{Pipeline, Weighting};
use crate::ml::{Criterion, ForestParams};
use crate::ml::{CvConfig, GridSpec, MaxFeatures, ModelFamily, ModelParams, Splitter, TreeParams};
use crate::opinion::CodingParams;
use crate::{seed, Question};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum DatasetConfig {
    Synthetic(SyntheticConfig),
    Directory { path: PathBuf, format: Format },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlConfig {
    pub folds: usize,
    pub test_fraction: f64,
    /// Families compared per pipeline; the best mean CV F1 is kept.
    pub families: BTreeMap<Pipeline, Vec<ModelFamily>>,
    /// Grid per family; absent families use the default grids.
    pub grids: BTreeMap<ModelFamily, GridSpec>,
    pub subset_selection: bool,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            folds: 10,
            test_fraction: 0.2,
            families: BTreeMap::from([
                (Pipeline::Survey, vec![ModelFamily::StratifiedRandomForest]),
                (Pipeline::Topology, vec![ModelFamily::DecisionTree]),
                (Pipeline::Hybrid, vec![ModelFamily::StratifiedRandomForest]),
            ]),
            grids: BTreeMap::new(),
            subset_selection: true,
        }
    }
}

impl MlConfig {
    pub fn grid(&self, family: ModelFamily) -> GridSpec {
        self.grids
            .get(&family)
            .cloned()
            .unwrap_or_else(|| GridSpec::default_for(family))
    }

    pub fn families(&self, pipeline: Pipeline) -> Vec<ModelFamily> {
        self.families.get(&pipeline).cloned().unwrap_or_else(|| match pipeline {
            Pipeline::Topology => vec![ModelFamily::DecisionTree],
            _ => vec![ModelFamily::StratifiedRandomForest],
        })
    }

    pub fn cv(&self, seed: u64) -> CvConfig {
        CvConfig {
            folds: self.folds,
            test_fraction: self.test_fraction,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdaConfig {
    pub aggregation: Aggregation,
    pub minority_opinion: MinorityOpinionPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub cogsnet: CogsnetParams,
    pub coding: CodingParams,
    pub pipelines: Vec<Pipeline>,
    pub questions: Vec<Question>,
    pub weighting: Weighting,
    pub ml: MlConfig,
    pub eda: EdaConfig,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            dataset: DatasetConfig::default(),
            cogsnet: CogsnetParams::default(),
            coding: CodingParams::default(),
            pipelines: Pipeline::ALL.to_vec(),
            questions: Question::ALL.to_vec(),
            weighting: Weighting::default(),
            ml: MlConfig::default(),
            eda: EdaConfig::default(),
            output_dir: PathBuf::from("fairdyn-out"),
            jobs: None,
        }
    }
}

impl RunConfig {
    /// Twenty synthetic participants, one question and a handful of grid points.
    pub fn smoke() -> Self {
        let tree = TreeParams {
            criterion: Criterion::Gini,
            splitter: Splitter::Best,
            max_depth: Some(3),
            max_features: MaxFeatures::All,
            min_samples_split: 2,
            min_samples_leaf: 1,
        };
        let forest = |n_estimators, max_depth| {
            ModelParams::Forest(ForestParams {
                n_estimators,
                tree: TreeParams {
                    max_depth: Some(max_depth),
                    max_features: MaxFeatures::Sqrt,
                    min_samples_split: 4,
                    min_samples_leaf: 2,
                    ..tree
                },
                bootstrap: true,
                stratified_bootstrap: true,
            })
        };
        let grids = BTreeMap::from([
            (
                ModelFamily::DecisionTree,
                GridSpec::Explicit(vec![
                    ModelParams::Tree(tree),
                    ModelParams::Tree(TreeParams {
                        max_depth: Some(1),
                        ..tree
                    }),
                ]),
            ),
            (
                ModelFamily::StratifiedRandomForest,
                GridSpec::Explicit(vec![forest(10, 2), forest(10, 4)]),
            ),
            (ModelFamily::RandomForest, GridSpec::Explicit(vec![forest(10, 3)])),
        ]);
        RunConfig {
            dataset: DatasetConfig::Synthetic(SyntheticConfig {
                population: 20,
                ..SyntheticConfig::default()
            }),
            questions: vec![Question::Euthanasia],
            ml: MlConfig {
                folds: 3,
                grids,
                ..MlConfig::default()
            },
            output_dir: PathBuf::from("fairdyn-smoke"),
            ..RunConfig::default()
        }
    }

    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "smoke" => Some(Self::smoke()),
            _ => None,
        }
    }

    /// Parse TOML, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let cfg: RunConfig = parsed.map_err(|message| ConfigError::Read {
            path: path.display().to_string(),
            message,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.pipelines.is_empty() {
            return bad("at least one pipeline must be selected".into());
        }
        if self.questions.is_empty() {
            return bad("at least one question must be selected".into());
        }
        if let DatasetConfig::Synthetic(s) = &self.dataset {
            s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.cogsnet
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.coding.validate().map_err(ConfigError::Invalid)?;
        self.ml
            .cv(0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for p in &self.pipelines {
            if self.ml.families(*p).is_empty() {
                return bad(format!("no model family configured for the {p} pipeline"));
            }
        }
        for (family, grid) in &self.ml.grids {
            let configs = grid.configs();
            if configs.is_empty() {
                return bad(format!("empty grid for {family}"));
            }
            for c in configs {
                let checked = c.for_family(*family).and_then(|p| match p {
                    ModelParams::Tree(t) => t.validate(),
                    ModelParams::Forest(f) => f.validate(),
                });
                checked.map_err(|e| ConfigError::Invalid(format!("grid for {family}: {e}")))?;
            }
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        Ok(())
    }

    /// Hash of everything that influences results; the output location and
    /// worker count are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.jobs = None;
        seed::config_hash(&c)
    }

    /// Defaults in force that the source study leaves open, for the report.
    pub fn convention_flags(&self) -> BTreeMap<String, String> {
        let w = match self.weighting {
            Weighting::Weighted => "weighted; path length = 1/weight",
            Weighting::Unweighted => "unweighted",
        };
        [
            ("centrality_weighting", w.to_string()),
            (
                "degree",
                "neighbor count; weighted totals are the cogsnet_weight_sum column".into(),
            ),
            (
                "disconnected_graphs",
                "per-component computation; closeness scaled by reachable share".into(),
            ),
            (
                "isolates",
                "0 on every centrality except subgraph = 1 and pagerank".into(),
            ),
            ("snapshot_time", "wave timestamp of the sample".into()),
            (
                "survey_missing_values",
                "zero-filled with <name>_missing indicator columns".into(),
            ),
            ("survey_carry_forward", "latest answer at or before the wave".into()),
            (
                "minority_opinion_pole",
                "rarer of A and B pooled over waves; B on ties".into(),
            ),
            (
                "minority_opinion_ab",
                if self.eda.minority_opinion.ab_as_minority_when_rarer {
                    "AB counts as the minority opinion when rarer than both poles"
                } else {
                    "AB is neither pole"
                }
                .into(),
            ),
            ("eda_aggregation", format!("{:?}", self.eda.aggregation)),
            ("volatility_missing", "a missing wave breaks adjacency".into()),
            (
                "subgroup_f1",
                "shared held-out test set restricted to the subgroup".into(),
            ),
            ("undetermined_minority", "counted in the complement".into()),
            ("tree_split_ties", "lowest feature index, then lowest threshold".into()),
            ("tree_leaf_ties", "class 0 (correctly predicted)".into()),
            ("min_samples", "measured in bootstrap-weighted counts".into()),
            ("stratified_rf", "per-class bootstrap with exact class counts".into()),
            ("forest_vote_ties", "class 0".into()),
            (
                "family_selection",
                "highest mean CV F1; first listed family on ties".into(),
            ),
            (
                "subset_selection",
                format!("{} (top 15/20/30/all, smaller k on ties)", self.ml.subset_selection),
            ),
            (
                "folds",
                format!(
                    "{} (lowered to the training minority count when smaller)",
                    self.ml.folds
                ),
            ),
            ("test_fraction", self.ml.test_fraction.to_string()),
            ("coding_init", format!("{:?}", self.coding.init_policy)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        for cfg in [RunConfig::default(), RunConfig::smoke()] {
            let text = cfg.to_toml();
            let back: RunConfig = toml::from_str(&text).unwrap();
            assert_eq!(back, cfg);
            back.validate().unwrap();
        }
    }

    #[test]
    fn partial_toml_takes_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 7\nquestions = [\"marijuana\"]\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.questions, vec![Question::Marijuana]);
        assert_eq!(cfg.ml.folds, 10);
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = RunConfig::smoke();
        let h = a.hash();
        a.output_dir = "elsewhere".into();
        a.jobs = Some(2);
        assert_eq!(a.hash(), h);
        a.seed += 1;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn empty_selection_is_invalid() {
        let mut c = RunConfig::smoke();
        c.pipelines.clear();
        assert!(c.validate().is_err());
    }
}
