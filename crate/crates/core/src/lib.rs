//! Auditing toolkit for opinion-dynamics misclassification.
//!
//! The pipeline runs a hybrid continuous/discrete opinion model (CoDiNG) over a
//! cognitively decaying temporal network (CogSNet), labels the participants whose
//! survey answers the model gets wrong, and trains interpretable tree classifiers
//! on survey, topology and hybrid features to check whether those errors are
//! predictable and whether they fall disproportionately on minority subgroups.
//!
//! Modules map onto the stages:
//!
//! - [`data`]: schemas, loading, minority derivation, synthetic populations
//! - [`cogsnet`]: event-driven edge reinforcement with exponential forgetting
//! - [`opinion`]: CoDiNG and Naming Game simulation, misprediction labels
//! - [`graph`]: centrality battery and feature assembly
//! - [`ml`]: decision trees, forests, stratified CV, grid search, subset selection
//! - [`fairness`]: EDA metrics, subgroup F1 and the audit report
//! - [`pipeline`]: end-to-end orchestration driven by [`config::RunConfig`]

pub mod cogsnet;
pub mod config;
pub mod data;
pub mod fairness;
pub mod graph;
pub mod ml;
pub mod opinion;
pub mod pipeline;
pub mod seed;

pub use data::{Dataset, Minority, Question, Stance};
