//! End-to-end audit: data, CogSNet, CoDiNG, labels, features, model selection,
//! subgroup evaluation and the report.
//!
//! All randomness flows from `RunConfig::seed` through named derivations, so a
//! run is reproducible from its config alone. Every file written carries the
//! config hash and root seed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{DatasetConfig, RunConfig};
use crate::data::{
    derive_minorities, generate_synthetic, load_dataset, save_dataset, Dataset, DatasetSource, Format,
    MinorityMembership, SyntheticOutput, Wave, FIRST_WAVE, LAST_WAVE,
};
use crate::fairness::{
    baseline_misprediction_rate, compile_audit_report, minority_opinion_rate, misprediction_by_intersectionality,
    opinion_volatility, subgroup_f1_report, AuditReport, FamilyScore, PipelineReport, QuestionReport,
};
use crate::graph::{
    assemble_hybrid, build_matrix, extract_survey_features, extract_topology_features, FeatureVector, LabeledMatrix,
    Pipeline,
};
use crate::ml::{
    f1_score, fit_model, grid_search, iterative_subset_selection, stratified_split, ModelFamily, Predictor,
    TrainedModel,
};
use crate::opinion::{
    label_mispredictions, run_coding, samples_csv, simulation_seed, trace_csv, MisclassificationSample,
};
use crate::{seed, Question};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Generate,
    Simulate,
    Label,
    Features,
    Split,
    GridSearch,
    SubsetSelection,
    Train,
    Evaluate,
    Report,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Generate => "generate",
            Stage::Simulate => "simulate",
            Stage::Label => "label",
            Stage::Features => "features",
            Stage::Split => "split",
            Stage::GridSearch => "grid-search",
            Stage::SubsetSelection => "subset-selection",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

/// A failed stage, with whatever artifacts were already on disk.
#[derive(Debug, Error)]
#[error("stage {stage} failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
    pub partial_artifacts: Vec<PathBuf>,
}

/// Writes files under the output directory, stamping each with provenance.
pub struct ArtifactWriter {
    dir: PathBuf,
    hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, config: &RunConfig) -> Result<Self, StageError> {
        std::fs::create_dir_all(dir).map_err(|e| StageError {
            stage: Stage::Write,
            message: format!("{}: {e}", dir.display()),
            partial_artifacts: Vec::new(),
        })?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            hash: config.hash(),
            seed: config.seed,
            written: Vec::new(),
        })
    }

    pub fn provenance_line(&self) -> String {
        format!("# fairdyn config_hash={} seed={}\n", self.hash, self.seed)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }

    pub fn fail(&self, stage: Stage, message: impl fmt::Display) -> StageError {
        StageError {
            stage,
            message: message.to_string(),
            partial_artifacts: self.written.clone(),
        }
    }

    /// Write `contents` verbatim; it must already carry provenance.
    pub fn write_raw(&mut self, name: &str, contents: &str) -> Result<PathBuf, StageError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| self.fail(Stage::Write, format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, contents).map_err(|e| self.fail(Stage::Write, format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// CSV or text with a leading provenance comment.
    pub fn write_text(&mut self, name: &str, body: &str) -> Result<PathBuf, StageError> {
        let text = self.provenance_line() + body;
        self.write_raw(name, &text)
    }

    /// JSON object `{config_hash, seed, <key>: value}`.
    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, key: &str, value: &T) -> Result<PathBuf, StageError> {
        let doc = serde_json::json!({
            "config_hash": self.hash,
            "seed": self.seed,
            key: value,
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| self.fail(Stage::Write, e))?;
        text.push('\n');
        self.write_raw(name, &text)
    }
}

fn target_waves() -> Vec<Wave> {
    (FIRST_WAVE + 1..=LAST_WAVE).collect()
}

/// Synthetic config with the run's model parameters as its reference model,
/// so the planted patterns hold for the CoDiNG run the audit performs.
pub fn synthetic_for_run(config: &RunConfig) -> Option<crate::data::SyntheticConfig> {
    match &config.dataset {
        DatasetConfig::Synthetic(s) => {
            let mut s = s.clone();
            s.reference.cogsnet = config.cogsnet;
            s.reference.coding = config.coding;
            Some(s)
        }
        DatasetConfig::Directory { .. } => None,
    }
}

/// Generate the synthetic population of a run (same root seed as the audit).
pub fn generate(config: &RunConfig) -> Result<SyntheticOutput, StageError> {
    let synth = synthetic_for_run(config).ok_or_else(|| StageError {
        stage: Stage::Generate,
        message: "the dataset source is a directory, not a synthetic config".into(),
        partial_artifacts: Vec::new(),
    })?;
    generate_synthetic(&synth, config.seed).map_err(|e| StageError {
        stage: Stage::Generate,
        message: e.to_string(),
        partial_artifacts: Vec::new(),
    })
}

/// Write a generated dataset and a manifest tying it to the config.
pub fn write_dataset(ds: &Dataset, dir: &Path, format: Format, config: &RunConfig) -> Result<Vec<PathBuf>, StageError> {
    let mut w = ArtifactWriter::new(dir, config)?;
    let mut files = save_dataset(ds, dir, format).map_err(|e| w.fail(Stage::Write, e))?;
    w.write_json("run.json", "config", config)?;
    files.extend(w.into_written());
    Ok(files)
}

pub fn load(config: &RunConfig) -> Result<Dataset, StageError> {
    match &config.dataset {
        DatasetConfig::Synthetic(_) => Ok(generate(config)?.dataset),
        DatasetConfig::Directory { path, format } => {
            load_dataset(&DatasetSource::in_dir(path, *format)).map_err(|e| StageError {
                stage: Stage::Load,
                message: e.to_string(),
                partial_artifacts: Vec::new(),
            })
        }
    }
}

fn questions_in(config: &RunConfig, ds: &Dataset) -> Vec<Question> {
    let present = ds.questions();
    let mut qs: Vec<Question> = config
        .questions
        .iter()
        .copied()
        .filter(|q| present.contains(q))
        .collect();
    qs.sort();
    qs.dedup();
    for q in &config.questions {
        if !present.contains(q) {
            warn!("question {q} has no opinions in the dataset; skipped");
        }
    }
    qs
}

/// Simulate and label one question.
fn simulate_and_label(
    config: &RunConfig,
    ds: &Dataset,
    q: Question,
    w: &ArtifactWriter,
) -> Result<(crate::opinion::SimulationTrace, Vec<MisclassificationSample>), StageError> {
    let trace = run_coding(ds, &config.cogsnet, q, &config.coding, simulation_seed(config.seed, q))
        .map_err(|e| w.fail(Stage::Simulate, format!("{q}: {e}")))?;
    let samples = label_mispredictions(&trace, ds.opinions(), ds.calendar())
        .map_err(|e| w.fail(Stage::Label, format!("{q}: {e}")))?;
    Ok((trace, samples))
}

/// Simulation traces and labeled samples only.
pub fn run_simulate(config: &RunConfig) -> Result<Vec<PathBuf>, StageError> {
    config.validate().map_err(|e| StageError {
        stage: Stage::Config,
        message: e.to_string(),
        partial_artifacts: Vec::new(),
    })?;
    let ds = load(config)?;
    let mut w = ArtifactWriter::new(&config.output_dir, config)?;
    for q in questions_in(config, &ds) {
        let (trace, samples) = simulate_and_label(config, &ds, q, &w)?;
        w.write_text(&format!("traces/{q}.csv"), &trace_csv(&trace))?;
        w.write_text(&format!("samples/{q}.csv"), &samples_csv(&samples))?;
    }
    Ok(w.into_written())
}

/// Per-wave feature vectors for the selected pipelines.
struct FeatureStore {
    by_pipeline: BTreeMap<Pipeline, Vec<FeatureVector>>,
}

fn extract_features(config: &RunConfig, ds: &Dataset, w: &ArtifactWriter) -> Result<FeatureStore, StageError> {
    let need_survey = config.pipelines.iter().any(|p| *p != Pipeline::Topology);
    let need_topo = config.pipelines.iter().any(|p| *p != Pipeline::Survey);
    let waves = target_waves();
    let fail = |e: crate::graph::FeatureError| w.fail(Stage::Features, e);
    let mut survey = Vec::new();
    if need_survey {
        for &wave in &waves {
            survey.extend(extract_survey_features(ds, wave).map_err(fail)?);
        }
    }
    let topo = if need_topo {
        info!("computing centralities on {} snapshots", waves.len());
        extract_topology_features(ds, &config.cogsnet, &waves, config.weighting).map_err(fail)?
    } else {
        Vec::new()
    };
    let mut by_pipeline = BTreeMap::new();
    for &p in &config.pipelines {
        let v = match p {
            Pipeline::Survey => survey.clone(),
            Pipeline::Topology => topo.clone(),
            Pipeline::Hybrid => assemble_hybrid(&survey, &topo).map_err(fail)?,
        };
        by_pipeline.insert(p, v);
    }
    Ok(FeatureStore { by_pipeline })
}

/// Labeled feature matrices only.
pub fn run_features(config: &RunConfig) -> Result<Vec<PathBuf>, StageError> {
    config.validate().map_err(|e| StageError {
        stage: Stage::Config,
        message: e.to_string(),
        partial_artifacts: Vec::new(),
    })?;
    let ds = load(config)?;
    let mut w = ArtifactWriter::new(&config.output_dir, config)?;
    let store = extract_features(config, &ds, &w)?;
    for q in questions_in(config, &ds) {
        let (_, samples) = simulate_and_label(config, &ds, q, &w)?;
        for (p, vectors) in &store.by_pipeline {
            let m = build_matrix(vectors, &samples).map_err(|e| w.fail(Stage::Features, e))?;
            w.write_text(&format!("features/{q}_{p}.csv"), &m.to_csv())?;
            w.write_json(&format!("features/{q}_{p}.manifest.json"), "manifest", &m.manifest())?;
        }
    }
    Ok(w.into_written())
}

pub struct AuditOutput {
    pub report: AuditReport,
    pub artifacts: Vec<PathBuf>,
}

fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

struct PipelineContext<'a> {
    config: &'a RunConfig,
    question: Question,
    memberships: &'a [MinorityMembership],
    train: &'a [usize],
    test: &'a [usize],
}

fn evaluate_pipeline(
    ctx: &PipelineContext,
    pipeline: Pipeline,
    data: &LabeledMatrix,
    seeds: &mut BTreeMap<String, u64>,
    w: &mut ArtifactWriter,
) -> Result<PipelineReport, StageError> {
    let (config, q) = (ctx.config, ctx.question);
    let tag = format!("{q}/{pipeline}");
    let y = &data.targets;
    let train_pos = ctx.train.iter().filter(|&&r| y[r] == 1).count();
    let minority = train_pos.min(ctx.train.len() - train_pos);
    let folds = config.ml.folds.min(minority);
    if folds < 2 {
        return Err(w.fail(
            Stage::Split,
            format!("{tag}: the training set has {minority} sample(s) of one class"),
        ));
    }
    if folds < config.ml.folds {
        warn!("{tag}: folds lowered from {} to {folds}", config.ml.folds);
    }
    let cv_seed = seed::derive(config.seed, &["cv", q.shortcode(), pipeline.name()]);
    let cv = crate::ml::CvConfig {
        folds,
        ..config.ml.cv(cv_seed)
    };
    seeds.insert(format!("cv/{tag}"), cv_seed);

    let mut candidates = Vec::new();
    let mut best: Option<(ModelFamily, crate::ml::GridResult)> = None;
    for family in config.ml.families(pipeline) {
        let grid = config.ml.grid(family);
        info!("{tag}: grid search over {} {family} configs", grid.len());
        let result = grid_search(&data.matrix, y, ctx.train, family, &grid, &cv)
            .map_err(|e| w.fail(Stage::GridSearch, format!("{tag} {family}: {e}")))?;
        let csv = result.to_csv().map_err(|e| w.fail(Stage::GridSearch, e))?;
        w.write_text(&format!("grids/{q}_{pipeline}_{family}.csv"), &csv)?;
        candidates.push(FamilyScore {
            family,
            cv_f1: result.best_cv.mean_f1,
            params: result.best,
            grid_size: result.table.len(),
        });
        if best
            .as_ref()
            .is_none_or(|(_, b)| result.best_cv.mean_f1 > b.best_cv.mean_f1)
        {
            best = Some((family, result));
        }
    }
    let (family, grid) = best.expect("at least one family per pipeline");

    let (features, subset_k, subset_scores, cv_f1) = if config.ml.subset_selection {
        let s = iterative_subset_selection(&data.matrix, y, ctx.train, family, grid.best, &cv)
            .map_err(|e| w.fail(Stage::SubsetSelection, format!("{tag}: {e}")))?;
        let scores = s.evaluated.iter().map(|(k, r)| (*k, r.mean_f1)).collect();
        (s.features, s.best_k, scores, s.cv.mean_f1)
    } else {
        let all = data.matrix.names().to_vec();
        let k = all.len();
        (all, k, vec![(k, grid.best_cv.mean_f1)], grid.best_cv.mean_f1)
    };

    let model_seed = seed::derive(config.seed, &["model", q.shortcode(), pipeline.name()]);
    seeds.insert(format!("model/{tag}"), model_seed);
    let x = data.matrix.select(&features).map_err(|e| w.fail(Stage::Train, e))?;
    let model: TrainedModel = fit_model(&x, y, ctx.train, family, grid.best, model_seed)
        .map_err(|e| w.fail(Stage::Train, format!("{tag}: {e}")))?;
    if model.constant {
        warn!("{tag}: single-class training target; the model is constant");
    }

    let truth: Vec<u8> = ctx.test.iter().map(|&r| y[r]).collect();
    let pred: Vec<u8> = ctx.test.iter().map(|&r| model.predict_row(x.row(r))).collect();
    let test_f1 = f1_score(&truth, &pred).map_err(|e| w.fail(Stage::Evaluate, e))?;
    let subgroups = subgroup_f1_report(&model, data, ctx.test, ctx.memberships, q, pipeline)
        .map_err(|e| w.fail(Stage::Evaluate, format!("{tag}: {e}")))?;

    let model_json = model.to_json().map_err(|e| w.fail(Stage::Write, e))?;
    let artifact = format!("models/{q}_{pipeline}.json");
    w.write_json(&artifact, "model", &model)?;

    let mut top: Vec<(String, f64)> = model
        .ranked_features()
        .into_iter()
        .take(10)
        .map(|n| {
            let v = model.importances[&n];
            (n, v)
        })
        .collect();
    top.retain(|(_, v)| *v > 0.0);

    Ok(PipelineReport {
        pipeline,
        family,
        candidates,
        params: grid.best,
        cv_f1,
        test_f1,
        n_train: ctx.train.len(),
        n_test: ctx.test.len(),
        width: data.matrix.n_cols(),
        subset_k,
        subset_scores,
        features,
        top_importances: top,
        constant_model: model.constant,
        model_artifact: artifact,
        model_sha256: sha256_hex(&model_json),
        subgroups,
    })
}

fn audit_question(
    config: &RunConfig,
    ds: &Dataset,
    q: Question,
    memberships: &[MinorityMembership],
    store: &FeatureStore,
    seeds: &mut BTreeMap<String, u64>,
    w: &mut ArtifactWriter,
) -> Result<QuestionReport, StageError> {
    info!("{q}: simulating");
    seeds.insert(format!("simulate/{q}"), simulation_seed(config.seed, q));
    let (_, samples) = simulate_and_label(config, ds, q, w)?;
    w.write_text(&format!("samples/{q}.csv"), &samples_csv(&samples))?;
    let y: Vec<u8> = samples.iter().map(|s| s.target as u8).collect();

    let minority_opinion = match minority_opinion_rate(ds.opinions(), memberships, q, &config.eda.minority_opinion) {
        Ok(r) => Some(r),
        Err(e) => {
            warn!("{q}: {e}");
            None
        }
    };
    let volatility = opinion_volatility(ds.opinions(), memberships, q);
    let baseline = baseline_misprediction_rate(&samples, memberships, config.eda.aggregation)
        .remove(&q)
        .unwrap_or_default();
    let intersectionality = misprediction_by_intersectionality(&samples, memberships, q);

    let split_seed = seed::derive(config.seed, &["split", q.shortcode()]);
    seeds.insert(format!("split/{q}"), split_seed);
    let (train, test) = stratified_split(&y, config.ml.test_fraction, split_seed)
        .map_err(|e| w.fail(Stage::Split, format!("{q}: {e}")))?;
    let ctx = PipelineContext {
        config,
        question: q,
        memberships,
        train: &train,
        test: &test,
    };

    let mut pipelines = Vec::new();
    for (&p, vectors) in &store.by_pipeline {
        let data = build_matrix(vectors, &samples).map_err(|e| w.fail(Stage::Features, format!("{q}/{p}: {e}")))?;
        w.write_json(&format!("features/{q}_{p}.manifest.json"), "manifest", &data.manifest())?;
        pipelines.push(evaluate_pipeline(&ctx, p, &data, seeds, w)?);
    }

    Ok(QuestionReport {
        question: q,
        typology: q.typology(),
        n_samples: samples.len(),
        positives: y.iter().map(|&v| v as usize).sum(),
        minority_opinion,
        volatility,
        baseline_misprediction: baseline,
        intersectionality,
        pipelines,
    })
}

/// The full audit. Artifacts are written as stages complete, so a failure
/// leaves the finished ones behind and lists them in the error.
pub fn run_audit(config: &RunConfig) -> Result<AuditOutput, StageError> {
    config.validate().map_err(|e| StageError {
        stage: Stage::Config,
        message: e.to_string(),
        partial_artifacts: Vec::new(),
    })?;
    let ds = load(config)?;
    let mut w = ArtifactWriter::new(&config.output_dir, config)?;
    w.write_json("run.json", "config", config)?;
    let memberships = derive_minorities(&ds);
    let store = extract_features(config, &ds, &w)?;
    let mut seeds = BTreeMap::from([("root".to_string(), config.seed)]);
    let questions = questions_in(config, &ds);
    if questions.is_empty() {
        return Err(w.fail(
            Stage::Load,
            "none of the selected questions has opinions in the dataset",
        ));
    }
    let mut reports = Vec::new();
    for q in questions {
        reports.push(audit_question(
            config,
            &ds,
            q,
            &memberships,
            &store,
            &mut seeds,
            &mut w,
        )?);
    }
    let report = compile_audit_report(&config.hash(), config.seed, seeds, config.convention_flags(), reports);
    w.write_raw("report.json", &report.to_json())?;
    w.write_raw("report_flat.csv", &report.to_flat_csv())?;
    w.write_raw("report_long.csv", &report.to_long_csv())?;
    w.write_raw("summary.txt", &report.summary())?;
    Ok(AuditOutput {
        report,
        artifacts: w.into_written(),
    })
}
