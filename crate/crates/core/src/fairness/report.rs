//! Subgroup F1 evaluation and the audit report document.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::reference::{eda_references, general_reference, subgroup_f1, table_f1, ReferenceF1, ReferenceRate};
use super::{GroupRate, IntersectionalityCurve, MinorityOpinionRates, Subgroup, VolatilityStat};
use crate::data::{MinorityMembership, Typology};
use crate::graph::{LabeledMatrix, Pipeline};
use crate::ml::{f1_score, MlError, ModelFamily, ModelParams, Predictor, TrainedModel};
use crate::Question;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report JSON does not match the schema: {0}")]
    Schema(String),
    #[error("unsupported report schema version {0}")]
    Version(u32),
    #[error(transparent)]
    Ml(#[from] MlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub question: Question,
    pub pipeline: Pipeline,
    pub subgroup: Subgroup,
    /// `None` when no test sample belongs to the subgroup.
    pub f1_subgroup: Option<f64>,
    pub f1_general: f64,
    pub n_subgroup: usize,
    pub n_general: usize,
    pub positives: usize,
    pub predicted_positives: usize,
    /// No positives and no predicted positives: F1 is reported as 0.
    pub degenerate: bool,
    /// General-population value of the published tables, for display.
    pub reference_f1: ReferenceF1,
}

/// F1 on the test rows overall and restricted to every subgroup.
pub fn subgroup_f1_from_predictions(
    truth: &[u8],
    pred: &[u8],
    participants: &[&str],
    memberships: &[MinorityMembership],
    question: Question,
    pipeline: Pipeline,
) -> Result<Vec<SubgroupReport>, MlError> {
    for len in [pred.len(), participants.len()] {
        if len != truth.len() {
            return Err(MlError::LengthMismatch {
                expected: truth.len(),
                got: len,
            });
        }
    }
    let by_id: BTreeMap<&str, &MinorityMembership> =
        memberships.iter().map(|m| (m.participant_id.as_str(), m)).collect();
    let f1_general = f1_score(truth, pred)?;
    let reference = general_reference(question, pipeline);
    Subgroup::all()
        .into_iter()
        .map(|subgroup| {
            let idx: Vec<usize> = (0..truth.len())
                .filter(|&i| match subgroup {
                    Subgroup::General => true,
                    s => by_id.get(participants[i]).is_some_and(|m| s.contains(m)),
                })
                .collect();
            let t: Vec<u8> = idx.iter().map(|&i| truth[i]).collect();
            let p: Vec<u8> = idx.iter().map(|&i| pred[i]).collect();
            let positives = t.iter().filter(|&&v| v == 1).count();
            let predicted_positives = p.iter().filter(|&&v| v == 1).count();
            let f1 = if idx.is_empty() { None } else { Some(f1_score(&t, &p)?) };
            Ok(SubgroupReport {
                question,
                pipeline,
                subgroup,
                f1_subgroup: f1,
                f1_general,
                n_subgroup: idx.len(),
                n_general: truth.len(),
                positives,
                predicted_positives,
                degenerate: !idx.is_empty() && positives == 0 && predicted_positives == 0,
                reference_f1: reference.clone(),
            })
        })
        .collect()
}

/// Predict the `test_rows` of `data` with `model` and report subgroup F1.
pub fn subgroup_f1_report(
    model: &TrainedModel,
    data: &LabeledMatrix,
    test_rows: &[usize],
    memberships: &[MinorityMembership],
    question: Question,
    pipeline: Pipeline,
) -> Result<Vec<SubgroupReport>, MlError> {
    let test = data.matrix.select(&model.feature_manifest)?;
    let truth: Vec<u8> = test_rows.iter().map(|&r| data.targets[r]).collect();
    let pred: Vec<u8> = test_rows.iter().map(|&r| model.predict_row(test.row(r))).collect();
    let ids: Vec<&str> = test_rows
        .iter()
        .map(|&r| data.keys[r].participant_id.as_str())
        .collect();
    subgroup_f1_from_predictions(&truth, &pred, &ids, memberships, question, pipeline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: ModelFamily,
    pub cv_f1: f64,
    pub params: ModelParams,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub pipeline: Pipeline,
    pub family: ModelFamily,
    pub candidates: Vec<FamilyScore>,
    pub params: ModelParams,
    pub cv_f1: f64,
    pub test_f1: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub width: usize,
    pub subset_k: usize,
    pub subset_scores: Vec<(usize, f64)>,
    pub features: Vec<String>,
    pub top_importances: Vec<(String, f64)>,
    pub constant_model: bool,
    pub model_artifact: String,
    pub model_sha256: String,
    pub subgroups: Vec<SubgroupReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub question: Question,
    pub typology: Typology,
    pub n_samples: usize,
    pub positives: usize,
    pub minority_opinion: Option<MinorityOpinionRates>,
    pub volatility: Vec<VolatilityStat>,
    pub baseline_misprediction: Vec<GroupRate>,
    pub intersectionality: IntersectionalityCurve,
    pub pipelines: Vec<PipelineReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBlock {
    pub note: String,
    pub table_f1: Vec<ReferenceF1>,
    pub subgroup_f1: Vec<ReferenceF1>,
    pub eda: Vec<ReferenceRate>,
}

impl ReferenceBlock {
    pub fn embedded() -> Self {
        ReferenceBlock {
            note: "published values for comparison only; never used as thresholds".into(),
            table_f1: table_f1(),
            subgroup_f1: subgroup_f1(),
            eda: eda_references(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditReport {
    pub schema_version: u32,
    pub tool: String,
    pub config_hash: String,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub convention_flags: BTreeMap<String, String>,
    pub questions: Vec<QuestionReport>,
    pub references: ReferenceBlock,
}

/// Assemble the report. Questions are sorted so the document does not depend
/// on evaluation order.
pub fn compile_audit_report(
    config_hash: &str,
    seed: u64,
    seeds: BTreeMap<String, u64>,
    convention_flags: BTreeMap<String, String>,
    mut questions: Vec<QuestionReport>,
) -> AuditReport {
    questions.sort_by_key(|q| q.question);
    for q in &mut questions {
        q.pipelines.sort_by_key(|p| p.pipeline);
    }
    AuditReport {
        schema_version: SCHEMA_VERSION,
        tool: "fairdyn".into(),
        config_hash: config_hash.into(),
        seed,
        seeds,
        convention_flags,
        questions,
        references: ReferenceBlock::embedded(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

fn rate_of(rates: &[GroupRate], s: Subgroup) -> Option<f64> {
    rates.iter().find(|r| r.subgroup == s).and_then(|r| r.rate)
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let r: AuditReport = serde_json::from_str(text).map_err(|e| ReportError::Schema(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Version(r.schema_version));
        }
        Ok(r)
    }

    pub fn provenance_line(&self) -> String {
        format!("# fairdyn config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    fn csv(&self, header: &[&str], rows: Vec<Vec<String>>) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for r in rows {
            w.write_record(&r).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        self.provenance_line() + &body
    }

    /// One row per (question, pipeline, subgroup) with every metric side by side.
    pub fn to_flat_csv(&self) -> String {
        let mut rows = Vec::new();
        for q in &self.questions {
            let opinion = q.minority_opinion.as_ref().map(|m| m.rates.as_slice()).unwrap_or(&[]);
            for p in &q.pipelines {
                for s in &p.subgroups {
                    let vol = q
                        .volatility
                        .iter()
                        .find(|v| v.subgroup == s.subgroup)
                        .and_then(|v| v.mean_changes);
                    rows.push(vec![
                        q.question.to_string(),
                        format!("{:?}", q.typology).to_lowercase(),
                        p.pipeline.to_string(),
                        p.family.to_string(),
                        s.subgroup.to_string(),
                        s.n_subgroup.to_string(),
                        opt(s.f1_subgroup),
                        format!("{:.6}", s.f1_general),
                        s.degenerate.to_string(),
                        format!("{:.4}", s.reference_f1.f1),
                        opt(rate_of(&q.baseline_misprediction, s.subgroup)),
                        opt(vol),
                        opt(rate_of(opinion, s.subgroup)),
                    ]);
                }
            }
        }
        self.csv(
            &[
                "question",
                "typology",
                "pipeline",
                "family",
                "subgroup",
                "n_test",
                "f1_subgroup",
                "f1_general",
                "degenerate",
                "reference_f1",
                "baseline_misprediction",
                "volatility",
                "minority_opinion_rate",
            ],
            rows,
        )
    }

    /// Plot-ready `question,pipeline,subgroup,metric,value` rows. Metrics that
    /// do not depend on a pipeline use the pipeline `none`.
    pub fn to_long_csv(&self) -> String {
        let mut rows = Vec::new();
        let mut push = |q: Question, p: &str, s: String, metric: &str, v: f64| {
            rows.push(vec![
                q.to_string(),
                p.to_string(),
                s,
                metric.to_string(),
                format!("{v:.6}"),
            ]);
        };
        for q in &self.questions {
            for r in &q.baseline_misprediction {
                if let Some(v) = r.rate {
                    push(q.question, "none", r.subgroup.to_string(), "baseline_misprediction", v);
                }
            }
            for v in &q.volatility {
                if let Some(x) = v.mean_changes {
                    push(q.question, "none", v.subgroup.to_string(), "volatility", x);
                }
            }
            if let Some(m) = &q.minority_opinion {
                for r in &m.rates {
                    if let Some(v) = r.rate {
                        push(q.question, "none", r.subgroup.to_string(), "minority_opinion_rate", v);
                    }
                }
            }
            for pt in &q.intersectionality.points {
                push(q.question, "none", format!("k={}", pt.k), "misprediction_by_k", pt.rate);
            }
            for p in &q.pipelines {
                push(q.question, p.pipeline.name(), "general".into(), "cv_f1", p.cv_f1);
                push(q.question, p.pipeline.name(), "general".into(), "test_f1", p.test_f1);
                push(
                    q.question,
                    p.pipeline.name(),
                    "general".into(),
                    "reference_f1",
                    general_reference(q.question, p.pipeline).f1,
                );
                for s in &p.subgroups {
                    if let Some(f) = s.f1_subgroup {
                        push(q.question, p.pipeline.name(), s.subgroup.to_string(), "f1", f);
                    }
                }
            }
        }
        self.csv(&["question", "pipeline", "subgroup", "metric", "value"], rows)
    }

    /// Text tables with one block per question: subgroup rows against the
    /// pipelines, then the general population and its reference values.
    pub fn summary(&self) -> String {
        let mut out = self.provenance_line();
        for q in &self.questions {
            writeln!(out).unwrap();
            writeln!(
                out,
                "== {} ({}) samples={} mispredicted={}",
                q.question,
                format!("{:?}", q.typology).to_lowercase(),
                q.n_samples,
                q.positives
            )
            .unwrap();
            let pipes: Vec<&PipelineReport> = q.pipelines.iter().collect();
            let mut header = format!("{:<22}", "subgroup");
            for p in &pipes {
                write!(header, "{:>12}", format!("{}", p.pipeline)).unwrap();
            }
            writeln!(out, "{header}").unwrap();
            for s in Subgroup::all()
                .into_iter()
                .filter(|s| !matches!(s, Subgroup::Complement(_)))
            {
                let mut line = format!("{:<22}", s.to_string());
                for p in &pipes {
                    let cell = p
                        .subgroups
                        .iter()
                        .find(|r| r.subgroup == s)
                        .map(|r| match (r.f1_subgroup, r.degenerate) {
                            (Some(f), false) => format!("{f:.3}"),
                            (Some(f), true) => format!("{f:.3}*"),
                            (None, _) => "-".into(),
                        })
                        .unwrap_or_else(|| "-".into());
                    write!(line, "{cell:>12}").unwrap();
                }
                writeln!(out, "{line}").unwrap();
            }
            let mut line = format!("{:<22}", "reference (general)");
            for p in &pipes {
                write!(
                    line,
                    "{:>12}",
                    format!("{:.4}", general_reference(q.question, p.pipeline).f1)
                )
                .unwrap();
            }
            writeln!(out, "{line}").unwrap();
            for p in &pipes {
                writeln!(
                    out,
                    "  {}: {} cv_f1={:.4} test_f1={:.4} features={}/{}",
                    p.pipeline, p.family, p.cv_f1, p.test_f1, p.subset_k, p.width
                )
                .unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Minority;

    fn membership(id: &str, gender: bool) -> MinorityMembership {
        MinorityMembership {
            participant_id: id.into(),
            flags: Minority::ALL
                .into_iter()
                .map(|m| (m, m == Minority::Gender && gender))
                .collect(),
            undetermined: Default::default(),
            intersection_count: gender as u8,
        }
    }

    #[test]
    fn general_row_matches_overall_f1() {
        let ms = vec![membership("a", true), membership("b", false)];
        let truth = [1, 0, 1, 1];
        let pred = [1, 0, 0, 1];
        let ids = ["a", "a", "b", "b"];
        let r = subgroup_f1_from_predictions(&truth, &pred, &ids, &ms, Question::Euthanasia, Pipeline::Survey).unwrap();
        assert_eq!(r[0].subgroup, Subgroup::General);
        assert_eq!(r[0].f1_subgroup, Some(r[0].f1_general));
        assert_eq!(r[0].reference_f1.f1, 0.5602);
        let g = r
            .iter()
            .find(|x| x.subgroup == Subgroup::Members(Minority::Gender))
            .unwrap();
        assert_eq!((g.f1_subgroup, g.n_subgroup), (Some(1.0), 2));
        let e = r
            .iter()
            .find(|x| x.subgroup == Subgroup::Members(Minority::Ethnicity))
            .unwrap();
        assert_eq!((e.f1_subgroup, e.n_subgroup), (None, 0));
    }

    #[test]
    fn degenerate_subgroup_is_flagged() {
        let ms = vec![membership("a", true), membership("b", false)];
        let r = subgroup_f1_from_predictions(&[0, 1], &[0, 1], &["a", "b"], &ms, Question::Jobguar, Pipeline::Hybrid)
            .unwrap();
        let g = r
            .iter()
            .find(|x| x.subgroup == Subgroup::Members(Minority::Gender))
            .unwrap();
        assert!(g.degenerate);
        assert_eq!(g.f1_subgroup, Some(0.0));
    }
}
