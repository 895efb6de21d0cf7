//! Per-sample feature vectors for the three pipelines and their assembly into
//! labeled matrices.
//!
//! Survey columns are `survey.<attr>` for numerics and `survey.<attr>=<value>`
//! for each categorical value seen anywhere in the dataset. Topology columns
//! are `topo.<centrality>` on the CogSNet snapshot at the sample's wave time.
//! Missing survey answers become zeros plus a `<name>_missing` indicator
//! column in the assembled matrix.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{compute_all, CentralityError, CentralityKind, Weighting};
use crate::cogsnet::{self, CogsnetError, CogsnetParams};
use crate::data::{AttributeKind, Dataset, Participant, Wave};
use crate::ml::MlError;
use crate::opinion::MisclassificationSample;
use crate::Question;

pub use crate::ml::FeatureMatrix;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("codebook: {0}")]
    Codebook(String),
    #[error("attribute {attribute:?} of {participant} is declared numeric but has value {value:?}")]
    NonNumeric {
        participant: String,
        attribute: String,
        value: String,
    },
    #[error("wave {0} has no calendar time")]
    MissingWaveTime(Wave),
    #[error("participant sets differ: {0}")]
    ParticipantMismatch(String),
    #[error("no {pipeline} features for participant {participant} at wave {wave}")]
    MissingVector {
        pipeline: Pipeline,
        participant: String,
        wave: Wave,
    },
    #[error(transparent)]
    Cogsnet(#[from] CogsnetError),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Survey,
    Topology,
    Hybrid,
}

impl Pipeline {
    pub const ALL: [Pipeline; 3] = [Pipeline::Survey, Pipeline::Topology, Pipeline::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Survey => "survey",
            Pipeline::Topology => "topology",
            Pipeline::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Pipeline> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub participant_id: String,
    pub wave: Wave,
    pub pipeline: Pipeline,
    pub values: BTreeMap<String, f64>,
    /// Features this participant did not answer; their columns hold 0.
    pub missing_mask: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub participant_id: String,
    pub question: Question,
    pub wave: Wave,
}

enum Column {
    Numeric,
    Categorical(BTreeSet<String>),
}

/// Most recent answer at or before `wave`.
fn answer_at<'a>(p: &'a Participant, wave: Wave, attr: &str) -> Option<&'a str> {
    p.survey_attributes
        .range(..=wave)
        .rev()
        .find_map(|(_, m)| m.get(attr).and_then(|v| v.as_deref()))
}

fn survey_columns(ds: &Dataset) -> Result<BTreeMap<String, Column>, FeatureError> {
    let mut seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for p in ds.participants() {
        for m in p.survey_attributes.values() {
            for (k, v) in m {
                let e = seen.entry(k.clone()).or_default();
                if let Some(v) = v {
                    e.insert(v.clone());
                }
            }
        }
    }
    let mut cols = BTreeMap::new();
    for (attr, values) in seen {
        let kind = ds.codebook().attribute_kind(&attr).map_err(FeatureError::Codebook)?;
        let numeric = match kind {
            Some(AttributeKind::Numeric) => true,
            Some(AttributeKind::Categorical) => false,
            // Undeclared attributes are numeric when every answer parses.
            None => !values.is_empty() && values.iter().all(|v| v.trim().parse::<f64>().is_ok_and(f64::is_finite)),
        };
        let col = if numeric {
            Column::Numeric
        } else {
            Column::Categorical(values)
        };
        cols.insert(attr, col);
    }
    Ok(cols)
}

/// Survey features of every participant at `wave`. An attribute unanswered at
/// `wave` falls back to the most recent earlier answer.
pub fn extract_survey_features(ds: &Dataset, wave: Wave) -> Result<Vec<FeatureVector>, FeatureError> {
    let cols = survey_columns(ds)?;
    ds.participants()
        .iter()
        .map(|p| {
            let mut values = BTreeMap::new();
            let mut missing = BTreeSet::new();
            for (attr, col) in &cols {
                let base = format!("survey.{attr}");
                let answer = answer_at(p, wave, attr);
                match col {
                    Column::Numeric => {
                        let v = match answer {
                            Some(a) => match a.trim().parse::<f64>() {
                                Ok(v) if v.is_finite() => v,
                                _ => {
                                    return Err(FeatureError::NonNumeric {
                                        participant: p.id.clone(),
                                        attribute: attr.clone(),
                                        value: a.to_string(),
                                    })
                                }
                            },
                            None => {
                                missing.insert(base.clone());
                                0.0
                            }
                        };
                        values.insert(base, v);
                    }
                    Column::Categorical(levels) => {
                        if answer.is_none() {
                            missing.insert(base.clone());
                        }
                        for level in levels {
                            values.insert(format!("{base}={level}"), (answer == Some(level.as_str())) as u8 as f64);
                        }
                    }
                }
            }
            Ok(FeatureVector {
                participant_id: p.id.clone(),
                wave,
                pipeline: Pipeline::Survey,
                values,
                missing_mask: missing,
            })
        })
        .collect()
}

/// Every centrality for every participant on the snapshot at each wave's time.
pub fn extract_topology_features(
    ds: &Dataset,
    params: &CogsnetParams,
    waves: &[Wave],
    weighting: Weighting,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut waves: Vec<Wave> = waves.to_vec();
    waves.sort_unstable();
    waves.dedup();
    let times = waves
        .iter()
        .map(|&w| ds.calendar().time(w).ok_or(FeatureError::MissingWaveTime(w)))
        .collect::<Result<Vec<_>, _>>()?;
    let snaps = cogsnet::snapshots(*params, ds.len(), &ds.indexed_events(), &times)?;
    let per_wave = snaps
        .par_iter()
        .map(|g| compute_all(g, weighting))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(waves.len() * ds.len());
    for (&wave, scores) in waves.iter().zip(&per_wave) {
        for (i, p) in ds.participants().iter().enumerate() {
            let values = CentralityKind::ALL
                .iter()
                .map(|k| (format!("topo.{}", k.name()), scores[k][i]))
                .collect();
            out.push(FeatureVector {
                participant_id: p.id.clone(),
                wave,
                pipeline: Pipeline::Topology,
                values,
                missing_mask: BTreeSet::new(),
            });
        }
    }
    Ok(out)
}

/// Merge survey and topology vectors per `(participant, wave)`. An empty
/// topology set yields the survey vectors relabeled as hybrid.
pub fn assemble_hybrid(survey: &[FeatureVector], topo: &[FeatureVector]) -> Result<Vec<FeatureVector>, FeatureError> {
    let relabel = |v: &FeatureVector| FeatureVector {
        pipeline: Pipeline::Hybrid,
        ..v.clone()
    };
    if topo.is_empty() {
        return Ok(survey.iter().map(relabel).collect());
    }
    let topo_by: BTreeMap<(&str, Wave), &FeatureVector> =
        topo.iter().map(|v| ((v.participant_id.as_str(), v.wave), v)).collect();
    if topo_by.len() != survey.len() {
        return Err(FeatureError::ParticipantMismatch(format!(
            "{} survey vectors, {} topology vectors",
            survey.len(),
            topo_by.len()
        )));
    }
    survey
        .iter()
        .map(|s| {
            let t = topo_by.get(&(s.participant_id.as_str(), s.wave)).ok_or_else(|| {
                FeatureError::ParticipantMismatch(format!(
                    "{} wave {} has no topology vector",
                    s.participant_id, s.wave
                ))
            })?;
            let mut h = relabel(s);
            h.values.extend(t.values.iter().map(|(k, v)| (k.clone(), *v)));
            h.missing_mask.extend(t.missing_mask.iter().cloned());
            Ok(h)
        })
        .collect()
}

/// Feature matrix aligned with labeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub pipeline: Pipeline,
    pub matrix: FeatureMatrix,
    pub targets: Vec<u8>,
    pub keys: Vec<SampleKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnManifest {
    pub pipeline: Pipeline,
    pub columns: Vec<String>,
    pub indicator_columns: Vec<String>,
    pub rows: usize,
    pub positives: usize,
}

impl LabeledMatrix {
    /// `participant_id,question,wave`, the feature columns, then `target`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["participant_id".to_string(), "question".into(), "wave".into()];
        header.extend(self.matrix.names().iter().cloned());
        header.push("target".into());
        w.write_record(&header).expect("in-memory write");
        for (i, k) in self.keys.iter().enumerate() {
            let mut rec = vec![
                k.participant_id.clone(),
                k.question.shortcode().to_string(),
                k.wave.to_string(),
            ];
            rec.extend(self.matrix.row(i).iter().map(|v| format!("{v}")));
            rec.push(self.targets[i].to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn manifest(&self) -> ColumnManifest {
        ColumnManifest {
            pipeline: self.pipeline,
            columns: self.matrix.names().to_vec(),
            indicator_columns: self
                .matrix
                .names()
                .iter()
                .filter(|n| n.ends_with("_missing"))
                .cloned()
                .collect(),
            rows: self.keys.len(),
            positives: self.targets.iter().map(|&t| t as usize).sum(),
        }
    }
}

/// One row per sample, joined to the vector of its participant and wave.
/// Columns are every feature name plus a `<name>_missing` indicator for each
/// name masked in any vector, sorted lexicographically.
pub fn build_matrix(
    vectors: &[FeatureVector],
    samples: &[MisclassificationSample],
) -> Result<LabeledMatrix, FeatureError> {
    let pipeline = vectors.first().map_or(Pipeline::Survey, |v| v.pipeline);
    let by_key: BTreeMap<(&str, Wave), &FeatureVector> = vectors
        .iter()
        .map(|v| ((v.participant_id.as_str(), v.wave), v))
        .collect();
    let mut names: BTreeSet<String> = BTreeSet::new();
    let mut masked: BTreeSet<&str> = BTreeSet::new();
    for v in vectors {
        names.extend(v.values.keys().cloned());
        masked.extend(v.missing_mask.iter().map(String::as_str));
    }
    names.extend(masked.iter().map(|m| format!("{m}_missing")));
    let names: Vec<String> = names.into_iter().collect();
    let col: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut rows = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    let mut keys = Vec::with_capacity(samples.len());
    for s in samples {
        let v = by_key
            .get(&(s.participant_id.as_str(), s.wave))
            .ok_or_else(|| FeatureError::MissingVector {
                pipeline,
                participant: s.participant_id.clone(),
                wave: s.wave,
            })?;
        let mut row = vec![0.0; names.len()];
        for (k, &x) in &v.values {
            row[col[k.as_str()]] = x;
        }
        for m in &v.missing_mask {
            row[col[format!("{m}_missing").as_str()]] = 1.0;
        }
        rows.push(row);
        targets.push(s.target as u8);
        keys.push(SampleKey {
            participant_id: s.participant_id.clone(),
            question: s.question,
            wave: s.wave,
        });
    }
    Ok(LabeledMatrix {
        pipeline,
        matrix: FeatureMatrix::new(names, rows)?,
        targets,
        keys,
    })
}
