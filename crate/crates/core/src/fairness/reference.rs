//! Published reference values, embedded for side-by-side display only.
//!
//! The original cohort is not available, so none of these numbers is ever used
//! as a threshold; every entry is tagged `binding: false`.

use serde::{Deserialize, Serialize};

use super::Subgroup;
use crate::data::Minority;
use crate::graph::Pipeline;
use crate::ml::ModelFamily;
use crate::Question;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceF1 {
    pub question: Question,
    pub pipeline: Pipeline,
    pub family: ModelFamily,
    pub subgroup: Subgroup,
    pub f1: f64,
    pub citation: String,
    pub binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRate {
    pub question: Question,
    pub subgroup: Subgroup,
    pub metric: String,
    pub value: f64,
    pub citation: String,
    pub binding: bool,
}

use ModelFamily::{DecisionTree as DT, RandomForest as RF, StratifiedRandomForest as SRF};

/// Rows are in `Question::ALL` order.
const TABLES: [(&str, Pipeline, ModelFamily, [f64; 6]); 8] = [
    (
        "Table 1",
        Pipeline::Survey,
        SRF,
        [0.5602, 0.5708, 0.5892, 0.5318, 0.5757, 0.5678],
    ),
    (
        "Table 1",
        Pipeline::Survey,
        RF,
        [0.5400, 0.5550, 0.5730, 0.5100, 0.5580, 0.5520],
    ),
    (
        "Table 1",
        Pipeline::Survey,
        DT,
        [0.5150, 0.5200, 0.5400, 0.4850, 0.5300, 0.5250],
    ),
    (
        "Table 2",
        Pipeline::Topology,
        DT,
        [0.5524, 0.4555, 0.4410, 0.5244, 0.5241, 0.6225],
    ),
    (
        "Table 2",
        Pipeline::Topology,
        RF,
        [0.5330, 0.4400, 0.4250, 0.5100, 0.5100, 0.6000],
    ),
    (
        "Table 2",
        Pipeline::Topology,
        SRF,
        [0.5290, 0.4380, 0.4200, 0.5080, 0.5090, 0.5950],
    ),
    (
        "Table 3",
        Pipeline::Hybrid,
        SRF,
        [0.5147, 0.4839, 0.6021, 0.5161, 0.7327, 0.5835],
    ),
    (
        "Table 3",
        Pipeline::Hybrid,
        DT,
        [0.4925, 0.4600, 0.5850, 0.5000, 0.7100, 0.5600],
    ),
];

/// Family whose scores the published tables single out per pipeline.
pub fn reference_family(pipeline: Pipeline) -> ModelFamily {
    match pipeline {
        Pipeline::Topology => DT,
        Pipeline::Survey | Pipeline::Hybrid => SRF,
    }
}

/// Every general-population F1 cell of the three model-comparison tables.
pub fn table_f1() -> Vec<ReferenceF1> {
    TABLES
        .iter()
        .flat_map(|&(citation, pipeline, family, scores)| {
            Question::ALL
                .into_iter()
                .zip(scores)
                .map(move |(question, f1)| ReferenceF1 {
                    question,
                    pipeline,
                    family,
                    subgroup: Subgroup::General,
                    f1,
                    citation: citation.to_string(),
                    binding: false,
                })
        })
        .collect()
}

/// General-population F1 of the selected family for `(question, pipeline)`.
pub fn general_reference(question: Question, pipeline: Pipeline) -> ReferenceF1 {
    let family = reference_family(pipeline);
    table_f1()
        .into_iter()
        .find(|r| r.question == question && r.pipeline == pipeline && r.family == family)
        .expect("every question and pipeline has a table cell")
}

/// Per-minority F1 values quoted in the results discussion.
pub fn subgroup_f1() -> Vec<ReferenceF1> {
    use Minority::*;
    use Pipeline::*;
    use Question::*;
    let rows = [
        (Euthanasia, Survey, FBPrivacy, 0.806),
        (Fswelfare, Survey, FBPrivacy, 0.750),
        (Euthanasia, Hybrid, FBPrivacy, 0.806),
        (Marijuana, Hybrid, FBPrivacy, 0.746),
        (Fswelfare, Hybrid, FBPrivacy, 0.500),
        (Toomucheqrights, Hybrid, FBPrivacy, 0.590),
        (Marijuana, Survey, ParentsIncome, 0.825),
        (Fssocsec, Survey, ParentsIncome, 0.775),
        (Euthanasia, Survey, ParentsIncome, 0.743),
        (Fssocsec, Hybrid, ParentsIncome, 1.000),
        (Euthanasia, Hybrid, ParentsIncome, 0.378),
        (Marijuana, Hybrid, ParentsIncome, 0.571),
        (Jobguar, Survey, ParentsEducation, 0.869),
        (Jobguar, Hybrid, ParentsEducation, 0.733),
        (Toomucheqrights, Survey, ParentsEducation, 0.704),
        (Fssocsec, Topology, Gender, 0.730),
        (Fswelfare, Topology, Ethnicity, 0.737),
        (Euthanasia, Hybrid, Ethnicity, 0.810),
        (Toomucheqrights, Hybrid, ParentsReligion, 0.742),
    ];
    rows.into_iter()
        .map(|(question, pipeline, m, f1)| ReferenceF1 {
            question,
            pipeline,
            family: reference_family(pipeline),
            subgroup: Subgroup::Members(m),
            f1,
            citation: "Results discussion".into(),
            binding: false,
        })
        .collect()
}

/// Exploratory rates: minority-opinion rates, volatility, baseline
/// misprediction and the intersectionality endpoints (k = 1 and k = 5).
pub fn eda_references() -> Vec<ReferenceRate> {
    use Minority::*;
    use Question::*;
    let m = Subgroup::Members;
    let c = Subgroup::Complement;
    let rows = [
        (Euthanasia, m(ParentsReligion), "minority_opinion_rate", 0.393),
        (Euthanasia, m(FBPrivacy), "minority_opinion_rate", 0.355),
        (Fssocsec, m(Ethnicity), "minority_opinion_rate", 0.172),
        (Fssocsec, c(Ethnicity), "minority_opinion_rate", 0.051),
        (Jobguar, m(ParentsEducation), "volatility", 1.57),
        (Jobguar, c(ParentsEducation), "volatility", 1.20),
        (Euthanasia, m(ParentsEducation), "volatility", 1.11),
        (Euthanasia, c(ParentsEducation), "volatility", 0.67),
        (Jobguar, m(Ethnicity), "baseline_misprediction", 0.729),
        (Toomucheqrights, m(ParentsIncome), "baseline_misprediction", 0.667),
        (Euthanasia, Subgroup::General, "misprediction_k1", 0.492),
        (Euthanasia, Subgroup::General, "misprediction_k5", 0.759),
        (Jobguar, Subgroup::General, "misprediction_k1", 0.471),
        (Jobguar, Subgroup::General, "misprediction_k5", 0.621),
    ];
    rows.into_iter()
        .map(|(question, subgroup, metric, value)| ReferenceRate {
            question,
            subgroup,
            metric: metric.into(),
            value,
            citation: "Exploratory analysis".into(),
            binding: false,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_checks() {
        assert_eq!(general_reference(Question::Euthanasia, Pipeline::Survey).f1, 0.5602);
        assert_eq!(
            general_reference(Question::Toomucheqrights, Pipeline::Topology).f1,
            0.6225
        );
        assert_eq!(general_reference(Question::Marijuana, Pipeline::Hybrid).f1, 0.7327);
        assert_eq!(table_f1().len(), 48);
        assert!(table_f1().iter().chain(subgroup_f1().iter()).all(|r| !r.binding));
    }
}
