//! Fairness audit: EDA metrics, subgroup F1 and the report document.

mod eda;
mod reference;
mod report;

pub use eda::{
    baseline_misprediction_rate, minority_opinion_rate, misprediction_by_intersectionality, opinion_volatility,
    spearman, stance_changes, Aggregation, CurvePoint, EdaError, GroupRate, IntersectionalityCurve,
    MinorityOpinionPolicy, MinorityOpinionRates, Subgroup, VolatilityStat, WavePolicy,
};
pub use reference::{
    eda_references, general_reference, reference_family, subgroup_f1, table_f1, ReferenceF1, ReferenceRate,
};
pub use report::{
    compile_audit_report, subgroup_f1_from_predictions, subgroup_f1_report, AuditReport, FamilyScore, PipelineReport,
    QuestionReport, ReferenceBlock, ReportError, SubgroupReport, SCHEMA_VERSION,
};
