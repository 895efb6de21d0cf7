use std::collections::BTreeMap;
use std::sync::OnceLock;

use fairdyn::config::RunConfig;
use fairdyn::data::{Minority, MinorityMembership, Typology};
use fairdyn::fairness::{
    general_reference, subgroup_f1_from_predictions, table_f1, AuditReport, ReportError, Subgroup,
};
use fairdyn::graph::Pipeline;
use fairdyn::pipeline::run_audit;
use fairdyn::Question;
use proptest::prelude::*;

/// One smoke audit shared by every test in this file.
fn smoke_report() -> &'static AuditReport {
    static REPORT: OnceLock<AuditReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            output_dir: dir.path().join("out"),
            ..RunConfig::smoke()
        };
        run_audit(&cfg).unwrap().report
    })
}

fn schema() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/audit_report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn report_validates_against_the_schema() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&smoke_report().to_json()).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");

    let mut broken = doc.clone();
    broken["questions"][0]["pipelines"][0]["test_f1"] = serde_json::json!(1.5);
    assert!(!validator.is_valid(&broken));
    let mut broken = doc;
    broken["schema_version"] = serde_json::json!("one");
    assert!(!validator.is_valid(&broken));
}

#[test]
fn report_round_trips_and_checks_version() {
    let report = smoke_report();
    let text = report.to_json();
    assert_eq!(&AuditReport::from_json(&text).unwrap(), report);

    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["schema_version"] = serde_json::json!(2);
    let err = AuditReport::from_json(&doc.to_string()).unwrap_err();
    assert!(matches!(err, ReportError::Version(2)), "{err}");
    assert!(matches!(AuditReport::from_json("{}"), Err(ReportError::Schema(_))));
}

#[test]
fn report_contents() {
    let r = smoke_report();
    assert_eq!((r.schema_version, r.tool.as_str(), r.seed), (1, "fairdyn", 42));
    assert_eq!(r.config_hash.len(), 16);
    assert_eq!(r.config_hash, RunConfig::smoke().hash());
    let q = &r.questions[0];
    assert_eq!(q.question, Question::Euthanasia);
    let pipelines: Vec<Pipeline> = q.pipelines.iter().map(|p| p.pipeline).collect();
    assert_eq!(pipelines, Pipeline::ALL.to_vec());
    for p in &q.pipelines {
        assert_eq!(p.subgroups.len(), Subgroup::all().len());
        for s in &p.subgroups {
            assert!(!s.reference_f1.binding);
            assert_eq!(s.reference_f1, general_reference(Question::Euthanasia, p.pipeline));
            assert!(s.f1_subgroup.is_none_or(|f| (0.0..=1.0).contains(&f)));
        }
        let general = p.subgroups.iter().find(|s| s.subgroup == Subgroup::General).unwrap();
        assert_eq!(general.f1_subgroup, Some(p.test_f1));
        assert_eq!(general.n_subgroup, p.n_test);
    }
}

#[test]
fn csv_outputs_carry_provenance() {
    let r = smoke_report();
    let line = format!("# fairdyn config_hash={} seed=42\n", r.config_hash);
    for text in [r.to_flat_csv(), r.to_long_csv()] {
        assert!(text.starts_with(&line), "{}", &text[..80.min(text.len())]);
        assert!(text.lines().count() > 2);
    }
    let flat_rows = r.to_flat_csv().lines().count() - 2;
    let subgroups: usize = r
        .questions
        .iter()
        .flat_map(|q| &q.pipelines)
        .map(|p| p.subgroups.len())
        .sum();
    assert_eq!(flat_rows, subgroups);
    assert!(r.summary().contains("euthanasia"));
}

#[test]
fn published_values_are_embedded() {
    assert_eq!(general_reference(Question::Euthanasia, Pipeline::Survey).f1, 0.5602);
    assert_eq!(
        general_reference(Question::Toomucheqrights, Pipeline::Topology).f1,
        0.6225
    );
    assert_eq!(general_reference(Question::Marijuana, Pipeline::Hybrid).f1, 0.7327);
    assert!(table_f1().iter().all(|r| !r.binding && r.subgroup == Subgroup::General));
    assert_eq!(Question::Marijuana.typology(), Typology::Polarized);
}

fn member_of_all(id: &str) -> MinorityMembership {
    MinorityMembership {
        participant_id: id.into(),
        flags: Minority::ALL.iter().map(|&m| (m, true)).collect::<BTreeMap<_, _>>(),
        undetermined: Default::default(),
        intersection_count: Minority::ALL.len() as u8,
    }
}

#[test]
fn mismatched_lengths_are_rejected() {
    let m = [member_of_all("a")];
    assert!(subgroup_f1_from_predictions(&[1, 0], &[1], &["a", "a"], &m, Question::Jobguar, Pipeline::Survey).is_err());
}

#[test]
fn all_negative_subgroup_is_degenerate() {
    let m = [member_of_all("a")];
    let reports =
        subgroup_f1_from_predictions(&[0, 0], &[0, 0], &["a", "a"], &m, Question::Jobguar, Pipeline::Survey).unwrap();
    for r in &reports {
        match r.subgroup {
            Subgroup::Complement(_) => assert_eq!((r.f1_subgroup, r.n_subgroup, r.degenerate), (None, 0, false)),
            _ => assert_eq!((r.f1_subgroup, r.degenerate), (Some(0.0), true)),
        }
    }
}

proptest! {
    #[test]
    fn full_population_subgroup_matches_general(
        rows in proptest::collection::vec((0u8..2, 0u8..2, 0usize..6), 1..80)
    ) {
        let ids: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
        let memberships: Vec<MinorityMembership> = ids.iter().map(|id| member_of_all(id)).collect();
        let truth: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let pred: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let who: Vec<&str> = rows.iter().map(|r| ids[r.2].as_str()).collect();
        let reports =
            subgroup_f1_from_predictions(&truth, &pred, &who, &memberships, Question::Marijuana, Pipeline::Hybrid)
                .unwrap();
        for r in &reports {
            match r.subgroup {
                Subgroup::Complement(_) => prop_assert_eq!(r.n_subgroup, 0),
                _ => {
                    prop_assert_eq!(r.f1_subgroup, Some(r.f1_general));
                    prop_assert_eq!(r.n_subgroup, rows.len());
                }
            }
        }
    }
}
