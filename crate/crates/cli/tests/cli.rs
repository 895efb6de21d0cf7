use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fairdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdyn"))
        .args(args)
        .env("FAIRDYN_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = fairdyn(&[
            "generate",
            "--profile",
            "smoke",
            "--seed",
            "5",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    // run.json records each run's own output directory; everything else matches
    let data =
        |d: &Path| -> Vec<(String, Vec<u8>)> { dir_contents(d).into_iter().filter(|(n, _)| n != "run.json").collect() };
    let files = data(a.path());
    assert!(files.iter().any(|(n, _)| n == "participants.csv"));
    assert!(files == data(b.path()), "dataset files differ");
    let hash = |d: &Path| {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
        v["config_hash"].clone()
    };
    assert_eq!(hash(a.path()), hash(b.path()));
}

#[test]
fn default_generate_writes_two_hundred_participants() {
    let d = tempfile::tempdir().unwrap();
    let o = fairdyn(&["generate", "--out", d.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("participants.csv")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 200);
}

#[test]
fn infeasible_fraction_is_a_setup_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    fs::write(&cfg, "[dataset.synthetic.fractions]\nEthnicity = 1.5\n").unwrap();
    let o = fairdyn(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Ethnicity"), "{}", stderr(&o));
}

#[test]
fn audit_then_report_in_every_format() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    let o = fairdyn(&["audit", "--profile", "smoke", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.ends_with("report.json")));
    let report = out.join("report.json");
    let report = report.to_str().unwrap();

    let json = stdout(&fairdyn(&["report", report, "--format", "json"]));
    assert_eq!(json, fs::read_to_string(report).unwrap());
    let flat = stdout(&fairdyn(&["report", report, "--format", "flat"]));
    assert_eq!(flat, fs::read_to_string(out.join("report_flat.csv")).unwrap());
    let long = stdout(&fairdyn(&["report", report, "--format", "long"]));
    assert!(long.starts_with("# fairdyn config_hash="));
    let text = stdout(&fairdyn(&["report", report]));
    assert_eq!(text.matches("== ").count(), 1, "one summary block per question");

    // flat CSV row count matches the subgroup entries of the JSON
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    let subgroups: usize = doc["questions"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|q| q["pipelines"].as_array().unwrap())
        .map(|p| p["subgroups"].as_array().unwrap().len())
        .sum();
    assert_eq!(flat.lines().count() - 2, subgroups);

    let rendered = d.path().join("rendered");
    let o = fairdyn(&["report", report, "--out", rendered.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(rendered.join("report_flat.csv")).unwrap(),
        fs::read(out.join("report_flat.csv")).unwrap()
    );
}

#[test]
fn unknown_format_is_a_usage_error() {
    let o = fairdyn(&["report", "whatever.json", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("xml"));
    assert_eq!(fairdyn(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fairdyn(&["audit", "--questions", "abortion"]).status.code(), Some(2));
}

#[test]
fn unreadable_report_is_a_setup_error() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("report.json");
    fs::write(&path, "{\"schema_version\": 1}").unwrap();
    let o = fairdyn(&["report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("report.json"));
}

#[test]
fn missing_codebook_names_the_stage_and_file() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    let o = fairdyn(&["generate", "--profile", "smoke", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::remove_file(data.join("codebook.json")).unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "questions = [\"euthanasia\"]\n[dataset.directory]\npath = {:?}\nformat = \"csv\"\n",
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = fairdyn(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("stage load") && err.contains("codebook.json"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "seed = 9\nquestions = [\"jobguar\"]\n").unwrap();
    let o = fairdyn(&[
        "config",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--pipelines",
        "survey,hybrid",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("seed = 11"), "{text}");
    assert!(text.contains("questions = [\"jobguar\"]"), "{text}");
    assert!(!text.contains("\"topology\""), "{text}");
}

#[test]
fn simulate_writes_traces_only() {
    let d = tempfile::tempdir().unwrap();
    let o = fairdyn(&[
        "simulate",
        "--profile",
        "smoke",
        "--jobs",
        "2",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("traces/euthanasia.csv").exists());
    assert!(d.path().join("samples/euthanasia.csv").exists());
    assert!(!d.path().join("report.json").exists());
}
