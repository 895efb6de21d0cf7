//! `fairdyn`: generate data, run the audit, render reports.
//!
//! Settings come from the built-in profile, then `--config`, then flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairdyn::config::RunConfig;
use fairdyn::data::Format;
use fairdyn::fairness::AuditReport;
use fairdyn::graph::Pipeline;
use fairdyn::pipeline::{self, StageError};
use fairdyn::Question;
use log::info;

#[derive(Parser)]
#[command(
    name = "fairdyn",
    version,
    about = "Audit opinion-model mispredictions for minority subgroups"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML (or .json) run config; unset fields take the profile's values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in profile used as the base config.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Default)]
    profile: Profile,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated question shortcodes.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_question)]
    questions: Option<Vec<Question>>,
    /// Comma-separated pipelines: survey, topology, hybrid.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_pipeline)]
    pipelines: Option<Vec<Pipeline>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Default,
    Smoke,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Flat,
    Long,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate {
        #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
        format: DataFormat,
    },
    /// Run the full audit and write the report with its artifacts.
    Audit,
    /// Render a saved report as text or CSV.
    Report {
        /// Path to report.json.
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Simulate CoDiNG and write traces and labeled samples only.
    Simulate,
    /// Write labeled feature matrices only.
    Features,
    /// Print the effective config as TOML.
    Config,
}

fn parse_question(s: &str) -> Result<Question, String> {
    s.parse().map_err(|e: fairdyn::data::UnknownQuestion| e.to_string())
}

fn parse_pipeline(s: &str) -> Result<Pipeline, String> {
    Pipeline::parse(s).ok_or_else(|| format!("unknown pipeline {s:?} (survey, topology, hybrid)"))
}

enum Failure {
    Setup(String),
    Stage(StageError),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn effective_config(g: &Global) -> Result<RunConfig, Failure> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Setup(e.to_string()))?,
        None => match g.profile {
            Profile::Default => RunConfig::default(),
            Profile::Smoke => RunConfig::smoke(),
        },
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(q) = &g.questions {
        cfg.questions = q.clone();
    }
    if let Some(p) = &g.pipelines {
        cfg.pipelines = p.clone();
    }
    cfg.validate().map_err(|e| Failure::Setup(e.to_string()))?;
    Ok(cfg)
}

fn report_files(report: &AuditReport, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Setup(format!("{}: {e}", dir.display())))?;
    for (name, body) in [
        ("report_flat.csv", report.to_flat_csv()),
        ("report_long.csv", report.to_long_csv()),
        ("summary.txt", report.summary()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::Setup(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Command::Report { report, format } = &cli.command {
        let text = std::fs::read_to_string(report).map_err(|e| Failure::Setup(format!("{}: {e}", report.display())))?;
        let r = AuditReport::from_json(&text).map_err(|e| Failure::Setup(format!("{}: {e}", report.display())))?;
        if let Some(dir) = &cli.global.out {
            return report_files(&r, dir);
        }
        let body = match format {
            ReportFormat::Text => r.summary(),
            ReportFormat::Flat => r.to_flat_csv(),
            ReportFormat::Long => r.to_long_csv(),
            ReportFormat::Json => r.to_json(),
        };
        print!("{body}");
        return Ok(());
    }

    let cfg = effective_config(&cli.global)?;
    if let Some(j) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Setup(e.to_string()))?;
    }
    let files = match cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Generate { format } => {
            let out = pipeline::generate(&cfg)?;
            let format = match format {
                DataFormat::Csv => Format::Csv,
                DataFormat::Json => Format::Json,
            };
            let (n, e, o) = out.dataset.counts();
            info!("generated {n} participants, {e} events, {o} opinion rows");
            pipeline::write_dataset(&out.dataset, &cfg.output_dir, format, &cfg)?
        }
        Command::Audit => {
            let out = pipeline::run_audit(&cfg)?;
            eprint!("{}", out.report.summary());
            out.artifacts
        }
        Command::Simulate => pipeline::run_simulate(&cfg)?,
        Command::Features => pipeline::run_features(&cfg)?,
        Command::Report { .. } => unreachable!("handled above"),
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FAIRDYN_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Setup(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            if !e.partial_artifacts.is_empty() {
                eprintln!("partial artifacts:");
                for p in &e.partial_artifacts {
                    eprintln!("  {}", p.display());
                }
            }
            ExitCode::from(3)
        }
    }
}
