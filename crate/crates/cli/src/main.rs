//! `fracap`: runs the numerical experiments and prepares plot data.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config
//! error, 3 internal error.

mod config;
mod experiments;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{load_partial, ConfigError, Experiment, PartialConfig, RunConfig};
use experiments::Thresholds;
use output::{sha256_hex, write_file};

pub(crate) const DEFAULT_THRESHOLDS: &str = include_str!("../thresholds.json");

#[derive(Parser)]
#[command(name = "fracap", version, about = "Numerical experiments on s-parabolic capacities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSVs, summary.json and manifest.json.
    Run(RunArgs),
    /// Merge run directories into long-format CSVs for plotting.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// JSON file with any of the keys below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    /// Deepest generation, level or shell count.
    #[arg(long)]
    depth: Option<usize>,
    /// Starting generation.
    #[arg(long)]
    k: Option<usize>,
    /// Random scaling pairs for kernel-validate.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the built-in thresholds file.
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// A run directory or a directory of run directories.
    #[arg(long)]
    results: PathBuf,
    /// Defaults to the results directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Internal(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn internal(e: anyhow::Error) -> Failure {
    Failure::Internal(e)
}

fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let file = match &args.config {
        Some(path) => load_partial(path)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        experiment: args.experiment,
        n: args.n,
        s: args.s,
        depth: args.depth,
        k: args.k,
        samples: args.samples,
        seed: args.seed,
        output_dir: args.out.clone(),
    };
    Ok(RunConfig::resolve(file.merge(flags))?)
}

fn load_thresholds(path: Option<&PathBuf>) -> Result<(String, String), Failure> {
    match path {
        None => Ok((DEFAULT_THRESHOLDS.to_string(), "built-in".to_string())),
        Some(p) => std::fs::read_to_string(p).map(|t| (t, p.display().to_string())).map_err(|e| Failure::Usage(format!("invalid config field `thresholds`: cannot read {}: {e}", p.display()))),
    }
}

fn run(args: RunArgs) -> Result<bool, Failure> {
    let start = Instant::now();
    let cfg = resolve(&args)?;
    let (text, source) = load_thresholds(args.thresholds.as_ref())?;
    let all: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config field `thresholds`: {source}: {e}")))?;
    let thresholds = Thresholds::new(&all, cfg.experiment).and_then(|t| t.validate().map(|_| t)).map_err(|e| Failure::Usage(format!("invalid config field `thresholds`: {e}")))?;

    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display())).map_err(internal)?;
    let result = experiments::run(&cfg, &thresholds).with_context(|| format!("experiment {} failed", cfg.experiment)).map_err(internal)?;

    let pass = result.checks.iter().all(|c| c.pass);
    let status = if pass { "PASS" } else { "FAIL" };
    let mut files = Vec::new();
    for table in &result.tables {
        files.push(write_file(&cfg.output_dir, &format!("{}.csv", table.name), table.to_csv().as_bytes()).map_err(internal)?);
    }
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "status": status,
        "checks": result.checks,
        "metrics": result.metrics,
    });
    let summary_text = serde_json::to_string_pretty(&summary).map_err(|e| internal(e.into()))? + "\n";
    files.push(write_file(&cfg.output_dir, "summary.json", summary_text.as_bytes()).map_err(internal)?);

    let manifest = json!({
        "tool": "fracap",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "status": status,
        "thresholds": { "source": source, "sha256": sha256_hex(text.as_bytes()) },
        "cache_dir": fracap::kernels::profile::cache_dir().map(|p| p.display().to_string()),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": files,
    });
    let manifest_text = serde_json::to_string_pretty(&manifest).map_err(|e| internal(e.into()))? + "\n";
    write_file(&cfg.output_dir, "manifest.json", manifest_text.as_bytes()).map_err(internal)?;

    for c in &result.checks {
        println!("{} {} {:.6e} {} {:.6e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.op, c.threshold);
    }
    println!("{} {} -> {}", status, cfg.experiment, cfg.output_dir.display());
    Ok(pass)
}

fn plot_data(args: PlotArgs) -> Result<bool, Failure> {
    let out = args.out.unwrap_or_else(|| args.results.clone());
    let written = plot::plot_data(&args.results, &out).map_err(|e| Failure::Usage(format!("{e:#}")))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::PlotData(args) => plot_data(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}
