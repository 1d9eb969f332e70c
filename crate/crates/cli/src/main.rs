use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dropzone_cli::dataset::load_preferences;
use dropzone_cli::{
    build_backends, evaluate, ingest_dataset, recording_backends, run_dataset, synth, write_report, BackendKind,
    Backends, RunConfig,
};
use dropzone_core::metrics::SWEEP_ETAS;

#[derive(Parser)]
#[command(name = "dropzone", version, about = "Safe drop-zone selection for delivery drones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Dataset root (rgb/, depth/, optional gt/, prefs.json, stub.json).
    dataset: PathBuf,
    /// TOML configuration; defaults to <dataset>/config.toml when present.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Stochastic runs per batch.
    #[arg(long)]
    runs: Option<usize>,
    /// JSON map from batch id to preference text; defaults to <dataset>/prefs.json.
    #[arg(long)]
    pref_json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on every batch of a dataset.
    Run(RunArgs),
    /// Score the results in the output directory against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Report every feasibility threshold in 0.95, 0.90, 0.85, 0.80.
        #[arg(long)]
        eta_sweep: bool,
    },
    /// Shorthand for `eval --eta-sweep`.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run with live (or stub) backends and store every response as replay fixtures.
    RecordFixtures {
        #[command(flatten)]
        run: RunArgs,
        /// Fixture directory; defaults to the configured one.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Write the synthetic demo dataset.
    Synth { dir: PathBuf },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let default_path = common.dataset.join("config.toml");
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None if default_path.exists() => RunConfig::load(&default_path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn apply_run_flags(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = load_config(&args.common)?;
    if let Some(b) = args.backend {
        cfg.backend = b;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(args: &RunArgs, cfg: &RunConfig, backends: &Backends) -> Result<bool> {
    let dataset = &args.common.dataset;
    let batches = ingest_dataset(dataset, cfg.stride)?;
    let pref_path = args.pref_json.clone().unwrap_or_else(|| dataset.join("prefs.json"));
    let prefs = load_preferences(&pref_path)?;
    let summary = run_dataset(&batches, cfg, backends, &prefs, &cfg.out)?;
    for r in &summary.results {
        let zones: Vec<String> = r
            .ranking
            .iter()
            .flat_map(|rk| rk.zones.iter().map(|z| z.index.to_string()))
            .collect();
        println!(
            "{} run {}: pad {:?}, {} feasible zone(s), ranked [{}]",
            r.batch_id,
            r.run,
            r.pad_safety,
            r.candidates.len(),
            zones.join(", ")
        );
    }
    for f in &summary.failures {
        eprintln!("{} run {} failed: {}", f.batch_id, f.run, f.error);
    }
    Ok(summary.failures.is_empty())
}

fn eval(common: &Common, etas: &[f64]) -> Result<()> {
    let cfg = load_config(common)?;
    let (report, curves) = evaluate(&common.dataset, &cfg.out, etas)?;
    write_report(&cfg.out.join("eval"), &report, &curves)?;
    print!("{}", report.to_table());
    Ok(())
}

fn ensure_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("dataset directory {} does not exist", path.display());
    }
    Ok(())
}

fn main_inner() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            ensure_dir(&args.common.dataset)?;
            let cfg = apply_run_flags(&args)?;
            let backends = build_backends(&cfg, cfg.backend, &args.common.dataset)?;
            execute(&args, &cfg, &backends)
        }
        Command::Eval { common, eta_sweep } => {
            let cfg = load_config(&common)?;
            let etas = if eta_sweep { SWEEP_ETAS.to_vec() } else { vec![cfg.zones.eta] };
            eval(&common, &etas)?;
            Ok(true)
        }
        Command::Sweep { common } => {
            eval(&common, &SWEEP_ETAS)?;
            Ok(true)
        }
        Command::RecordFixtures { run, fixtures } => {
            ensure_dir(&run.common.dataset)?;
            let mut cfg = apply_run_flags(&run)?;
            if run.backend.is_none() {
                cfg.backend = BackendKind::Live;
            }
            let dir = fixtures.unwrap_or_else(|| cfg.fixtures_dir(&run.common.dataset));
            let backends = recording_backends(&cfg, cfg.backend, &run.common.dataset, &dir)?;
            let ok = execute(&run, &cfg, &backends)?;
            println!("fixtures written to {}", dir.display());
            Ok(ok)
        }
        Command::Synth { dir } => {
            synth::generate(&dir).with_context(|| format!("writing {}", dir.display()))?;
            println!("synthetic dataset written to {}", dir.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
