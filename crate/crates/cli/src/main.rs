use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mmwave_cs::harness::{self, ExperimentConfig, SweepPoint, PRESET_NAMES};
use mmwave_cs::pipelines::PipelineKind;
use mmwave_cs::ripcheck::{self, RicMode};
use mmwave_cs::sounding::CodebookScheme;

#[derive(Parser)]
#[command(
    name = "mmwave-cs",
    version,
    about = "Two-stage compressed-sensing mmWave channel estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial at one sweep point and print the result as JSON.
    Run(RunArgs),
    /// Run a full sweep and write the trial and aggregate CSV files.
    Sweep(SweepArgs),
    /// Compute the restricted isometry constant of a random Gaussian matrix.
    RicCheck(RicArgs),
    /// List the named experiment profiles, or print one as JSON.
    Presets {
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Args)]
struct Source {
    /// Experiment configuration file (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named profile, see `presets`.
    #[arg(long)]
    preset: Option<String>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials per point.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Sweep-axis value; defaults to the first value of the sweep.
    #[arg(long)]
    point: Option<f64>,
    #[arg(long, default_value = "two_stage")]
    pipeline: String,
    #[arg(long, default_value = "rc")]
    scheme: String,
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory; defaults to the config's `output`, then `results`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct RicArgs {
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 32)]
    cols: usize,
    /// Sparsity level of the supports scanned.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Real instead of complex Gaussian entries.
    #[arg(long)]
    real: bool,
    /// Sample this many random supports instead of scanning all of them.
    #[arg(long)]
    sampled: Option<usize>,
}

/// Errors that mean the request itself was invalid.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(e.into()))
}

fn load(source: &Source) -> Result<ExperimentConfig> {
    let mut cfg = match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::load(path)
            .with_context(|| format!("loading {}", path.display()))
            .map_err(config_err)?,
        (None, Some(name)) => {
            harness::preset(name).ok_or_else(|| config_err(anyhow!("unknown preset '{name}'")))?
        }
        (None, None) => return Err(config_err(anyhow!("pass --config PATH or --preset NAME"))),
    };
    if let Some(seed) = source.seed {
        cfg.base_seed = seed;
    }
    if let Some(trials) = source.trials {
        cfg.trials = trials;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = load(&args.source)?;
    let pipeline: PipelineKind = args.pipeline.parse().map_err(config_err)?;
    let scheme: CodebookScheme = args.scheme.parse().map_err(config_err)?;
    let value = args.point.unwrap_or(cfg.sweep.values[0]);
    let point = SweepPoint {
        axis: cfg.sweep.axis,
        value,
    };
    cfg.plan(&point).map_err(config_err)?;
    let row = harness::run_trial(&cfg, &point, scheme, pipeline, args.trial);
    println!("{}", serde_json::to_string_pretty(&row)?);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = load(&args.source)?;
    let dir = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let (files, rows) = harness::run_sweep_to_dir(&cfg, args.workers, &dir)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "trials_csv": files.trials,
            "aggregate_csv": files.aggregate,
            "rows": rows.len(),
            "failed_trials": failed,
        }))?
    );
    Ok(())
}

fn ric_check(args: RicArgs) -> Result<()> {
    if args.k == 0 || args.k > args.cols || args.rows == 0 {
        return Err(config_err(anyhow!("need rows >= 1 and 1 <= k <= cols")));
    }
    let a = ripcheck::gaussian_matrix(args.rows, args.cols, !args.real, args.seed);
    let mode = match args.sampled {
        Some(trials) => RicMode::Sampled {
            trials,
            seed: args.seed,
        },
        None => RicMode::Exhaustive,
    };
    let est = ripcheck::empirical_ric(&a, args.k, mode).map_err(config_err)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "rows": args.rows,
            "cols": args.cols,
            "k": est.k,
            "delta": est.delta,
            "extremal_support": est.extremal_support,
            "supports_checked": est.supports_checked,
            "exact": est.exact,
            "lemma1_threshold": ripcheck::lemma1_threshold(),
            "lemma1_holds": ripcheck::lemma1_condition(est.delta),
        }))?
    );
    Ok(())
}

fn presets(name: Option<String>) -> Result<()> {
    match name {
        Some(name) => {
            let cfg = harness::preset(&name)
                .ok_or_else(|| config_err(anyhow!("unknown preset '{name}'")))?;
            println!("{}", cfg.to_json()?);
        }
        None => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::RicCheck(a) => ric_check(a),
        Command::Presets { preset } => presets(preset),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
