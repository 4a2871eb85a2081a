use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bandit_ae_cli::{report, run, Command, Overrides, RunConfig};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Md,
}

/// Quantiles of the batched-OLS statistic by Monte Carlo, asymptotic
/// expansion and normal approximation.
#[derive(Debug, Parser)]
#[command(name = "bandit-ae", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// JSON design config (optional for `normal`).
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo replications.
    #[arg(long)]
    reps: Option<usize>,

    /// Importance-sampling draws.
    #[arg(long)]
    is_draws: Option<usize>,

    /// Comma-separated probability levels.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,

    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// What to print on stdout; all files are written regardless.
    #[arg(long, value_enum, default_value = "md")]
    format: Format,

    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

/// Placeholder design for `normal` runs without a config.
const NORMAL_ONLY: &str = r#"{"stages": 1, "n": [50], "noise": {"family": "normal"},
    "stage1_probs": [0.5, 0.5], "stage2_policy": {"type": "fixed", "probs": [0.5, 0.5]}}"#;

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<()> {
    let args = Args::parse();
    let mut cfg = match (&args.config, args.command) {
        (Some(path), _) => RunConfig::from_path(path)?,
        (None, Command::Normal) => RunConfig::from_json(NORMAL_ONLY)?,
        (None, _) => anyhow::bail!("--config is required for this command"),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        reps: args.reps,
        is_draws: args.is_draws,
        alphas: args.alphas.clone(),
    })?;
    let (output, written) = run(args.command, &cfg, &args.out, args.threads)
        .with_context(|| format!("running {:?}", args.command))?;
    match args.format {
        Format::Csv => print!("{}", report::csv(&output.results)),
        Format::Md => print!("{}", report::markdown(&cfg, &output.results)),
    }
    for w in &output.warnings {
        eprintln!("note: {w}");
    }
    eprintln!("wrote {}, {}, {}", written.csv.display(), written.markdown.display(), written.manifest.display());
    Ok(())
}
