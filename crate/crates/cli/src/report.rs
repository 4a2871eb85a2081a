//! CSV, markdown and manifest output.

use std::fmt::Write as _;

use bandit_ae::edgeworth::MAX_CONDITION;
use bandit_ae::engine::{BRACKET, CHUNK, DENSITY_STEP, MIN_DRAWS, PRUNE_TOL};
use bandit_ae::quantile::BISECTION_WIDTH;
use bandit_ae::{Method, QuantileResult64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::run::{Command, RunOutput, Timing};

pub const CSV_HEADER: &str = "method,alpha,quantile,stderr";

/// One row per result; the standard error column is empty where none applies.
pub fn csv(results: &[QuantileResult64]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let se = r.stderr.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(s, "{},{},{:.6},{}", r.method.key(), r.alpha, r.x_hat, se).expect("writing to a String");
    }
    s
}

/// Methods as rows, probability levels as columns, two decimals.
pub fn markdown(cfg: &RunConfig, results: &[QuantileResult64]) -> String {
    let mut s = String::new();
    if let Some(t) = &cfg.title {
        writeln!(s, "**{t}**\n").unwrap();
    }
    s.push_str("| Method \\ Probability |");
    for a in &cfg.alphas {
        write!(s, " {a:.3} |").unwrap();
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(cfg.alphas.len()));
    s.push('\n');
    for method in [Method::MonteCarlo, Method::Expansion, Method::Normal] {
        let row: Vec<_> = results.iter().filter(|r| r.method == method).collect();
        if row.is_empty() {
            continue;
        }
        write!(s, "| {} |", method.title()).unwrap();
        for a in &cfg.alphas {
            match row.iter().find(|r| r.alpha == *a) {
                Some(r) => write!(s, " {:.2} |", r.x_hat).unwrap(),
                None => s.push_str(" |"),
            }
        }
        s.push('\n');
    }
    if let Some(c) = &cfg.caption {
        writeln!(s, "\n{c}").unwrap();
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameters {
    pub is_chunk: usize,
    pub count_prune_tol: f64,
    pub min_is_draws: usize,
    pub density_step: f64,
    pub bracket_start: f64,
    pub bracket_max: f64,
    pub bisection_width: f64,
    pub max_condition: f64,
}

impl Parameters {
    pub fn current() -> Self {
        Self {
            is_chunk: CHUNK,
            count_prune_tol: PRUNE_TOL,
            min_is_draws: MIN_DRAWS,
            density_step: DENSITY_STEP,
            bracket_start: BRACKET.0,
            bracket_max: BRACKET.1,
            bisection_width: BISECTION_WIDTH,
            max_condition: MAX_CONDITION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub bandit_ae: &'static str,
    pub cli: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub command: &'static str,
    pub config_digest: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub parameters: Parameters,
    pub config: &'a RunConfig,
    pub timings: &'a [Timing],
    pub resamples: u64,
    pub warnings: &'a [String],
}

impl<'a> Manifest<'a> {
    pub fn new(command: Command, cfg: &'a RunConfig, out: &'a RunOutput, threads: usize) -> Self {
        Self {
            command: match command {
                Command::Mc => "mc",
                Command::Expand => "expand",
                Command::Normal => "normal",
                Command::Table => "table",
            },
            config_digest: cfg.digest(),
            seed: cfg.seed,
            threads,
            versions: Versions {
                bandit_ae: bandit_ae::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            parameters: Parameters::current(),
            config: cfg,
            timings: &out.timings,
            resamples: out.resamples,
            warnings: &out.warnings,
        }
    }
}
