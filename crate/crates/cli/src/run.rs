//! Run orchestration for the `mc`, `expand`, `normal` and `table` commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use bandit_ae::engine::{ae_quantiles, TailEngine};
use bandit_ae::quantile::normal_quantile;
use bandit_ae::sim::{mc_statistics, quantiles_from_sorted};
use bandit_ae::{Method, QuantileResult64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Mc,
    Expand,
    Normal,
    Table,
}

impl Command {
    fn methods(self) -> &'static [Method] {
        match self {
            Command::Mc => &[Method::MonteCarlo],
            Command::Expand => &[Method::Expansion],
            Command::Normal => &[Method::Normal],
            Command::Table => &[Method::MonteCarlo, Method::Expansion, Method::Normal],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub method: &'static str,
    pub seconds: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<QuantileResult64>,
    pub timings: Vec<Timing>,
    pub warnings: Vec<String>,
    pub resamples: u64,
}

pub fn normal_quantiles(alphas: &[f64]) -> Result<Vec<QuantileResult64>> {
    alphas
        .iter()
        .map(|&a| {
            Ok(QuantileResult64 {
                alpha: a,
                x_hat: normal_quantile(a)?,
                method: Method::Normal,
                stderr: None,
                bracket: None,
            })
        })
        .collect()
}

fn standing_warnings(cfg: &RunConfig) -> Vec<String> {
    let mut out = vec![
        "noise is standardized to mean 0 and variance 1; a centred-only reading would not change the studentized statistic"
            .to_string(),
    ];
    out.extend(cfg.notes.iter().cloned());
    out
}

/// Computes the quantiles of `command` on a pool of `threads` workers
/// (`0`: one per core). Results do not depend on `threads`.
pub fn execute(command: Command, cfg: &RunConfig, threads: usize) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;
    pool.install(|| {
        let design = cfg.design();
        let mut out = RunOutput {
            results: Vec::new(),
            timings: Vec::new(),
            warnings: standing_warnings(cfg),
            resamples: 0,
        };
        for &method in command.methods() {
            let t = Instant::now();
            let rows = match method {
                Method::MonteCarlo => {
                    anyhow::ensure!(
                        design.mc.reps >= 1000,
                        "Monte Carlo needs at least 1000 replications, got {}",
                        design.mc.reps
                    );
                    let run = mc_statistics(&design).context("Monte Carlo simulation")?;
                    out.resamples = run.resamples;
                    if run.resamples > 0 {
                        out.warnings.push(format!(
                            "{} Monte Carlo replications were redrawn after a zero residual variance",
                            run.resamples
                        ));
                    }
                    quantiles_from_sorted(&run.sorted, &cfg.alphas)?
                }
                Method::Expansion => {
                    let engine = TailEngine::new(&design, 0.0).context("building expansion engine")?;
                    out.warnings.extend(engine.warnings().iter().cloned());
                    ae_quantiles(&design, &cfg.alphas).context("expansion quantiles")?
                }
                Method::Normal => normal_quantiles(&cfg.alphas)?,
            };
            out.timings.push(Timing {
                method: method.key(),
                seconds: t.elapsed().as_secs_f64(),
            });
            out.results.extend(rows);
        }
        Ok(out)
    })
}

/// Paths of the files a run writes.
#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub markdown: PathBuf,
    pub manifest: PathBuf,
}

/// Runs `command` and writes `results.csv`, `table.md` and `manifest.json`
/// into `out_dir`.
pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<(RunOutput, Written)> {
    let output = execute(command, cfg, threads)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let written = Written {
        csv: out_dir.join("results.csv"),
        markdown: out_dir.join("table.md"),
        manifest: out_dir.join("manifest.json"),
    };
    std::fs::write(&written.csv, report::csv(&output.results))?;
    std::fs::write(&written.markdown, report::markdown(cfg, &output.results))?;
    let manifest = report::Manifest::new(command, cfg, &output, threads);
    std::fs::write(&written.manifest, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok((output, written))
}
