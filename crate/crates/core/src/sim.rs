//! Exact-model Monte Carlo of batched two-arm trials under the null.
//!
//! Rewards are pure noise (both arms share the same mean, taken as zero).
//! Each stage draws its arm-1 count from the clamped-binomial law of the
//! active strategy, places the arms at random positions, and computes the
//! batched OLS difference and the residual variance.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::design::DesignConfig;
use crate::error::{Error, Result};
use crate::noise::NoiseSampler;
use crate::policy::CountLaw;
use crate::quantile::{empirical_quantile, Method, QuantileResult};
use crate::rng::{replication_key, stream_rng, Domain};
use crate::{from_usize, lit, Scalar};

const MAX_RESAMPLES: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    One,
    Two,
}

/// Summary of one stage of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOutcome<T> {
    pub counts: [usize; 2],
    /// Arm-1 mean minus arm-2 mean.
    pub delta_hat: T,
    /// Residual sum of squares over `n − 1`.
    pub sigma_hat2: T,
    /// `(N₁^{-1/2} Σ_{arm 1} ε, N₂^{-1/2} Σ_{arm 2} ε)`.
    pub z_dot: [T; 2],
    /// `n^{-1/2} Σ (ε² − σ²)`.
    pub z_ddot: T,
}

impl<T: Scalar> StageOutcome<T> {
    pub fn n(&self) -> usize {
        self.counts[0] + self.counts[1]
    }

    /// `√(N₁N₂)/(√n σ̂)·Δ̂`, the stage's contribution before the `S^{-1/2}`.
    pub fn studentized_term(&self) -> Result<T> {
        if !(self.sigma_hat2 > T::zero()) {
            return Err(Error::DegenerateVariance);
        }
        let n = from_usize::<T>(self.n());
        let [n1, n2] = self.counts.map(from_usize::<T>);
        Ok((n1 * n2).sqrt() / (n.sqrt() * self.sigma_hat2.sqrt()) * self.delta_hat)
    }
}

/// Batched OLS: arm-mean difference and residual variance `RSS/(n − 1)`.
pub fn bols<T: Scalar>(rewards: &[T], arms: &[Arm]) -> Result<(T, T)> {
    if rewards.len() != arms.len() {
        return Err(Error::ParameterDomain(format!(
            "{} rewards but {} assignments",
            rewards.len(),
            arms.len()
        )));
    }
    let mut sum = [T::zero(); 2];
    let mut cnt = [0usize; 2];
    for (&r, &a) in rewards.iter().zip(arms) {
        let k = a as usize;
        sum[k] = sum[k] + r;
        cnt[k] += 1;
    }
    if cnt.contains(&0) {
        return Err(Error::DegenerateDesign(format!(
            "both arms need a subject, got counts {cnt:?}"
        )));
    }
    if rewards.len() < 3 {
        return Err(Error::DegenerateDesign("at least three subjects are required".into()));
    }
    let mean = [sum[0] / from_usize(cnt[0]), sum[1] / from_usize(cnt[1])];
    let rss: T = rewards
        .iter()
        .zip(arms)
        .map(|(&r, &a)| {
            let d = r - mean[a as usize];
            d * d
        })
        .sum();
    let s2 = rss / from_usize(rewards.len() - 1);
    if !(s2 > T::zero()) {
        return Err(Error::DegenerateVariance);
    }
    Ok((mean[0] - mean[1], s2))
}

/// `S^{-1/2} Σ_s √(N_{s,1}N_{s,2})/(√n_s σ̂_s)·Δ̂_s`.
pub fn test_statistic<T: Scalar>(stages: &[StageOutcome<T>]) -> Result<T> {
    if stages.is_empty() {
        return Err(Error::ParameterDomain("no stages".into()));
    }
    let mut acc = T::zero();
    for s in stages {
        acc = acc + s.studentized_term()?;
    }
    Ok(acc / from_usize::<T>(stages.len()).sqrt())
}

/// A simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub stages: Vec<StageOutcome<T>>,
    pub statistic: T,
    /// Attempts discarded because a stage had zero residual variance.
    pub resamples: u32,
}

/// A design prepared for repeated simulation.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    config: DesignConfig<T>,
    laws: Vec<Vec<CountLaw<T>>>,
    samplers: Vec<NoiseSampler>,
}

impl<T: Scalar> Simulator<T> {
    pub fn new(config: &DesignConfig<T>) -> Result<Self> {
        config.validate()?;
        let laws = (0..config.stages())
            .map(|s| config.count_laws(s))
            .collect::<Result<Vec<_>>>()?;
        let samplers = (0..config.stages())
            .map(|s| config.noise_for(s).sampler())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            laws,
            samplers,
        })
    }

    pub fn config(&self) -> &DesignConfig<T> {
        &self.config
    }

    fn attempt(&self, rep_index: u64, attempt: u32) -> Result<(Vec<StageOutcome<T>>, T)> {
        let mut rng = stream_rng(self.config.seed, Domain::MonteCarlo, replication_key(rep_index, attempt));
        let mut stages = Vec::with_capacity(self.config.stages());
        let mut h = T::zero();
        let mut arms = Vec::new();
        let mut eps = Vec::new();
        for (s, &n) in self.config.batch_sizes.iter().enumerate() {
            let label = self.config.policy(s).stage2_strategy(h).label;
            let n1 = self.laws[s][label].sample(&mut rng);
            arms.clear();
            arms.extend(std::iter::repeat_n(Arm::One, n1));
            arms.extend(std::iter::repeat_n(Arm::Two, n - n1));
            arms.shuffle(&mut rng);
            eps.clear();
            eps.extend((0..n).map(|_| lit::<T>(self.samplers[s].draw(&mut rng))));

            let (delta_hat, sigma_hat2) = bols(&eps, &arms)?;
            let mut sums = [T::zero(); 2];
            let mut sq = T::zero();
            for (&e, &a) in eps.iter().zip(&arms) {
                sums[a as usize] = sums[a as usize] + e;
                sq = sq + (e * e - T::one());
            }
            let counts = [n1, n - n1];
            let nf = from_usize::<T>(n);
            let out = StageOutcome {
                counts,
                delta_hat,
                sigma_hat2,
                z_dot: [
                    sums[0] / from_usize::<T>(counts[0]).sqrt(),
                    sums[1] / from_usize::<T>(counts[1]).sqrt(),
                ],
                z_ddot: sq / nf.sqrt(),
            };
            // decision statistic √n·Δ̂/σ with σ = 1
            h = nf.sqrt() * delta_hat;
            stages.push(out);
        }
        let stat = test_statistic(&stages)?;
        Ok((stages, stat))
    }

    /// Simulates replication `rep_index`; deterministic in `(seed, rep_index)`.
    pub fn simulate(&self, rep_index: u64) -> Result<Trial<T>> {
        for attempt in 0..MAX_RESAMPLES {
            match self.attempt(rep_index, attempt) {
                Ok((stages, statistic)) => {
                    return Ok(Trial {
                        stages,
                        statistic,
                        resamples: attempt,
                    })
                }
                Err(Error::DegenerateVariance) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateVariance)
    }
}

pub fn simulate_trial<T: Scalar>(config: &DesignConfig<T>, rep_index: u64) -> Result<Trial<T>> {
    Simulator::new(config)?.simulate(rep_index)
}

/// Sorted simulated statistics.
#[derive(Debug, Clone)]
pub struct McRun<T> {
    pub sorted: Vec<T>,
    pub resamples: u64,
}

/// Runs `config.mc.reps` replications, in parallel, and sorts the statistics.
pub fn mc_statistics<T: Scalar>(config: &DesignConfig<T>) -> Result<McRun<T>> {
    let sim = Simulator::new(config)?;
    let trials: Vec<(T, u32)> = (0..config.mc.reps as u64)
        .into_par_iter()
        .map(|i| sim.simulate(i).map(|t| (t.statistic, t.resamples)))
        .collect::<Result<_>>()?;
    let resamples = trials.iter().map(|t| u64::from(t.1)).sum();
    let mut sorted: Vec<T> = trials.into_iter().map(|t| t.0).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    Ok(McRun { sorted, resamples })
}

/// Order-statistic quantiles of the simulated statistic.
pub fn mc_quantiles<T: Scalar>(config: &DesignConfig<T>, alphas: &[T]) -> Result<Vec<QuantileResult<T>>> {
    if config.mc.reps < 1000 {
        return Err(Error::InvalidConfig(format!(
            "Monte Carlo needs at least 1000 replications, got {}",
            config.mc.reps
        )));
    }
    let run = mc_statistics(config)?;
    quantiles_from_sorted(&run.sorted, alphas)
}

pub fn quantiles_from_sorted<T: Scalar>(sorted: &[T], alphas: &[T]) -> Result<Vec<QuantileResult<T>>> {
    alphas
        .iter()
        .map(|&a| {
            let (x, se) = empirical_quantile(sorted, a)?;
            Ok(QuantileResult {
                alpha: a,
                x_hat: x,
                method: Method::MonteCarlo,
                stderr: Some(se),
                bracket: None,
            })
        })
        .collect()
}
