//! Backward approximation of the tail `P[𝔘 ≥ x]` of the studentized
//! statistic.
//!
//! In transformed coordinates `y_s = (ż_s/σ, z̈_s/σ²)` the statistic is, to
//! first order,
//!
//! ```text
//! 𝔘 ≈ Σ_s l̇_s·(ẏ_s − ÿ_s ẏ_s / (2√n_s))
//! ```
//!
//! and the tail is the integral of the indicator `1{𝔘 ≥ x}` against the
//! nested mixture
//!
//! ```text
//! Σ_{N₁} ν₁(N₁) ψ̃₁(y₁; N₁) Σ_{N₂} ν₂(N₂ | q(l̈₁·ẏ₁)) ψ̃₂(y₂; N₂) ⋯
//! ```
//!
//! Count laws `ν_s` are enumerated exactly. The `y_s` integrals use one set
//! of Gaussian importance draws per stage, shared by every count branch and
//! every threshold `x` (common random numbers).
//!
//! Draws are generated in fixed-size chunks, each from its own counter-based
//! stream, and chunk sums are combined in chunk order, so estimates do not
//! depend on the number of worker threads.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::design::DesignConfig;
use crate::edgeworth::ExpansionMeasure;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::policy::Policy;
use crate::quantile::{normal_quantile, quantile, Method, QuantileResult};
use crate::rng::{stream_rng, Domain, StreamRng};
use crate::{from_usize, lit, Scalar};

/// Draws per independently seeded chunk.
pub const CHUNK: usize = 2048;
/// Mass dropped from the outer ends of each count law.
pub const PRUNE_TOL: f64 = 1e-10;
/// Smallest admissible number of importance draws.
pub const MIN_DRAWS: usize = 1000;
/// Half-width of the central difference used for the quantile density.
pub const DENSITY_STEP: f64 = 0.05;
/// Initial and largest half-width of the quantile bracket.
pub const BRACKET: (f64, f64) = (8.0, 32.0);

/// Per-stage weights of the statistic for arm counts `(N₁, N₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatWeights<T> {
    pub n: usize,
    /// `S^{-1/2}(√(N₂/n), −√(N₁/n))`.
    pub l_dot: [T; 2],
    /// `((N₁/n)^{-1/2}, −(N₂/n)^{-1/2})`; `l̈·ẏ = √n·Δ̂/σ`.
    pub l_ddot: [T; 2],
}

impl<T: Scalar> StatWeights<T> {
    pub fn new(counts: [usize; 2], stages: usize) -> Result<Self> {
        let n = counts[0] + counts[1];
        if counts.contains(&0) {
            return Err(Error::DegenerateDesign(format!(
                "both arms need a subject, got counts {counts:?}"
            )));
        }
        Self::at_fraction(from_usize::<T>(counts[0]) / from_usize::<T>(n), n, stages)
    }

    /// Weights at a (possibly non-integer) arm-1 fraction `f = N₁/n`.
    pub fn at_fraction(f: T, n: usize, stages: usize) -> Result<Self> {
        if !(f > T::zero() && f < T::one()) || stages == 0 {
            return Err(Error::ParameterDomain(format!(
                "arm fraction must lie in (0,1) with at least one stage, got {f} and {stages}"
            )));
        }
        let g = T::one() - f;
        let s = from_usize::<T>(stages);
        Ok(Self {
            n,
            l_dot: [(g / s).sqrt(), -(f / s).sqrt()],
            l_ddot: [T::one() / f.sqrt(), -T::one() / g.sqrt()],
        })
    }

    /// `l̇·(ẏ − ÿẏ/(2√n))`.
    #[inline]
    pub fn linear(&self, y: &Vec3<T>) -> T {
        let shrink = T::one() - y[2] / (lit::<T>(2.0) * from_usize::<T>(self.n).sqrt());
        (self.l_dot[0] * y[0] + self.l_dot[1] * y[1]) * shrink
    }

    /// Decision statistic `l̈·ẏ` handed to the next stage's policy.
    #[inline]
    pub fn decision(&self, y: &Vec3<T>) -> T {
        self.l_ddot[0] * y[0] + self.l_ddot[1] * y[1]
    }
}

/// First-order value of the statistic at stage vectors `ys`.
pub fn statistic_value<T: Scalar>(ys: &[Vec3<T>], weights: &[StatWeights<T>]) -> T {
    ys.iter().zip(weights).map(|(y, w)| w.linear(y)).sum()
}

/// `1{Σ_s l̇_s·(ẏ_s − ÿ_sẏ_s/(2√n_s)) ≥ x}` as `0` or `1`.
pub fn integrand<T: Scalar>(ys: &[Vec3<T>], weights: &[StatWeights<T>], x: T) -> T {
    if statistic_value(ys, weights) >= x {
        T::one()
    } else {
        T::zero()
    }
}

/// Trivariate Gaussian importance proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProposal<T> {
    pub mean: Vec3<T>,
    pub cov: Mat3<T>,
    chol: Mat3<T>,
    log_norm: T,
}

impl<T: Scalar> GaussianProposal<T> {
    pub fn new(mean: Vec3<T>, cov: Mat3<T>) -> Result<Self> {
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::ParameterDomain("proposal covariance is not positive definite".into()))?;
        let log_det = (0..3).map(|i| chol.m[i][i].ln()).sum::<T>() * lit(2.0);
        let log_norm = -lit::<T>(0.5) * (lit::<T>(3.0) * (lit::<T>(2.0) * T::PI()).ln() + log_det);
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    /// `μ + L u`.
    #[inline]
    pub fn transform(&self, u: &Vec3<T>) -> Vec3<T> {
        let lu = self.chol.mul_vec(u);
        [self.mean[0] + lu[0], self.mean[1] + lu[1], self.mean[2] + lu[2]]
    }

    /// Log density at `μ + L u`.
    #[inline]
    fn log_density_std(&self, u: &Vec3<T>) -> T {
        self.log_norm - lit::<T>(0.5) * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
    }

    pub fn density(&self, x: &Vec3<T>) -> T {
        let l = &self.chol.m;
        let d = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        let u0 = d[0] / l[0][0];
        let u1 = (d[1] - l[1][0] * u0) / l[1][1];
        let u2 = (d[2] - l[2][0] * u0 - l[2][1] * u1) / l[2][2];
        self.log_density_std(&[u0, u1, u2]).exp()
    }
}

/// Per-stage proposals `N((x·a_s, 0), p·V̄_s)` with
/// `a_s = l̇_s / Σ_r |l̇_r|²`.
pub fn proposal<T: Scalar>(
    x: T,
    weights: &[StatWeights<T>],
    vbar: &[Mat3<T>],
    p: T,
) -> Result<Vec<GaussianProposal<T>>> {
    if !(p > T::one()) {
        return Err(Error::ParameterDomain(format!("proposal scale p must exceed 1, got {p}")));
    }
    if weights.len() != vbar.len() || weights.is_empty() {
        return Err(Error::ParameterDomain(
            "need one pooled covariance per stage".into(),
        ));
    }
    let norm: T = weights
        .iter()
        .map(|w| w.l_dot[0] * w.l_dot[0] + w.l_dot[1] * w.l_dot[1])
        .sum();
    weights
        .iter()
        .zip(vbar)
        .map(|(w, v)| {
            let mean = [x * w.l_dot[0] / norm, x * w.l_dot[1] / norm, T::zero()];
            GaussianProposal::new(mean, v.scale(p))
        })
        .collect()
}

/// Running sums of importance ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, r: f64) {
        self.sum += r;
        self.sum_sq += r * r;
    }

    fn merge(&mut self, other: &Self) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Mean and its standard error over `n` draws.
    fn summary(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

fn chunk_ranges(draws: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    (0..draws.div_ceil(CHUNK))
        .into_par_iter()
        .map(move |c| (c, (draws - c * CHUNK).min(CHUNK)))
}

#[inline]
fn standard_normal3<T: Scalar>(rng: &mut StreamRng) -> Vec3<T> {
    let mut u = [T::zero(); 3];
    for v in &mut u {
        let d: f64 = StandardNormal.sample(rng);
        *v = lit(d);
    }
    u
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < MIN_DRAWS {
        return Err(Error::InvalidConfig(format!(
            "importance sampling needs at least {MIN_DRAWS} draws, got {draws}"
        )));
    }
    Ok(())
}

/// Importance-sampling estimate of `∫ f(y₁, …, y_S) dy` with independent
/// draws `ξ_s ~ proposals[s]`: the mean of `f(ξ)/Π_s φ_s(ξ_s)` and its
/// standard error. Deterministic in `(seed, stream)`.
pub fn is_estimate<T, F>(
    f: F,
    proposals: &[GaussianProposal<T>],
    draws: usize,
    seed: u64,
    stream: u32,
) -> Result<(T, T)>
where
    T: Scalar,
    F: Fn(&[Vec3<T>]) -> T + Sync,
{
    check_draws(draws)?;
    let parts: Vec<Moments> = chunk_ranges(draws)
        .map(|(c, len)| {
            let mut rng = stream_rng(seed, Domain::Importance, (u64::from(stream) << 32) | c as u64);
            let mut xi = vec![[T::zero(); 3]; proposals.len()];
            let mut acc = Moments::default();
            for k in 0..len {
                let mut log_q = T::zero();
                for (x, prop) in xi.iter_mut().zip(proposals) {
                    let u = standard_normal3::<T>(&mut rng);
                    *x = prop.transform(&u);
                    log_q = log_q + prop.log_density_std(&u);
                }
                let fx = f(&xi);
                let r = fx * (-log_q).exp();
                let r = r.to_f64().unwrap_or(f64::NAN);
                if !r.is_finite() {
                    return Err(Error::NonFiniteRatio {
                        draw: c * CHUNK + k,
                        integrand: fx.to_f64().unwrap_or(f64::NAN),
                        proposal: log_q.exp().to_f64().unwrap_or(f64::NAN),
                    });
                }
                acc.push(r);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    let (mean, se) = total.summary(draws);
    Ok((lit(mean), lit(se)))
}

/// Whether tails are estimated directly or as one minus the lower
/// probability, which keeps the importance draws on the side of the
/// distribution being resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Upper,
    Lower,
}

/// Weight of arm-1 count `count` under strategy `label` at stage `stage`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchWeight<T> {
    pub stage: usize,
    pub label: usize,
    pub count: usize,
    pub weight: T,
}

/// Estimated `P[𝔘 ≥ x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate<T> {
    pub x: T,
    pub value: T,
    pub stderr: T,
    pub draws: usize,
    /// Enumerated count-law weights; each `(stage, label)` group sums to 1.
    pub branch_weights: Vec<BranchWeight<T>>,
}

struct StagePlan<T> {
    /// Smallest arm-1 count in the union of the label supports.
    first: usize,
    measures: Vec<ExpansionMeasure<T>>,
    weights: Vec<StatWeights<T>>,
    /// `laws[label][i]`: weight of count `first + i`.
    laws: Vec<Vec<T>>,
    /// Policy of the following stage, if any.
    next: Option<Policy<T>>,
    proposal: GaussianProposal<T>,
}

/// Per-draw quantities, reused across draws of a chunk.
struct Scratch<T> {
    ratio: Vec<Vec<T>>,
    a: Vec<Vec<T>>,
    next_label: Vec<Vec<usize>>,
    order: Vec<usize>,
    sorted_a: Vec<T>,
    /// `suffix[label][k]`: last-stage weight of the `k`-th smallest and above.
    suffix: Vec<Vec<T>>,
}

/// The backward approximation for one design with importance proposals
/// centred for a fixed threshold. Evaluations at any `x` share the same
/// draws.
pub struct TailEngine<T> {
    plans: Vec<StagePlan<T>>,
    draws: usize,
    seed: u64,
    centre: T,
    orientation: Orientation,
    branch_weights: Vec<BranchWeight<T>>,
    warnings: Vec<String>,
}

/// Covariance of `y` at arm-1 fraction `f`; `None` if not positive definite.
fn pooled_covariance<T: Scalar>(f: T, m: &crate::noise::MomentSet<T>) -> Option<Mat3<T>> {
    let s = m.sigma2.sqrt();
    let skew = m.mu3 / (s * s * s);
    let mut v = Mat3::from_diag([T::one(), T::one(), m.var_of_square() / (m.sigma2 * m.sigma2)]);
    for (k, frac) in [f, T::one() - f].into_iter().enumerate() {
        v[(k, 2)] = frac.sqrt() * skew;
        v[(2, k)] = frac.sqrt() * skew;
    }
    v.cholesky().map(|_| v)
}

impl<T: Scalar> TailEngine<T> {
    pub fn new(config: &DesignConfig<T>, centre: T) -> Result<Self> {
        config.validate()?;
        check_draws(config.is.draws)?;
        if !centre.is_finite() {
            return Err(Error::ParameterDomain(format!("proposal centre must be finite, got {centre}")));
        }
        let stages = config.stages();
        let mut warnings = Vec::new();
        let mut branch_weights = Vec::new();
        let mut skeleton = Vec::with_capacity(stages);
        let mut expected = Vec::with_capacity(stages);
        let mut vbar = Vec::with_capacity(stages);
        for s in 0..stages {
            let n = config.batch_sizes[s];
            let moments = config.noise_for(s).standardized_moments()?;
            let laws: Vec<_> = config
                .count_laws(s)?
                .iter()
                .map(|l| l.pruned(lit(PRUNE_TOL)))
                .collect();
            let first = laws.iter().map(|l| *l.support().start()).min().expect("a policy has strategies");
            let last = laws.iter().map(|l| *l.support().end()).max().expect("a policy has strategies");
            let mut measures = Vec::with_capacity(last - first + 1);
            let mut weights = Vec::with_capacity(last - first + 1);
            for c in first..=last {
                let (em, flagged) = ExpansionMeasure::with_fallback(
                    n,
                    [c, n - c],
                    moments,
                    config.expansion.order,
                    config.expansion.reduced,
                )?;
                if flagged {
                    warnings.push(format!(
                        "stage {}: degenerate covariance at counts ({c}, {}); Gaussian fallback used",
                        s + 1,
                        n - c
                    ));
                }
                measures.push(em);
                weights.push(StatWeights::new([c, n - c], stages)?);
            }
            let mut dense = Vec::with_capacity(laws.len());
            for (label, law) in laws.iter().enumerate() {
                let mut row = vec![T::zero(); last - first + 1];
                for (c, w) in law.iter() {
                    row[c - first] = w;
                    branch_weights.push(BranchWeight {
                        stage: s,
                        label,
                        count: c,
                        weight: w,
                    });
                }
                dense.push(row);
            }
            let frac = laws.iter().map(|l| l.mean()).sum::<T>() / (from_usize::<T>(laws.len()) * from_usize::<T>(n));
            expected.push(StatWeights::at_fraction(frac, n, stages)?);
            vbar.push(match pooled_covariance(frac, &moments) {
                Some(v) => v,
                None => {
                    warnings.push(format!(
                        "stage {}: pooled covariance not positive definite; diagonal proposal used",
                        s + 1
                    ));
                    Mat3::from_diag([T::one(), T::one(), T::one()])
                }
            });
            let next = (s + 1 < stages).then(|| config.policy(s + 1));
            skeleton.push((first, measures, weights, dense, next));
        }
        let proposals = proposal(centre, &expected, &vbar, config.is.scale_p)?;
        let plans = skeleton
            .into_iter()
            .zip(proposals)
            .map(|((first, measures, weights, laws, next), proposal)| StagePlan {
                first,
                measures,
                weights,
                laws,
                next,
                proposal,
            })
            .collect();
        Ok(Self {
            plans,
            draws: config.is.draws,
            seed: config.seed,
            centre,
            orientation: if centre >= T::zero() {
                Orientation::Upper
            } else {
                Orientation::Lower
            },
            branch_weights,
            warnings,
        })
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn centre(&self) -> T {
        self.centre
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Diagnostics such as covariance fallbacks.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn branch_weights(&self) -> &[BranchWeight<T>] {
        &self.branch_weights
    }

    /// Arm-1 counts enumerated at `stage`.
    pub fn support(&self, stage: usize) -> std::ops::RangeInclusive<usize> {
        let p = &self.plans[stage];
        p.first..=p.first + p.measures.len() - 1
    }

    /// The per-stage proposals.
    pub fn proposals(&self) -> Vec<&GaussianProposal<T>> {
        self.plans.iter().map(|p| &p.proposal).collect()
    }

    fn scratch(&self) -> Scratch<T> {
        let last = self.plans.last().expect("at least one stage");
        Scratch {
            ratio: self.plans.iter().map(|p| vec![T::zero(); p.measures.len()]).collect(),
            a: self.plans.iter().map(|p| vec![T::zero(); p.measures.len()]).collect(),
            next_label: self.plans.iter().map(|p| vec![0; p.measures.len()]).collect(),
            order: (0..last.measures.len()).collect(),
            sorted_a: vec![T::zero(); last.measures.len()],
            suffix: vec![vec![T::zero(); last.measures.len() + 1]; last.laws.len()],
        }
    }

    /// Fills `sc` for one draw; returns `false` if a ratio is not finite.
    fn prepare(&self, rng: &mut StreamRng, sc: &mut Scratch<T>) -> bool {
        for (s, plan) in self.plans.iter().enumerate() {
            let u = standard_normal3::<T>(rng);
            let xi = plan.proposal.transform(&u);
            let inv_q = (-plan.proposal.log_density_std(&u)).exp();
            for (i, (em, w)) in plan.measures.iter().zip(&plan.weights).enumerate() {
                sc.ratio[s][i] = em.density_y(&xi) * inv_q;
                sc.a[s][i] = w.linear(&xi);
                if let Some(next) = &plan.next {
                    sc.next_label[s][i] = next.stage2_strategy(w.decision(&xi)).label;
                }
            }
        }
        let s_last = self.plans.len() - 1;
        let last = &self.plans[s_last];
        let a = &sc.a[s_last];
        let ratio = &sc.ratio[s_last];
        sc.order.sort_unstable_by(|&i, &j| a[i].partial_cmp(&a[j]).unwrap_or(std::cmp::Ordering::Equal));
        for (k, &i) in sc.order.iter().enumerate() {
            sc.sorted_a[k] = a[i];
        }
        for (label, law) in last.laws.iter().enumerate() {
            let suf = &mut sc.suffix[label];
            let mut acc = T::zero();
            suf[sc.order.len()] = acc;
            for k in (0..sc.order.len()).rev() {
                let i = sc.order[k];
                acc = acc + law[i] * ratio[i];
                suf[k] = acc;
            }
        }
        sc.ratio.iter().all(|r| r.iter().all(|v| v.is_finite()))
    }

    /// `(Σ w·1{stat ≥ x}, Σ w)` below stage `s` entered with strategy
    /// `label`, accumulated statistic `acc_a` and weight `acc_w`. With
    /// `only`, the stage-1 integral is restricted to the half-space where the
    /// next strategy is `only`.
    #[allow(clippy::too_many_arguments)]
    fn walk(&self, sc: &Scratch<T>, s: usize, label: usize, acc_a: T, acc_w: T, x: T, only: Option<usize>) -> (T, T) {
        if s + 1 == self.plans.len() {
            let k = sc.sorted_a.partition_point(|&v| v < x - acc_a);
            let suf = &sc.suffix[label];
            return (acc_w * suf[k], acc_w * suf[0]);
        }
        let law = &self.plans[s].laws[label];
        let (mut up, mut all) = (T::zero(), T::zero());
        for (i, &w) in law.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let next = sc.next_label[s][i];
            if s == 0 && only.is_some_and(|b| b != next) {
                continue;
            }
            let (u, m) = self.walk(sc, s + 1, next, acc_a + sc.a[s][i], acc_w * w * sc.ratio[s][i], x, None);
            up = up + u;
            all = all + m;
        }
        (up, all)
    }

    /// Ratio sums at every `x`: `(upper, lower, mass)` per threshold.
    fn accumulate(&self, xs: &[T], presplit: bool) -> Result<Vec<[Moments; 3]>> {
        let labels = self.plans.first().and_then(|p| p.next.map(|q| q.strategies().len()));
        let parts: Vec<Vec<[Moments; 3]>> = chunk_ranges(self.draws)
            .map(|(c, len)| {
                let mut rng = stream_rng(self.seed, Domain::Importance, c as u64);
                let mut sc = self.scratch();
                let mut acc = vec![[Moments::default(); 3]; xs.len()];
                for k in 0..len {
                    if !self.prepare(&mut rng, &mut sc) {
                        let (s, i) = sc
                            .ratio
                            .iter()
                            .enumerate()
                            .find_map(|(s, r)| r.iter().position(|v| !v.is_finite()).map(|i| (s, i)))
                            .expect("a non-finite ratio exists");
                        return Err(Error::NonFiniteRatio {
                            draw: c * CHUNK + k,
                            integrand: f64::NAN,
                            proposal: sc.ratio[s][i].recip().to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    for (slot, &x) in acc.iter_mut().zip(xs) {
                        let (up, all) = match (presplit, labels) {
                            (true, Some(nl)) => (0..nl).fold((T::zero(), T::zero()), |(u0, m0), b| {
                                let (u, m) = self.walk(&sc, 0, 0, T::zero(), T::one(), x, Some(b));
                                (u0 + u, m0 + m)
                            }),
                            _ => self.walk(&sc, 0, 0, T::zero(), T::one(), x, None),
                        };
                        let (up, all) = (up.to_f64().unwrap_or(f64::NAN), all.to_f64().unwrap_or(f64::NAN));
                        slot[0].push(up);
                        slot[1].push(all - up);
                        slot[2].push(all);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = vec![[Moments::default(); 3]; xs.len()];
        for part in &parts {
            for (t, p) in total.iter_mut().zip(part) {
                for j in 0..3 {
                    t[j].merge(&p[j]);
                }
            }
        }
        Ok(total)
    }

    fn estimates(&self, xs: &[T], presplit: bool) -> Result<Vec<TailEstimate<T>>> {
        let sums = self.accumulate(xs, presplit)?;
        Ok(xs
            .iter()
            .zip(&sums)
            .map(|(&x, m)| {
                let (value, stderr) = match self.orientation {
                    Orientation::Upper => m[0].summary(self.draws),
                    Orientation::Lower => {
                        let (lower, se) = m[1].summary(self.draws);
                        (1.0 - lower, se)
                    }
                };
                TailEstimate {
                    x,
                    value: lit(value),
                    stderr: lit(stderr),
                    draws: self.draws,
                    branch_weights: self.branch_weights.clone(),
                }
            })
            .collect())
    }

    /// Tail estimates at several thresholds from one pass over the draws.
    pub fn evaluate_many(&self, xs: &[T]) -> Result<Vec<TailEstimate<T>>> {
        self.estimates(xs, false)
    }

    pub fn evaluate(&self, x: T) -> Result<TailEstimate<T>> {
        Ok(self.estimates(&[x], false)?.remove(0))
    }

    /// As [`TailEngine::evaluate`], but the stage-1 integral is split into
    /// the half-spaces of the stage-2 strategies before the count sums.
    pub fn evaluate_presplit(&self, x: T) -> Result<TailEstimate<T>> {
        Ok(self.estimates(&[x], true)?.remove(0))
    }

    /// Importance estimate of the total mass of the nested expansion
    /// measure, with its standard error.
    pub fn mass(&self) -> Result<(T, T)> {
        let sums = self.accumulate(&[T::zero()], false)?;
        let (m, se) = sums[0][2].summary(self.draws);
        Ok((lit(m), lit(se)))
    }
}

/// `P[𝔘 ≥ x]` with proposals centred at `x`.
pub fn tail_probability<T: Scalar>(x: T, config: &DesignConfig<T>) -> Result<TailEstimate<T>> {
    TailEngine::new(config, x)?.evaluate(x)
}

/// Expansion quantile at level `alpha`: bisection of the tail under common
/// random numbers, proposals centred at the normal quantile. The standard
/// error is the tail standard error over a central-difference density.
pub fn ae_quantile<T: Scalar>(config: &DesignConfig<T>, alpha: T) -> Result<QuantileResult<T>> {
    let engine = TailEngine::new(config, normal_quantile(alpha)?)?;
    let (x_hat, bracket) = quantile(
        |x| Ok(engine.evaluate(x)?.value),
        alpha,
        lit(BRACKET.0),
        lit(BRACKET.1),
    )?;
    let h = lit::<T>(DENSITY_STEP);
    let est = engine.evaluate_many(&[x_hat - h, x_hat, x_hat + h])?;
    let density = (est[0].value - est[2].value) / (h + h);
    Ok(QuantileResult {
        alpha,
        x_hat,
        method: Method::Expansion,
        stderr: (density > T::zero()).then(|| est[1].stderr / density),
        bracket: Some(bracket),
    })
}

pub fn ae_quantiles<T: Scalar>(config: &DesignConfig<T>, alphas: &[T]) -> Result<Vec<QuantileResult<T>>> {
    alphas.iter().map(|&a| ae_quantile(config, a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use approx::assert_relative_eq;

    #[test]
    fn weights_examples() {
        let w = StatWeights::<f64>::new([25, 25], 2).unwrap();
        assert_relative_eq!(w.l_dot[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(w.l_dot[1], -0.5, epsilon = 1e-15);
        assert_relative_eq!(w.l_ddot[0], 2f64.sqrt(), epsilon = 1e-15);
        let w = StatWeights::<f64>::new([10, 40], 2).unwrap();
        let orth = w.l_dot[0] * 10f64.sqrt() + w.l_dot[1] * 40f64.sqrt();
        assert!(orth.abs() < 1e-14);
        assert!(StatWeights::<f64>::new([0, 50], 2).is_err());
    }

    #[test]
    fn integrand_examples() {
        let w = [StatWeights::<f64>::new([25, 25], 2).unwrap(); 2];
        let ys = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert_relative_eq!(statistic_value(&ys, &w), 0.5, epsilon = 1e-15);
        assert_eq!(integrand(&ys, &w, 0.49), 1.0);
        assert_eq!(integrand(&ys, &w, 0.51), 0.0);
        assert_eq!(integrand(&ys, &w, f64::INFINITY), 0.0);
    }

    #[test]
    fn proposal_examples() {
        let w = [StatWeights::<f64>::new([25, 25], 2).unwrap(); 2];
        let v = [Mat3::identity(); 2];
        let props = proposal(1.96, &w, &v, 2.0).unwrap();
        for p in &props {
            assert_relative_eq!(p.mean[0], 0.98, epsilon = 1e-14);
            assert_relative_eq!(p.mean[1], -0.98, epsilon = 1e-14);
            assert_eq!(p.mean[2], 0.0);
            assert_eq!(p.cov, Mat3::identity().scale(2.0));
        }
        let centred = proposal(0.0, &w, &v, 2.0).unwrap();
        assert!(centred.iter().all(|p| p.mean == [0.0; 3]));
        assert!(proposal(0.0, &w, &v, 1.0).is_err());
    }

    #[test]
    fn proposal_density_matches_closed_form() {
        let v = Mat3 {
            m: [[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 3.0]],
        };
        let p = GaussianProposal::new([0.5, -0.2, 0.0], v).unwrap();
        let x = [0.1, 0.4, -1.0];
        let want = crate::edgeworth::gaussian_density(&[0.1 - 0.5, 0.4 + 0.2, -1.0], &v).unwrap();
        assert_relative_eq!(p.density(&x), want, max_relative = 1e-13);
    }

    #[test]
    fn is_ratio_identity_is_exact() {
        let props = vec![
            GaussianProposal::new([0.3, 0.0, 0.0], Mat3::identity().scale(2.0)).unwrap(),
            GaussianProposal::new([0.0; 3], Mat3::identity()).unwrap(),
        ];
        let (v, se) = is_estimate(
            |y: &[Vec3<f64>]| props[0].density(&y[0]) * props[1].density(&y[1]),
            &props,
            2000,
            7,
            0,
        )
        .unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        assert!(se < 1e-10);
        assert!(is_estimate(|_: &[Vec3<f64>]| 1.0, &props, 999, 7, 0).is_err());
    }

    #[test]
    fn small_engine_is_thread_count_independent() {
        let mut c = DesignConfig::two_stage(
            30,
            NoiseModel::gamma(3.0, 2.0).unwrap(),
            [0.5, 0.5],
            Policy::EpsGreedy { clip: 0.2 },
        );
        c.is.draws = 5000;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| TailEngine::new(&c, 1.0).unwrap().evaluate(1.0).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
