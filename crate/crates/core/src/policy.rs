//! Assignment kernels and the clamped-binomial arm-count law.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{from_usize, lit, Scalar};

/// Assignment policy of one stage.
///
/// The decision statistic `h` fed to a policy is `√n·Δ̂/σ` of the previous
/// stage, i.e. `l̈·ẏ` in transformed coordinates. Only its sign matters to
/// `Fixed` and `EpsGreedy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Policy<T> {
    Fixed { probs: [T; 2] },
    EpsGreedy { clip: T },
    /// `h ≤ lower → below`, `lower < h ≤ upper → between`, `h > upper → above`.
    Threshold {
        lower: T,
        upper: T,
        below: [T; 2],
        between: [T; 2],
        above: [T; 2],
    },
}

/// A strategy chosen by a policy: a label unique within the policy and the
/// arm-assignment probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy<T> {
    pub label: usize,
    pub probs: [T; 2],
}

fn check_probs<T: Scalar>(p: &[T; 2]) -> Result<()> {
    let ok = p.iter().all(|&v| v > T::zero() && v < T::one())
        && (p[0] + p[1] - T::one()).abs() <= lit(1e-12);
    if ok {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!(
            "assignment probabilities must lie in (0,1) and sum to 1, got [{}, {}]",
            p[0], p[1]
        )))
    }
}

impl<T: Scalar> Policy<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Policy::Fixed { probs } => check_probs(probs),
            Policy::EpsGreedy { clip } => {
                if *clip > T::zero() && *clip < lit(0.5) {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!(
                        "epsilon-greedy clip must lie in (0, 0.5), got {clip}"
                    )))
                }
            }
            Policy::Threshold {
                lower,
                upper,
                below,
                between,
                above,
            } => {
                if !(lower <= upper) {
                    return Err(Error::ParameterDomain(format!(
                        "threshold policy needs lower <= upper, got {lower} > {upper}"
                    )));
                }
                check_probs(below)?;
                check_probs(between)?;
                check_probs(above)
            }
        }
    }

    /// Strategy selected for decision statistic `h`.
    ///
    /// Epsilon-greedy favours arm 1 for `h ≥ 0` (ties go to arm 1).
    pub fn stage2_strategy(&self, h: T) -> Strategy<T> {
        match *self {
            Policy::Fixed { probs } => Strategy { label: 0, probs },
            Policy::EpsGreedy { clip } => {
                if h >= T::zero() {
                    Strategy {
                        label: 0,
                        probs: [T::one() - clip, clip],
                    }
                } else {
                    Strategy {
                        label: 1,
                        probs: [clip, T::one() - clip],
                    }
                }
            }
            Policy::Threshold {
                lower,
                upper,
                below,
                between,
                above,
            } => {
                if h <= lower {
                    Strategy { label: 0, probs: below }
                } else if h <= upper {
                    Strategy {
                        label: 1,
                        probs: between,
                    }
                } else {
                    Strategy { label: 2, probs: above }
                }
            }
        }
    }

    /// All strategies the policy can select, indexed by label.
    pub fn strategies(&self) -> Vec<Strategy<T>> {
        match *self {
            Policy::Fixed { probs } => vec![Strategy { label: 0, probs }],
            Policy::EpsGreedy { clip } => vec![
                Strategy {
                    label: 0,
                    probs: [T::one() - clip, clip],
                },
                Strategy {
                    label: 1,
                    probs: [clip, T::one() - clip],
                },
            ],
            Policy::Threshold {
                below,
                between,
                above,
                ..
            } => vec![
                Strategy { label: 0, probs: below },
                Strategy {
                    label: 1,
                    probs: between,
                },
                Strategy { label: 2, probs: above },
            ],
        }
    }

    /// Arm-1 probability averaged over the strategies, used to size proposals.
    pub fn mean_arm1_prob(&self) -> T {
        let s = self.strategies();
        s.iter().map(|s| s.probs[0]).sum::<T>() / from_usize(s.len())
    }
}

/// Law of the arm-1 count `N₁` in a batch of `n`, supported on
/// `[n_min, n − n_min]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw<T> {
    pub n: usize,
    pub n_min: usize,
    /// Smallest count carrying weight.
    pub first: usize,
    /// `weights[i]` is the probability of `N₁ = first + i`.
    pub weights: Vec<T>,
}

impl<T: Scalar> CountLaw<T> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.first + i, w))
    }

    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.first + self.weights.len() - 1
    }

    pub fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.iter().map(|(c, w)| from_usize::<T>(c) * w).sum()
    }

    pub fn weight(&self, count: usize) -> T {
        count
            .checked_sub(self.first)
            .and_then(|i| self.weights.get(i).copied())
            .unwrap_or_else(T::zero)
    }

    /// Drops the outermost counts while the discarded mass stays below `tol`,
    /// then renormalizes so the weights again sum to one.
    pub fn pruned(&self, tol: T) -> Self {
        let mut lo = 0;
        let mut hi = self.weights.len();
        let mut dropped = T::zero();
        loop {
            let left = self.weights[lo];
            let right = self.weights[hi - 1];
            let (cand, is_left) = if left <= right { (left, true) } else { (right, false) };
            if hi - lo <= 1 || dropped + cand > tol {
                break;
            }
            dropped = dropped + cand;
            if is_left {
                lo += 1;
            } else {
                hi -= 1;
            }
        }
        let kept = &self.weights[lo..hi];
        let total: T = kept.iter().copied().sum();
        Self {
            n: self.n,
            n_min: self.n_min,
            first: self.first + lo,
            weights: kept.iter().map(|&w| w / total).collect(),
        }
    }

    /// Draws a count by inversion of the cumulative weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, w) in self.iter() {
            acc += w.to_f64().unwrap_or(0.0);
            if u < acc {
                return c;
            }
        }
        *self.support().end()
    }
}

/// Binomial(n, p) law of the arm-1 count with the mass below `n_min` folded
/// onto `n_min` and the mass above `n − n_min` folded onto `n − n_min`.
pub fn clamped_binomial<T: Scalar>(n: usize, p: T, n_min: usize) -> Result<CountLaw<T>> {
    if n < 2 * n_min || n == 0 {
        return Err(Error::InfeasibleDesign { n, n_min });
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::ParameterDomain(format!(
            "arm-1 probability must lie in (0,1), got {p}"
        )));
    }
    let (lp, lq) = (p.ln(), (T::one() - p).ln());
    // log C(n, k) accumulated incrementally.
    let mut log_choose = T::zero();
    let pmf: Vec<T> = (0..=n)
        .map(|k| {
            if k > 0 {
                log_choose = log_choose + (from_usize::<T>(n - k + 1) / from_usize::<T>(k)).ln();
            }
            (log_choose + from_usize::<T>(k) * lp + from_usize::<T>(n - k) * lq).exp()
        })
        .collect();
    let lo = n_min;
    let hi = n - n_min;
    let mut weights: Vec<T> = pmf[lo..=hi].to_vec();
    let below: T = pmf[..lo].iter().copied().sum();
    let above: T = pmf[hi + 1..].iter().copied().sum();
    weights[0] = weights[0] + below;
    let last = weights.len() - 1;
    weights[last] = weights[last] + above;
    let total: T = weights.iter().copied().sum();
    weights.iter_mut().for_each(|w| *w = *w / total);
    Ok(CountLaw {
        n,
        n_min,
        first: lo,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eps_greedy_examples() {
        let pol = Policy::EpsGreedy { clip: 0.2 };
        assert_eq!(pol.stage2_strategy(1.3).probs, [0.8, 0.2]);
        assert_eq!(pol.stage2_strategy(-0.4).probs, [0.2, 0.8]);
        assert_eq!(pol.stage2_strategy(0.0).probs, [0.8, 0.2]);
    }

    #[test]
    fn fixed_ignores_h() {
        let pol = Policy::Fixed { probs: [0.2, 0.8] };
        for h in [-5.0, 0.0, 3.0] {
            assert_eq!(pol.stage2_strategy(h).probs, [0.2, 0.8]);
        }
    }

    #[test]
    fn threshold_is_piecewise() {
        let pol = Policy::Threshold {
            lower: -1.0,
            upper: 1.0,
            below: [0.2, 0.8],
            between: [0.5, 0.5],
            above: [0.8, 0.2],
        };
        pol.validate().unwrap();
        assert_eq!(pol.stage2_strategy(-1.0).label, 0);
        assert_eq!(pol.stage2_strategy(0.3).label, 1);
        assert_eq!(pol.stage2_strategy(1.0).label, 1);
        assert_eq!(pol.stage2_strategy(1.01).label, 2);
        assert_eq!(pol.strategies().len(), 3);
    }

    #[test]
    fn clip_near_half_is_uniform() {
        let pol = Policy::EpsGreedy { clip: 0.5f64 - 1e-9 };
        let p = pol.stage2_strategy(2.0).probs;
        assert!((p[0] - 0.5).abs() < 1e-8 && (p[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn invalid_policies() {
        assert!(Policy::EpsGreedy { clip: 0.5 }.validate().is_err());
        assert!(Policy::Fixed { probs: [0.3, 0.6] }.validate().is_err());
        assert!(Policy::Fixed { probs: [1.0, 0.0] }.validate().is_err());
    }

    #[test]
    fn small_binomial_folds_tails() {
        let law = clamped_binomial(4, 0.5, 1).unwrap();
        assert_eq!(law.support(), 1..=3);
        let expect = [5.0 / 16.0, 6.0 / 16.0, 5.0 / 16.0];
        for (w, e) in law.weights.iter().zip(expect) {
            assert_relative_eq!(*w, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_at_half() {
        let law = clamped_binomial(50, 0.5, 5).unwrap();
        assert_relative_eq!(law.total(), 1.0, epsilon = 1e-12);
        for k in 5..=45 {
            assert_relative_eq!(law.weight(k), law.weight(50 - k), epsilon = 1e-15);
        }
        assert_relative_eq!(law.mean(), 25.0, epsilon = 1e-10);
    }

    #[test]
    fn skewed_law_mode_and_boundary() {
        let law = clamped_binomial(50, 0.8, 5).unwrap();
        let mode = law
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(mode, 40);
        // plain binomial pmf at 45 by direct product
        let mut c = 1.0;
        for i in 0..45 {
            c *= (50 - i) as f64 / (i + 1) as f64;
        }
        let plain = c * 0.8f64.powi(45) * 0.2f64.powi(5);
        assert!(law.weight(45) >= plain);
        assert!(law.weight(45) > plain * 1.5);
    }

    #[test]
    fn infeasible_design() {
        assert_eq!(
            clamped_binomial::<f64>(9, 0.5, 5),
            Err(Error::InfeasibleDesign { n: 9, n_min: 5 })
        );
    }

    #[test]
    fn pruning_keeps_mass() {
        let law = clamped_binomial(50, 0.8, 5).unwrap();
        let p = law.pruned(1e-10);
        assert!(p.weights.len() < law.weights.len());
        assert_relative_eq!(p.total(), 1.0, epsilon = 1e-14);
        let p0 = law.pruned(0.0);
        assert_eq!(p0, law);
    }

    proptest! {
        #[test]
        fn clamped_law_is_a_distribution(n in 2usize..200, p in 0.01f64..0.99, frac in 0.0f64..0.5) {
            let n_min = ((n as f64) * frac).floor() as usize;
            let law = clamped_binomial(n, p, n_min.min(n / 2)).unwrap();
            prop_assert!((law.total() - 1.0).abs() < 1e-12);
            prop_assert!(law.weights.iter().all(|&w| w >= 0.0));
            prop_assert!(*law.support().start() >= law.n_min);
            prop_assert!(*law.support().end() <= n - law.n_min);
        }

        #[test]
        fn strategy_is_scale_invariant(h in -10.0f64..10.0, c in 1e-3f64..1e3) {
            let pol = Policy::EpsGreedy { clip: 0.2 };
            prop_assert_eq!(pol.stage2_strategy(h), pol.stage2_strategy(c * h));
        }
    }
}
