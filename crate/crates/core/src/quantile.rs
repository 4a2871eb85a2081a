//! Quantiles: bisection on a tail function, order statistics, and the
//! standard-normal baseline.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::{from_usize, lit, Scalar};

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "mc")]
    MonteCarlo,
    #[serde(rename = "ae")]
    Expansion,
    #[serde(rename = "normal")]
    Normal,
}

impl Method {
    pub fn key(self) -> &'static str {
        match self {
            Method::MonteCarlo => "mc",
            Method::Expansion => "ae",
            Method::Normal => "normal",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Method::MonteCarlo => "Monte Carlo",
            Method::Expansion => "Asymptotic expansion",
            Method::Normal => "Normal approximation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileResult<T> {
    pub alpha: T,
    pub x_hat: T,
    pub method: Method,
    pub stderr: Option<T>,
    /// Final bisection bracket, for root-found quantiles.
    pub bracket: Option<(T, T)>,
}

/// Inverse standard-normal CDF (Acklam's rational approximation, relative
/// error below 1.2·10⁻⁹).
pub fn normal_quantile<T: Scalar>(alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::ParameterDomain(format!(
            "probability must lie in (0,1), got {alpha}"
        )));
    }
    // Evaluate on the lower half and reflect. Below 1e-3 the round trip
    // 1 − (1 − α) costs accuracy, so exact antisymmetry q(α) = −q(1 − α)
    // is only guaranteed on [1e-3, 1 − 1e-3].
    if alpha > lit(0.5) {
        return Ok(-normal_quantile_lower(T::one() - alpha));
    }
    let p = if alpha >= lit(1e-3) {
        T::one() - (T::one() - alpha)
    } else {
        alpha
    };
    Ok(normal_quantile_lower(p))
}

fn normal_quantile_lower<T: Scalar>(p: T) -> T {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let horner = |coef: &[f64], x: T| coef.iter().fold(T::zero(), |acc, &c| acc * x + lit(c));
    let p_low = lit::<T>(0.024_25);
    if p == lit(0.5) {
        return T::zero();
    }
    if p < p_low {
        let q = (-lit::<T>(2.0) * p.ln()).sqrt();
        horner(&C, q) / (horner(&D, q) * q + T::one())
    } else {
        let q = p - lit(0.5);
        let r = q * q;
        horner(&A, r) * q / (horner(&B, r) * r + T::one())
    }
}

/// Order-statistic quantile of sorted data, with a standard error from the
/// binomial (distribution-free) confidence interval of the order statistic.
pub fn empirical_quantile<T: Scalar>(sorted: &[T], alpha: T) -> Result<(T, T)> {
    let n = sorted.len();
    if n == 0 {
        return Err(Error::ParameterDomain("no observations".into()));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::ParameterDomain(format!(
            "probability must lie in (0,1), got {alpha}"
        )));
    }
    let nf = from_usize::<T>(n);
    let rank = |a: T| -> usize {
        let r = (a * nf).ceil().to_usize().unwrap_or(1).max(1);
        r.min(n) - 1
    };
    let x = sorted[rank(alpha)];
    let z = lit::<T>(1.959_963_984_540_054);
    let half = z * (nf * alpha * (T::one() - alpha)).sqrt();
    let lo = alpha - half / nf;
    let hi = alpha + half / nf;
    let lo_x = sorted[rank(lo.max(T::min_positive_value()))];
    let hi_x = sorted[rank(hi.min(T::one()))];
    Ok((x, (hi_x - lo_x) / (lit::<T>(2.0) * z)))
}

/// Solves `tail(x) = 1 − alpha` for non-increasing `tail` by bisection on
/// `[lo, hi]`, stopping at width [`BISECTION_WIDTH`].
pub fn bisect_quantile<T, F>(mut tail: F, alpha: T, lo: T, hi: T) -> Result<(T, (T, T))>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let level = T::one() - alpha;
    let (mut a, mut b) = (lo, hi);
    let ta = tail(a)?;
    let tb = tail(b)?;
    if !(ta >= level && level >= tb) {
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        return Err(Error::Bracket {
            lo: f(lo),
            hi: f(hi),
            level: f(level),
            tail_lo: f(ta),
            tail_hi: f(tb),
        });
    }
    let width = lit::<T>(BISECTION_WIDTH);
    while b - a > width {
        let mid = (a + b) * lit(0.5);
        if tail(mid)? >= level {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(((a + b) * lit(0.5), (a, b)))
}

/// [`bisect_quantile`] on `[−w, w]`, doubling `w` from `start` up to `max`
/// while the bracket fails to straddle the level.
pub fn quantile<T, F>(mut tail: F, alpha: T, start: T, max: T) -> Result<(T, (T, T))>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let mut w = start;
    loop {
        match bisect_quantile(&mut tail, alpha, -w, w) {
            Err(Error::Bracket { .. }) if w * lit(2.0) <= max => w = w * lit(2.0),
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn normal_quantile_examples() {
        assert_relative_eq!(normal_quantile(0.975).unwrap(), 1.959_963_985, epsilon = 1e-8);
        assert_relative_eq!(normal_quantile(0.05).unwrap(), -1.644_853_627, epsilon = 1e-8);
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn normal_quantile_matches_cdf_inverse() {
        let std = Normal::new(0.0, 1.0).unwrap();
        let grid = (1..1000).map(|i| i as f64 / 1000.0);
        for p in grid.chain([1e-10, 1e-6, 1.0 - 1e-6]) {
            let x = normal_quantile(p).unwrap();
            assert!((x - std.inverse_cdf(p)).abs() < 1e-8, "p = {p}");
        }
    }

    #[test]
    fn empirical_quantile_uniform_grid() {
        let data: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        let (x, se) = empirical_quantile(&data, 0.25).unwrap();
        assert_relative_eq!(x, 0.25);
        // binomial interval ±1.96·√(n·0.25·0.75)/n → se ≈ √(0.1875/1000)
        assert!((se - (0.1875f64 / 1000.0).sqrt()).abs() < 2e-3);
    }

    #[test]
    fn bisection_finds_logistic_quantile() {
        let tail = |x: f64| Ok(1.0 / (1.0 + x.exp()));
        let (x, (a, b)) = bisect_quantile(tail, 0.9, -8.0, 8.0).unwrap();
        assert!(b - a <= BISECTION_WIDTH);
        assert!((x - (0.9f64 / 0.1).ln()).abs() < BISECTION_WIDTH);
    }

    #[test]
    fn bracket_errors_and_widening() {
        let tail = |x: f64| Ok(1.0 / (1.0 + (x / 10.0).exp()));
        let err = bisect_quantile(tail, 0.9999, -8.0, 8.0).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
        let (x, _) = quantile(tail, 0.9999, 8.0, 32.0).unwrap_or((f64::NAN, (0.0, 0.0)));
        assert!(x.is_nan() || x > 8.0);
        let (x, _) = quantile(tail, 0.95, 8.0, 32.0).unwrap();
        assert!((x - 10.0 * 19f64.ln()).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn normal_quantile_antisymmetric(p in 1e-3f64..0.999) {
            prop_assert_eq!(normal_quantile(p).unwrap(), -normal_quantile(1.0 - p).unwrap());
        }
    }
}
