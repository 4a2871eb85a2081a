//! Standardized noise families and their exact moments.
//!
//! Every family is mapped affinely to mean 0 and variance 1 using its exact
//! population mean and standard deviation. The expansion consumes the exact
//! standardized raw moments `E[ε^r]`, `r = 3..6`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{lit, Scalar};

/// Distribution family before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum NoiseFamily<T> {
    Normal,
    /// Gamma with shape `k` and scale `θ`. Only the shape survives
    /// standardization; the scale is kept so configs can state it.
    Gamma { shape: T, scale: T },
    /// `weight·N(mean1, var1) + (1 − weight)·N(mean2, var2)`.
    Mixture {
        weight: T,
        mean1: T,
        var1: T,
        mean2: T,
        var2: T,
    },
}

/// A noise law, always standardized to mean 0 and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseModel<T> {
    pub family: NoiseFamily<T>,
}

/// Variance and raw moments `E[ε^r]` of the (standardized) noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet<T> {
    pub sigma2: T,
    pub mu3: T,
    pub mu4: T,
    pub mu5: T,
    pub mu6: T,
}

impl<T: Scalar> MomentSet<T> {
    /// Moments of a standard normal.
    pub fn gaussian() -> Self {
        Self {
            sigma2: T::one(),
            mu3: T::zero(),
            mu4: lit(3.0),
            mu5: T::zero(),
            mu6: lit(15.0),
        }
    }

    /// Plug-in moments, e.g. estimated from data. `sigma2` need not be 1.
    pub fn new(sigma2: T, mu3: T, mu4: T, mu5: T, mu6: T) -> Result<Self> {
        let m = Self {
            sigma2,
            mu3,
            mu4,
            mu5,
            mu6,
        };
        if !(sigma2 > T::zero()) || [mu3, mu4, mu5, mu6].iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "moments must be finite with positive variance, got {m:?}"
            )));
        }
        Ok(m)
    }

    /// `E[ε⁴] − σ⁴`, the variance of `ε² − σ²`.
    pub fn var_of_square(&self) -> T {
        self.mu4 - self.sigma2 * self.sigma2
    }

    /// Excess of `μ₄` over the moment-inequality bound `σ⁴ + μ₃²/σ²`.
    pub fn moment_gap(&self) -> T {
        self.var_of_square() - self.mu3 * self.mu3 / self.sigma2
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Raw moments `E[X^r]`, `r = 0..=6`, of `N(mean, var)`.
fn normal_raw_moments<T: Scalar>(mean: T, var: T) -> [T; 7] {
    let mut m = [T::zero(); 7];
    m[0] = T::one();
    m[1] = mean;
    for r in 2..7 {
        m[r] = mean * m[r - 1] + lit::<T>((r - 1) as f64) * var * m[r - 2];
    }
    m
}

impl<T: Scalar> NoiseModel<T> {
    pub fn normal() -> Self {
        Self {
            family: NoiseFamily::Normal,
        }
    }

    pub fn gamma(shape: T, scale: T) -> Result<Self> {
        let m = Self {
            family: NoiseFamily::Gamma { shape, scale },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn mixture(weight: T, mean1: T, var1: T, mean2: T, var2: T) -> Result<Self> {
        let m = Self {
            family: NoiseFamily::Mixture {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            NoiseFamily::Normal => "normal",
            NoiseFamily::Gamma { .. } => "gamma",
            NoiseFamily::Mixture { .. } => "mixture",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        match self.family {
            NoiseFamily::Normal => Ok(()),
            NoiseFamily::Gamma { shape, scale } => {
                if pos(shape) && pos(scale) {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!(
                        "gamma needs shape > 0 and scale > 0, got shape {shape}, scale {scale}"
                    )))
                }
            }
            NoiseFamily::Mixture {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => {
                let w_ok = weight > T::zero() && weight < T::one();
                if w_ok && pos(var1) && pos(var2) && mean1.is_finite() && mean2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!(
                        "mixture needs weight in (0,1) and positive variances, got {:?}",
                        self.family
                    )))
                }
            }
        }
    }

    /// Exact mean and standard deviation of the unstandardized family.
    pub fn location_scale(&self) -> Result<(T, T)> {
        self.validate()?;
        Ok(match self.family {
            NoiseFamily::Normal => (T::zero(), T::one()),
            NoiseFamily::Gamma { shape, scale } => (shape * scale, scale * shape.sqrt()),
            NoiseFamily::Mixture {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => {
                let w2 = T::one() - weight;
                let mean = weight * mean1 + w2 * mean2;
                let second = weight * (var1 + mean1 * mean1) + w2 * (var2 + mean2 * mean2);
                (mean, (second - mean * mean).sqrt())
            }
        })
    }

    /// Exact standardized moments (`σ² = 1`).
    pub fn standardized_moments(&self) -> Result<MomentSet<T>> {
        self.validate()?;
        match self.family {
            NoiseFamily::Normal => Ok(MomentSet::gaussian()),
            NoiseFamily::Gamma { shape, .. } => {
                // Standardized gamma cumulants: κ_r = (r−1)!·k^(1−r/2).
                let kappa = |r: i32| {
                    let fact: f64 = (1..r).map(f64::from).product();
                    lit::<T>(fact) * shape.powf(lit::<T>(1.0 - f64::from(r) / 2.0))
                };
                let (k3, k4, k5, k6) = (kappa(3), kappa(4), kappa(5), kappa(6));
                Ok(MomentSet {
                    sigma2: T::one(),
                    mu3: k3,
                    mu4: k4 + lit(3.0),
                    mu5: k5 + lit::<T>(10.0) * k3,
                    mu6: k6 + lit::<T>(15.0) * k4 + lit::<T>(10.0) * k3 * k3 + lit(15.0),
                })
            }
            NoiseFamily::Mixture {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => {
                let (mean, sd) = self.location_scale()?;
                let a = normal_raw_moments(mean1, var1);
                let b = normal_raw_moments(mean2, var2);
                let w2 = T::one() - weight;
                let raw: Vec<T> = (0..7).map(|r| weight * a[r] + w2 * b[r]).collect();
                let central = |r: u32| -> T {
                    (0..=r)
                        .map(|i| {
                            lit::<T>(binomial(r, i))
                                * raw[i as usize]
                                * (-mean).powi((r - i) as i32)
                        })
                        .sum::<T>()
                        / sd.powi(r as i32)
                };
                Ok(MomentSet {
                    sigma2: T::one(),
                    mu3: central(3),
                    mu4: central(4),
                    mu5: central(5),
                    mu6: central(6),
                })
            }
        }
    }

    /// Prepared sampler for the standardized law.
    pub fn sampler(&self) -> Result<NoiseSampler> {
        let (mean, sd) = self.location_scale()?;
        let f = |v: T| v.to_f64().expect("finite parameter");
        let kind = match self.family {
            NoiseFamily::Normal => SamplerKind::Normal,
            NoiseFamily::Gamma { shape, scale } => SamplerKind::Gamma(
                Gamma::new(f(shape), f(scale))
                    .map_err(|e| Error::ParameterDomain(format!("gamma: {e}")))?,
            ),
            NoiseFamily::Mixture {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => SamplerKind::Mixture {
                weight: f(weight),
                mean1: f(mean1),
                sd1: f(var1).sqrt(),
                mean2: f(mean2),
                sd2: f(var2).sqrt(),
            },
        };
        Ok(NoiseSampler {
            kind,
            mean: f(mean),
            inv_sd: 1.0 / f(sd),
        })
    }

    /// `count` i.i.d. standardized draws from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<T>> {
        if count == 0 {
            return Err(Error::ParameterDomain("sample count must be positive".into()));
        }
        let s = self.sampler()?;
        Ok((0..count).map(|_| lit(s.draw(rng))).collect())
    }
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Normal,
    Gamma(Gamma<f64>),
    Mixture {
        weight: f64,
        mean1: f64,
        sd1: f64,
        mean2: f64,
        sd2: f64,
    },
}

/// Draws standardized noise in `f64`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSampler {
    kind: SamplerKind,
    mean: f64,
    inv_sd: f64,
}

impl NoiseSampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match self.kind {
            SamplerKind::Normal => return StandardNormal.sample(rng),
            SamplerKind::Gamma(g) => g.sample(rng),
            SamplerKind::Mixture {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                let z: f64 = StandardNormal.sample(rng);
                if rng.random::<f64>() < weight {
                    mean1 + sd1 * z
                } else {
                    mean2 + sd2 * z
                }
            }
        };
        (raw - self.mean) * self.inv_sd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Domain};
    use approx::assert_relative_eq;

    /// Composite Simpson rule on [a, b] with `m` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn std_moments_by_quadrature(density: impl Fn(f64) -> f64, a: f64, b: f64) -> [f64; 7] {
        let m = 400_000;
        let raw: Vec<f64> = (0..3)
            .map(|r| simpson(|x| x.powi(r) * density(x), a, b, m))
            .collect();
        let mean = raw[1] / raw[0];
        let var = raw[2] / raw[0] - mean * mean;
        let sd = var.sqrt();
        let mut out = [0.0; 7];
        for (r, o) in out.iter_mut().enumerate() {
            *o = simpson(|x| ((x - mean) / sd).powi(r as i32) * density(x), a, b, m) / raw[0];
        }
        out
    }

    #[test]
    fn normal_moments_exact() {
        let m = NoiseModel::<f64>::normal().standardized_moments().unwrap();
        assert_eq!((m.mu3, m.mu4, m.mu5, m.mu6), (0.0, 3.0, 0.0, 15.0));
        assert_eq!(m.sigma2, 1.0);
    }

    #[test]
    fn gamma_moments_match_quadrature() {
        let g = NoiseModel::gamma(3.0, 2.0).unwrap();
        let m = g.standardized_moments().unwrap();
        assert_relative_eq!(m.mu3, 2.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.mu4, 5.0, epsilon = 1e-12);

        let (k, th) = (3.0, 2.0);
        let dens = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                x.powf(k - 1.0) * (-x / th).exp() / (2.0 * th.powf(k))
            }
        };
        let q = std_moments_by_quadrature(dens, 0.0, 200.0);
        assert_relative_eq!(q[3], m.mu3, epsilon = 1e-7);
        assert_relative_eq!(q[4], m.mu4, epsilon = 1e-7);
        assert_relative_eq!(q[5], m.mu5, epsilon = 1e-6);
        assert_relative_eq!(q[6], m.mu6, epsilon = 1e-5);
    }

    #[test]
    fn mixture_moments_match_quadrature() {
        let mix = NoiseModel::mixture(0.7, 0.0, 1.0, 3.0, 4.0).unwrap();
        let (mean, sd) = mix.location_scale().unwrap();
        assert_relative_eq!(mean, 0.9, epsilon = 1e-15);
        assert_relative_eq!(sd * sd, 3.79, epsilon = 1e-14);

        let phi = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let dens = |x: f64| 0.7 * phi(x, 0.0, 1.0) + 0.3 * phi(x, 3.0, 4.0);
        let q = std_moments_by_quadrature(dens, -30.0, 40.0);
        let m = mix.standardized_moments().unwrap();
        for (r, exact) in [(3, m.mu3), (4, m.mu4), (5, m.mu5), (6, m.mu6)] {
            assert!((q[r] - exact).abs() < 1e-8, "mu{r}: quad {} vs exact {}", q[r], exact);
        }
    }

    #[test]
    fn gamma_skew_decreases_in_shape() {
        let mut prev = f64::INFINITY;
        for k in [0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 50.0, 1000.0] {
            let mu3 = NoiseModel::gamma(k, 1.0).unwrap().standardized_moments().unwrap().mu3;
            assert!(mu3 > 0.0 && mu3 < prev);
            prev = mu3;
        }
        assert!(prev < 0.07);
    }

    #[test]
    fn moment_inequality_holds() {
        for model in [
            NoiseModel::normal(),
            NoiseModel::gamma(0.7, 2.0).unwrap(),
            NoiseModel::mixture(0.7, 0.0, 1.0, 3.0, 4.0).unwrap(),
        ] {
            let m = model.standardized_moments().unwrap();
            assert!(m.mu4 >= 1.0 + m.mu3 * m.mu3);
            assert!(m.moment_gap() >= 0.0);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NoiseModel::gamma(0.0, 2.0).is_err());
        assert!(NoiseModel::gamma(3.0, -1.0).is_err());
        assert!(NoiseModel::mixture(1.0, 0.0, 1.0, 3.0, 4.0).is_err());
        assert!(NoiseModel::mixture(0.5, 0.0, 0.0, 3.0, 4.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = NoiseModel::<f64>::gamma(3.0, 2.0).unwrap();
        let a = g.sample(&mut stream_rng(11, Domain::Noise, 0), 100).unwrap();
        let b = g.sample(&mut stream_rng(11, Domain::Noise, 0), 100).unwrap();
        assert_eq!(a, b);
        assert!(g.sample(&mut stream_rng(11, Domain::Noise, 0), 0).is_err());
    }

    #[test]
    fn f32_moments_agree_with_f64() {
        let a = NoiseModel::<f32>::gamma(3.0, 2.0).unwrap().standardized_moments().unwrap();
        let b = NoiseModel::<f64>::gamma(3.0, 2.0).unwrap().standardized_moments().unwrap();
        assert!((f64::from(a.mu6) - b.mu6).abs() < 1e-4);
    }
}
