//! First-order Edgeworth signed density of the stage vector
//! `z = (ż₁, ż₂, z̈)`.
//!
//! For a stage with `n` subjects split `(N₁, N₂)` between the arms and noise
//! with variance `σ²` and raw moments `μ₃..μ₆`,
//!
//! ```text
//! ż_k = N_k^{-1/2} Σ_{j ∈ arm k} ε_j,     z̈ = n^{-1/2} Σ_j (ε_j² − σ²)
//! ```
//!
//! has covariance `V` (see [`stage_covariance`]) and third cumulants
//!
//! ```text
//! κ(ż_k, ż_k, ż_k) = N_k^{-1/2} μ₃
//! κ(ż_k, ż_k, z̈)   = n^{-1/2} (μ₄ − σ⁴)
//! κ(ż_k, z̈, z̈)     = N_k^{1/2} n^{-1} (μ₅ − 2σ²μ₃)
//! κ(z̈, z̈, z̈)       = n^{-1/2} (μ₆ − 3σ²μ₄ + 2σ⁶)
//! ```
//!
//! with all cumulants mixing the two arms equal to zero. The density is
//! `φ(z; 0, V)·(1 + ⅙ Σ κ_abc H_abc(z; V))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::noise::MomentSet;
use crate::{from_usize, lit, Scalar};

/// Condition number above which a stage covariance is treated as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ExpansionOrder {
    /// Gaussian principal part only.
    Gaussian,
    /// One `n^{-1/2}` correction.
    First,
}

impl TryFrom<u8> for ExpansionOrder {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Self::Gaussian),
            1 => Ok(Self::First),
            other => Err(format!("expansion order must be 0 or 1, got {other}")),
        }
    }
}

impl From<ExpansionOrder> for u8 {
    fn from(o: ExpansionOrder) -> u8 {
        match o {
            ExpansionOrder::Gaussian => 0,
            ExpansionOrder::First => 1,
        }
    }
}

/// Coordinate of the stage vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    Arm1,
    Arm2,
    /// The centred sum of squares `z̈`.
    Square,
}

impl Coord {
    pub fn index(self) -> usize {
        match self {
            Coord::Arm1 => 0,
            Coord::Arm2 => 1,
            Coord::Square => 2,
        }
    }
}

/// Index triple of a third-order Hermite tensor entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HermiteIndex(pub [Coord; 3]);

impl HermiteIndex {
    /// From digits `1`, `2` (arms) and `0` (the squares coordinate).
    pub fn from_digits(d: [u8; 3]) -> Result<Self> {
        let c = |x: u8| match x {
            1 => Ok(Coord::Arm1),
            2 => Ok(Coord::Arm2),
            0 => Ok(Coord::Square),
            other => Err(Error::ParameterDomain(format!(
                "Hermite index digit must be 0, 1 or 2, got {other}"
            ))),
        };
        Ok(Self([c(d[0])?, c(d[1])?, c(d[2])?]))
    }
}

/// Covariance of `(ż₁, ż₂, z̈)` given the arm counts.
pub fn stage_covariance<T: Scalar>(counts: [usize; 2], n: usize, moments: &MomentSet<T>) -> Result<Mat3<T>> {
    if counts[0] + counts[1] != n || counts.contains(&0) {
        return Err(Error::DegenerateDesign(format!(
            "arm counts {counts:?} must be positive and sum to n = {n}"
        )));
    }
    let s2 = moments.sigma2;
    let mut v = Mat3::from_diag([s2, s2, moments.var_of_square()]);
    for (k, &c) in counts.iter().enumerate() {
        let off = (from_usize::<T>(c) / from_usize::<T>(n)).sqrt() * moments.mu3;
        v[(k, 2)] = off;
        v[(2, k)] = off;
    }
    if v.cholesky().is_none() {
        return Err(Error::ExpansionDegenerate(format!(
            "stage covariance is not positive definite (counts {counts:?}, n {n}, mu4 - sigma^4 = {})",
            moments.var_of_square()
        )));
    }
    Ok(v)
}

/// `H_ijk` from `ζ = V⁻¹z` and `P = V⁻¹`.
#[inline]
pub(crate) fn hermite3_from<T: Scalar>(zeta: &Vec3<T>, prec: &Mat3<T>, i: usize, j: usize, k: usize) -> T {
    zeta[i] * zeta[j] * zeta[k] - zeta[i] * prec.m[j][k] - zeta[j] * prec.m[i][k] - zeta[k] * prec.m[i][j]
}

/// Third-order Hermite polynomial
/// `φ(z;0,V)⁻¹ (−∂_a)(−∂_b)(−∂_c) φ(z;0,V)`.
pub fn hermite3<T: Scalar>(z: &Vec3<T>, v: &Mat3<T>, idx: HermiteIndex) -> Result<T> {
    if v.cholesky().is_none() {
        return Err(Error::ExpansionDegenerate("covariance is not positive definite".into()));
    }
    let prec = v
        .inverse()
        .ok_or_else(|| Error::ExpansionDegenerate("covariance is singular".into()))?;
    let zeta = prec.mul_vec(z);
    let [a, b, c] = idx.0.map(Coord::index);
    Ok(hermite3_from(&zeta, &prec, a, b, c))
}

/// Gaussian density `φ(z; 0, V)`.
pub fn gaussian_density<T: Scalar>(z: &Vec3<T>, v: &Mat3<T>) -> Result<T> {
    let prec = v
        .inverse()
        .ok_or_else(|| Error::ExpansionDegenerate("covariance is singular".into()))?;
    let det = v.det();
    if !(det > T::zero()) {
        return Err(Error::ExpansionDegenerate("covariance is not positive definite".into()));
    }
    let two_pi = lit::<T>(2.0) * T::PI();
    Ok((-lit::<T>(0.5) * prec.quad_form(z)).exp() / (two_pi.powi(3) * det).sqrt())
}

/// The stage-wise signed measure `Ψ` for given arm counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionMeasure<T> {
    pub n: usize,
    pub counts: [usize; 2],
    pub moments: MomentSet<T>,
    pub order: ExpansionOrder,
    pub reduced: bool,
    cov: Mat3<T>,
    prec: Mat3<T>,
    log_norm: T,
    coef_kkk: [T; 2],
    coef_kk0: T,
    coef_k00: [T; 2],
    coef_000: T,
    fallback: bool,
}

impl<T: Scalar> ExpansionMeasure<T> {
    /// Builds the measure, failing if the covariance is not positive definite
    /// or its condition number exceeds [`MAX_CONDITION`].
    pub fn new(
        n: usize,
        counts: [usize; 2],
        moments: MomentSet<T>,
        order: ExpansionOrder,
        reduced: bool,
    ) -> Result<Self> {
        let cov = stage_covariance(counts, n, &moments)?;
        let ev = cov.symmetric_eigenvalues();
        if ev[2] > lit::<T>(MAX_CONDITION) * ev[0] {
            return Err(Error::ExpansionDegenerate(format!(
                "stage covariance condition number {} exceeds {MAX_CONDITION:e}",
                ev[2] / ev[0]
            )));
        }
        Ok(Self::assemble(n, counts, moments, order, reduced, cov, false))
    }

    /// Like [`ExpansionMeasure::new`], but a degenerate covariance falls back
    /// to the Gaussian principal part with `V + 10⁻¹⁰·tr(V)·I`. The second
    /// value reports whether the fallback was taken.
    pub fn with_fallback(
        n: usize,
        counts: [usize; 2],
        moments: MomentSet<T>,
        order: ExpansionOrder,
        reduced: bool,
    ) -> Result<(Self, bool)> {
        match Self::new(n, counts, moments, order, reduced) {
            Ok(m) => Ok((m, false)),
            Err(Error::ExpansionDegenerate(_)) => {
                let s2 = moments.sigma2;
                let mut cov = Mat3::from_diag([s2, s2, moments.var_of_square()]);
                for (k, &c) in counts.iter().enumerate() {
                    let off = (from_usize::<T>(c) / from_usize::<T>(n)).sqrt() * moments.mu3;
                    cov[(k, 2)] = off;
                    cov[(2, k)] = off;
                }
                let ridge = lit::<T>(1e-10) * cov.trace().abs().max(T::min_positive_value());
                let mut reg = cov.add(&Mat3::identity().scale(ridge));
                if reg.cholesky().is_none() {
                    // indefinite, not merely singular: drop the cross terms
                    reg = Mat3::from_diag([s2, s2, moments.var_of_square().max(ridge)]);
                }
                Ok((
                    Self::assemble(n, counts, moments, ExpansionOrder::Gaussian, reduced, reg, true),
                    true,
                ))
            }
            Err(e) => Err(e),
        }
    }

    fn assemble(
        n: usize,
        counts: [usize; 2],
        moments: MomentSet<T>,
        order: ExpansionOrder,
        reduced: bool,
        cov: Mat3<T>,
        fallback: bool,
    ) -> Self {
        let prec = cov.inverse().expect("positive-definite covariance is invertible");
        let two_pi = lit::<T>(2.0) * T::PI();
        let log_norm = -lit::<T>(0.5) * (lit::<T>(3.0) * two_pi.ln() + cov.det().ln());

        let nf = from_usize::<T>(n);
        let sqrt_n = nf.sqrt();
        let s2 = moments.sigma2;
        let sixth = T::one() / lit(6.0);
        let half = lit::<T>(0.5);
        let nk = counts.map(|c| from_usize::<T>(c));
        let coef_kkk = nk.map(|c| sixth * moments.mu3 / c.sqrt());
        let coef_kk0 = half * moments.var_of_square() / sqrt_n;
        let (coef_k00, coef_000) = if reduced {
            ([T::zero(); 2], T::zero())
        } else {
            let m5 = moments.mu5 - lit::<T>(2.0) * s2 * moments.mu3;
            let m6 = moments.mu6 - lit::<T>(3.0) * s2 * moments.mu4 + lit::<T>(2.0) * s2 * s2 * s2;
            (nk.map(|c| half * c.sqrt() / nf * m5), sixth * m6 / sqrt_n)
        };
        Self {
            n,
            counts,
            moments,
            order,
            reduced,
            cov,
            prec,
            log_norm,
            coef_kkk,
            coef_kk0,
            coef_k00,
            coef_000,
            fallback,
        }
    }

    pub fn covariance(&self) -> &Mat3<T> {
        &self.cov
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn sigma(&self) -> T {
        self.moments.sigma2.sqrt()
    }

    /// Covariance of the transformed vector `y = (ż/σ, z̈/σ²)`.
    pub fn y_covariance(&self) -> Mat3<T> {
        let s = self.sigma();
        let d = [T::one() / s, T::one() / s, T::one() / (s * s)];
        let mut out = self.cov;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = out.m[i][j] * d[i] * d[j];
            }
        }
        out
    }

    /// Polynomial multiplier `1 + ⅙ Σ κ_abc H_abc` at `z`, given `ζ = V⁻¹z`.
    #[inline]
    fn correction(&self, zeta: &Vec3<T>) -> T {
        if self.order == ExpansionOrder::Gaussian {
            return T::one();
        }
        let p = &self.prec;
        let mut acc = T::one();
        for k in 0..2 {
            acc = acc
                + self.coef_kkk[k] * hermite3_from(zeta, p, k, k, k)
                + self.coef_kk0 * hermite3_from(zeta, p, k, k, 2)
                + self.coef_k00[k] * hermite3_from(zeta, p, k, 2, 2);
        }
        acc + self.coef_000 * hermite3_from(zeta, p, 2, 2, 2)
    }

    /// Signed density `dΨ/dz` at `z`.
    #[inline]
    pub fn density(&self, z: &Vec3<T>) -> T {
        let zeta = self.prec.mul_vec(z);
        let q = z[0] * zeta[0] + z[1] * zeta[1] + z[2] * zeta[2];
        (self.log_norm - lit::<T>(0.5) * q).exp() * self.correction(&zeta)
    }

    /// Density of the transformed vector `y = (ż/σ, z̈/σ²)`:
    /// `σ⁴ ψ(σẏ, σ²ÿ)`.
    #[inline]
    pub fn density_y(&self, y: &Vec3<T>) -> T {
        let s = self.sigma();
        if s == T::one() {
            return self.density(y);
        }
        let s2 = s * s;
        s2 * s2 * self.density(&[s * y[0], s * y[1], s2 * y[2]])
    }

    /// Third cumulant `κ(z_a, z_b, z_c)` entering the correction.
    pub fn third_cumulant(&self, idx: HermiteIndex) -> T {
        let mut arms = [0usize; 2];
        let mut squares = 0;
        let mut last_arm = 0;
        for c in idx.0 {
            match c {
                Coord::Arm1 => {
                    arms[0] += 1;
                    last_arm = 0;
                }
                Coord::Arm2 => {
                    arms[1] += 1;
                    last_arm = 1;
                }
                Coord::Square => squares += 1,
            }
        }
        if arms[0] > 0 && arms[1] > 0 {
            return T::zero();
        }
        let k = last_arm;
        // coefficients carry the multiplicity and the 1/6; undo both
        match squares {
            0 => lit::<T>(6.0) * self.coef_kkk[k],
            1 => lit::<T>(2.0) * self.coef_kk0,
            2 => lit::<T>(2.0) * self.coef_k00[k],
            _ => lit::<T>(6.0) * self.coef_000,
        }
    }
}

/// `ψ(z)` for the measure `em`.
pub fn expansion_density<T: Scalar>(z: &Vec3<T>, em: &ExpansionMeasure<T>) -> T {
    em.density(z)
}

/// `σ⁴ ψ(σẏ, σ²ÿ)`.
pub fn transformed_density<T: Scalar>(y: &Vec3<T>, em: &ExpansionMeasure<T>, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::ParameterDomain(format!("sigma must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    Ok(s2 * s2 * em.density(&[sigma * y[0], sigma * y[1], s2 * y[2]]))
}

/// Univariate Hermite polynomial `h₃(z; v) = z³/v³ − 3z/v²`.
fn h3<T: Scalar>(z: T, v: T) -> T {
    z * z * z / (v * v * v) - lit::<T>(3.0) * z / (v * v)
}

/// First-order product-form density of a linear statistic
/// `(g_k N_k^{-1/2} Σ_{arm k} ε_j)_k` with arm weights `g_k = g_k(N_k/n)`:
///
/// `Π_k φ(z_k; λ₂,k)·{1 + ⅙ n^{-1/2} λ₃,k h₃(z_k; λ₂,k)}`,
/// `λ_r,k = g_k^r (N_k/n)^{-(r-2)/2} κ_r`.
pub fn linear_expansion_density<T: Scalar>(
    z: &[T],
    g: &[T],
    counts: &[usize],
    n: usize,
    moments: &MomentSet<T>,
) -> Result<T> {
    if z.len() != g.len() || z.len() != counts.len() || z.is_empty() {
        return Err(Error::ParameterDomain(
            "z, g and counts must have the same positive length".into(),
        ));
    }
    if counts.contains(&0) || n == 0 {
        return Err(Error::ParameterDomain(format!(
            "arm counts must be positive, got {counts:?}"
        )));
    }
    let nf = from_usize::<T>(n);
    let two_pi = lit::<T>(2.0) * T::PI();
    let mut out = T::one();
    for ((&zk, &gk), &ck) in z.iter().zip(g).zip(counts) {
        let frac = from_usize::<T>(ck) / nf;
        let lam2 = gk * gk * moments.sigma2;
        let lam3 = gk * gk * gk * moments.mu3 / frac.sqrt();
        let phi = (-zk * zk / (lit::<T>(2.0) * lam2)).exp() / (two_pi * lam2).sqrt();
        out = out * phi * (T::one() + lam3 * h3(zk, lam2) / (lit::<T>(6.0) * nf.sqrt()));
    }
    Ok(out)
}

/// `λ₃,k = g_k³ (N_k/n)^{-1/2} κ₃`.
pub fn lambda3<T: Scalar>(g: T, count: usize, n: usize, moments: &MomentSet<T>) -> T {
    g * g * g * moments.mu3 / (from_usize::<T>(count) / from_usize::<T>(n)).sqrt()
}
