//! Gauss–Hermite product quadrature against trivariate Gaussian weights.

use crate::linalg::{Mat3, Vec3};
use crate::{lit, Scalar};

/// Nodes and weights of the `m`-point Gauss–Hermite rule for the weight
/// `e^{−t²}` on the real line, nodes in increasing order.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "at least one node");
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    let mut z = 0.0f64;
    for i in 0..m.div_ceil(2) {
        // initial guesses from the asymptotic node distribution
        z = match i {
            0 => (2.0 * mf + 1.0).sqrt() - 1.855_75 * (2.0 * mf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * mf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=m {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * mf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[m - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// `E f(Z)` for `Z ~ N(0, V)` by the `m³`-point product rule after the
/// change of variables `Z = √2·L t`, `V = L Lᵀ`. Returns `None` if `V` is not
/// positive definite.
pub fn gaussian_expectation3<T, F>(v: &Mat3<T>, m: usize, mut f: F) -> Option<T>
where
    T: Scalar,
    F: FnMut(&Vec3<T>) -> T,
{
    let l = v.cholesky()?;
    let (nodes, weights) = gauss_hermite(m);
    let nodes: Vec<T> = nodes.iter().map(|&t| lit::<T>(t * std::f64::consts::SQRT_2)).collect();
    let weights: Vec<T> = weights.iter().map(|&w| lit::<T>(w)).collect();
    let mut acc = T::zero();
    for (a, &wa) in nodes.iter().zip(&weights) {
        for (b, &wb) in nodes.iter().zip(&weights) {
            for (c, &wc) in nodes.iter().zip(&weights) {
                let z = l.mul_vec(&[*a, *b, *c]);
                acc = acc + wa * wb * wc * f(&z);
            }
        }
    }
    Some(acc / lit::<T>(std::f64::consts::PI.powf(1.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_even_moments() {
        let (x, w) = gauss_hermite(20);
        assert_eq!(x.len(), 20);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let moment = |k: i32| x.iter().zip(&w).map(|(t, w)| w * t.powi(k)).sum::<f64>();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_relative_eq!(moment(0), sqrt_pi, max_relative = 1e-13);
        assert_relative_eq!(moment(2), sqrt_pi / 2.0, max_relative = 1e-13);
        assert_relative_eq!(moment(10), sqrt_pi * 945.0 / 32.0, max_relative = 1e-12);
        assert!(moment(7).abs() < 1e-12);
    }

    #[test]
    fn small_rules() {
        let (x, w) = gauss_hermite(1);
        assert_eq!(x, vec![0.0]);
        assert_relative_eq!(w[0], std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        let (x, _) = gauss_hermite(2);
        assert_relative_eq!(x[1], 0.5f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn gaussian_second_moments() {
        let v = Mat3 {
            m: [[1.0, 0.2, 0.5], [0.2, 2.0, -0.3], [0.5, -0.3, 3.0]],
        };
        for i in 0..3 {
            for j in 0..3 {
                let e = gaussian_expectation3(&v, 8, |z| z[i] * z[j]).unwrap();
                assert_relative_eq!(e, v.m[i][j], epsilon = 1e-12);
            }
        }
        // E Z₁⁴ = 3V₁₁²
        let e = gaussian_expectation3(&v, 8, |z: &Vec3<f64>| z[0].powi(4)).unwrap();
        assert_relative_eq!(e, 3.0, epsilon = 1e-12);
        assert!(gaussian_expectation3(&Mat3::from_diag([1.0, -1.0, 1.0]), 4, |_| 1.0).is_none());
    }
}
