//! Fixed-size 3×3 linear algebra for the stage vectors `(ż₁, ż₂, z̈)`.

use std::ops::{Index, IndexMut};

use crate::{lit, Scalar};

pub type Vec3<T> = [T; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Scalar> Mat3<T> {
    pub fn zeros() -> Self {
        Self {
            m: [[T::zero(); 3]; 3],
        }
    }

    pub fn identity() -> Self {
        Self::from_diag([T::one(); 3])
    }

    pub fn from_diag(d: Vec3<T>) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            out.m[i][i] = d[i];
        }
        out
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|v| *v = *v * c);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = out.m[i][j] + other.m[i][j];
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        out
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1] + self.m[0][2] * v[2],
            self.m[1][0] * v[0] + self.m[1][1] * v[1] + self.m[1][2] * v[2],
            self.m[2][0] * v[0] + self.m[2][1] * v[1] + self.m[2][2] * v[2],
        ]
    }

    /// Quadratic form `vᵀ M v`.
    #[inline]
    pub fn quad_form(&self, v: &Vec3<T>) -> T {
        let mv = self.mul_vec(v);
        v[0] * mv[0] + v[1] * mv[1] + v[2] * mv[2]
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by cofactors; `None` if the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let m = &self.m;
        let mut inv = Self::zeros();
        inv.m[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        inv.m[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
        inv.m[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
        inv.m[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        inv.m[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
        inv.m[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
        inv.m[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        inv.m[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
        inv.m[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Some(inv.scale(T::one() / d))
    }

    /// Lower Cholesky factor of a symmetric positive-definite matrix.
    pub fn cholesky(&self) -> Option<Self> {
        let a = &self.m;
        let mut l = Self::zeros();
        for j in 0..3 {
            let mut d = a[j][j];
            for k in 0..j {
                d = d - l.m[j][k] * l.m[j][k];
            }
            if d <= T::zero() || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l.m[j][j] = djj;
            for i in (j + 1)..3 {
                let mut s = a[i][j];
                for k in 0..j {
                    s = s - l.m[i][k] * l.m[j][k];
                }
                l.m[i][j] = s / djj;
            }
        }
        Some(l)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..3).all(|i| (0..3).all(|j| (self.m[i][j] - self.m[j][i]).abs() <= tol))
    }

    /// Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Vec3<T> {
        let mut a = self.m;
        let eps = T::epsilon();
        for _sweep in 0..64 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
            if off <= eps * eps * diag || off == T::zero() {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (lit::<T>(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
        let mut ev = [a[0][0], a[1][1], a[2][2]];
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.m[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.m[i][j]
    }
}

#[inline]
pub fn dot3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
