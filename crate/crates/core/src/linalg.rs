//! Closed-form 2×2 helpers for the bivariate hot loops.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

/// Lower Cholesky factor of a 2×2 positive-semidefinite matrix. Zero
/// variances are tolerated (the corresponding column is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chol2 {
    pub l00: f64,
    pub l10: f64,
    pub l11: f64,
}

impl Chol2 {
    /// Returns `None` when the matrix has a negative pivot beyond rounding.
    pub fn new(m: &Matrix2<f64>) -> Option<Self> {
        let a = m[(0, 0)];
        let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        let c = m[(1, 1)];
        let tol = 1e-12 * (a.abs() + c.abs()).max(1e-300);
        if a < -tol {
            return None;
        }
        let l00 = a.max(0.0).sqrt();
        let l10 = if l00 > 0.0 { b / l00 } else { 0.0 };
        if l00 == 0.0 && b.abs() > tol {
            return None;
        }
        let d = c - l10 * l10;
        if d < -tol {
            return None;
        }
        Some(Self {
            l00,
            l10,
            l11: d.max(0.0).sqrt(),
        })
    }

    #[inline]
    pub fn apply(&self, z: [f64; 2]) -> Vector2<f64> {
        Vector2::new(self.l00 * z[0], self.l10 * z[0] + self.l11 * z[1])
    }

    /// `mean + L z` with `z` standard normal.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, mean: &Vector2<f64>, rng: &mut R) -> Vector2<f64> {
        let z = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        mean + self.apply(z)
    }
}

/// True when a symmetric 2×2 matrix is strictly positive-definite.
#[inline]
pub fn is_pd2(m: &Matrix2<f64>) -> bool {
    m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0 && m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] > 0.0 && m.iter().all(|v| v.is_finite())
}

/// Symmetrise in place.
#[inline]
pub fn sym2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

/// Outer product `v vᵀ`.
#[inline]
pub fn outer2(v: &Vector2<f64>) -> Matrix2<f64> {
    Matrix2::new(v[0] * v[0], v[0] * v[1], v[0] * v[1], v[1] * v[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chol_reproduces_matrix() {
        let m = Matrix2::new(4.0, 1.2, 1.2, 2.0);
        let c = Chol2::new(&m).unwrap();
        let l = Matrix2::new(c.l00, 0.0, c.l10, c.l11);
        assert!((l * l.transpose() - m).norm() < 1e-14);
    }

    #[test]
    fn chol_handles_singular_psd() {
        let c = Chol2::new(&Matrix2::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(c.l11, 0.0);
        let z = Chol2::new(&Matrix2::zeros()).unwrap();
        assert_eq!(z.apply([1.0, 1.0]), Vector2::zeros());
        assert!(Chol2::new(&Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_none());
        assert!(Chol2::new(&Matrix2::new(0.0, 1.0, 1.0, 1.0)).is_none());
    }
}
