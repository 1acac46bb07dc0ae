//! Symmetric positive-definite matrices with a cached Cholesky factor.
//!
//! The factor is computed once at construction and reused by every density
//! evaluation and sample afterwards, so the O(d^3) cost is paid a single time
//! per covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on |M - M^T| at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Absolute floor on Cholesky pivots; anything at or below is rejected as
/// numerically indefinite.
pub const PIVOT_FLOOR: f64 = 1e-14;

/// A symmetric positive-definite matrix together with its lower-triangular
/// Cholesky factor L, M = L L^T.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl SpdMatrix {
    /// Factor a square symmetric matrix. Rejects asymmetric input
    /// (`NotSymmetric`) and pivots at or below [`PIVOT_FLOOR`] (`NotSpd`).
    pub fn from_entries(m: DMatrix<f64>) -> Result<Self> {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        let d = m.nrows();
        assert!(d >= 1, "matrix must be at least 1x1");

        let scale = m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs())).max(1.0);
        let max_asym = (0..d)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .fold(0.0f64, |acc, (i, j)| acc.max((m[(i, j)] - m[(j, i)]).abs()));
        if max_asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric {
                max_asym: max_asym / scale,
                tol: SYMMETRY_TOL,
            });
        }

        // Left-looking Cholesky on the symmetrized entries.
        let mut l = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut pivot = m[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > PIVOT_FLOOR) {
                return Err(Error::NotSpd { index: j, pivot });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..d {
                let mut s = 0.5 * (m[(i, j)] + m[(j, i)]);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { entries: m, factor: l })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: DMatrix::identity(d, d),
            factor: DMatrix::identity(d, d),
        }
    }

    /// Diagonal SPD matrix from strictly positive entries.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_entries(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    /// Scalar multiple of the identity.
    pub fn scaled_identity(d: usize, scale: f64) -> Result<Self> {
        Self::diagonal(&vec![scale; d])
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// log det M = 2 sum_j log L_jj.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|j| self.factor[(j, j)].ln()).sum::<f64>()
    }

    /// L v.
    pub fn factor_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.factor * v
    }

    /// L^-1 v by forward substitution.
    pub fn forward_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let mut y = v.clone();
        for i in 0..d {
            for k in 0..i {
                let t = self.factor[(i, k)] * y[k];
                y[i] -= t;
            }
            y[i] /= self.factor[(i, i)];
        }
        y
    }

    /// M^-1 v via the two triangular solves.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let mut y = self.forward_solve(v);
        for i in (0..d).rev() {
            for k in (i + 1)..d {
                let t = self.factor[(k, i)] * y[k];
                y[i] -= t;
            }
            y[i] /= self.factor[(i, i)];
        }
        y
    }

    /// v^T M^-1 v = ||L^-1 v||^2.
    pub fn inv_quad(&self, v: &DVector<f64>) -> f64 {
        self.forward_solve(v).norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_factors_to_identity() {
        let m = SpdMatrix::identity(3);
        assert_eq!(m.factor(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal_square_roots() {
        let m = SpdMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]))
            .unwrap();
        assert_eq!(m.factor()[(0, 0)], 2.0);
        assert_eq!(m.factor()[(1, 1)], 3.0);
        assert_eq!(m.factor()[(1, 0)], 0.0);
    }

    #[test]
    fn two_by_two_roundtrip_and_logdet() {
        let m = SpdMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]))
            .unwrap();
        let rec = m.factor() * m.factor().transpose();
        assert!((rec - m.entries()).norm() < 1e-12);
        // det [[2,1],[1,2]] = 3
        assert_relative_eq!(m.log_det(), 1.0986122886681097, max_relative = 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let r = SpdMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]));
        assert!(matches!(r, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn rejects_indefinite() {
        let r = SpdMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(r, Err(Error::NotSpd { index: 1, .. })));
        let r = SpdMatrix::from_entries(DMatrix::from_row_slice(1, 1, &[0.0]));
        assert!(matches!(r, Err(Error::NotSpd { index: 0, .. })));
    }

    #[test]
    fn factor_diagonal_strictly_positive() {
        let m = SpdMatrix::from_entries(DMatrix::from_row_slice(
            3,
            3,
            &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0],
        ))
        .unwrap();
        for j in 0..3 {
            assert!(m.factor()[(j, j)] > 0.0);
        }
    }

    proptest! {
        // solve(factor, factor * v) recovers v, and L L^T reconstructs the input.
        #[test]
        fn solve_roundtrip(
            dim in 1usize..6,
            raw in proptest::collection::vec(-1.0f64..1.0, 36),
            vraw in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let b = DMatrix::from_fn(dim, dim, |i, j| raw[i * 6 + j]);
            let m = SpdMatrix::from_entries(
                &b * b.transpose() + DMatrix::identity(dim, dim) * 0.5,
            ).unwrap();
            let v = DVector::from_fn(dim, |i, _| vraw[i]);

            let lv = m.factor_mul(&v);
            let back = m.forward_solve(&lv);
            prop_assert!((back - &v).amax() < 1e-10);

            let mv = m.entries() * &v;
            let inv = m.solve(&mv);
            prop_assert!((inv - &v).amax() < 1e-8);

            let rec = m.factor() * m.factor().transpose();
            let rel = (rec - m.entries()).norm() / m.entries().norm();
            prop_assert!(rel < 1e-10);
        }
    }
}
