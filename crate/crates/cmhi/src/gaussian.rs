//! Multivariate Gaussian N(mean, precision_scale^-1 * cov) built on the
//! cached Cholesky factor.
//!
//! Densities stay in log space throughout; nothing exponentiates until the
//! final acceptance comparison in the sampler.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::LN_2PI;
use crate::spd::SpdMatrix;
use crate::stream::Stream;

/// Gaussian proposal/prior specification: mean, shape matrix C, and the
/// scalar precision multiplier alpha, for covariance alpha^-1 C.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    cov: SpdMatrix,
    precision_scale: f64,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix, precision_scale: f64) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        assert!(
            precision_scale > 0.0 && precision_scale.is_finite(),
            "precision_scale must be positive and finite"
        );
        Ok(Self { mean, cov, precision_scale })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(DVector::zeros(d), SpdMatrix::identity(d), 1.0).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn precision_scale(&self) -> f64 {
        self.precision_scale
    }

    /// log q at the mean: -(d/2) log(2 pi) - (1/2) log det(alpha^-1 C).
    pub fn logpdf_at_mean(&self) -> f64 {
        let d = self.dim() as f64;
        -0.5 * d * LN_2PI - 0.5 * (self.cov.log_det() - d * self.precision_scale.ln())
    }

    /// Full log-density including the normalizer.
    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let quad = self.precision_scale * self.cov.inv_quad(&(x - &self.mean));
        Ok(self.logpdf_at_mean() - 0.5 * quad)
    }

    /// One draw: mean + alpha^-1/2 L z, consuming exactly `dim` standard
    /// normals from the stream in index order.
    pub fn sample(&self, rng: &mut Stream) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.mean + self.cov.factor_mul(&z) / self.precision_scale.sqrt()
    }
}
