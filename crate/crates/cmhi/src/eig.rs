//! Largest eigenvalue of X^T X by power iteration with a Rayleigh-quotient
//! stopping rule.
//!
//! The Gram matrix is formed once when X is small enough to make that cheap
//! (n*d <= 1e6 entries); above that the iteration multiplies by X and X^T
//! separately so memory stays O(n*d).

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const FORM_GRAM_LIMIT: usize = 1_000_000;

/// lambda_max(X^T X). Stops when consecutive Rayleigh quotients agree to
/// `tol` (relative above 1); errors with `PowerIterationStalled` past
/// `max_iter` iterations.
pub(crate) fn lambda_max_gram(x: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    use rand::Rng;
    let d = x.ncols();
    let gram = (x.nrows() * d <= FORM_GRAM_LIMIT).then(|| x.transpose() * x);
    let apply = |v: &DVector<f64>| -> DVector<f64> {
        match &gram {
            Some(g) => g * v,
            None => x.transpose() * (x * v),
        }
    };

    // fixed-seed start vector: deterministic, and almost surely not
    // orthogonal to the leading eigenspace
    let mut seed_rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
    let mut v = DVector::from_fn(d, |_, _| seed_rng.sample::<f64, _>(StandardNormal));
    v /= v.norm();

    let mut lambda_prev = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let w = apply(&v);
        let lambda = v.dot(&w);
        let wnorm = w.norm();
        if wnorm == 0.0 {
            return Ok(0.0);
        }
        if (lambda - lambda_prev).abs() <= tol * lambda.abs().max(1.0) {
            return Ok(lambda);
        }
        lambda_prev = lambda;
        v = w / wnorm;
    }
    Err(Error::PowerIterationStalled(max_iter))
}
