//! Tensor-product trapezoid quadrature on a symmetric box, for the d <= 2
//! oracles. Simple and auditable; the desk-scale targets it verifies are
//! smooth and light-tailed, so trapezoid converges fast.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Integrate `f` over the box [center - h, center + h]^d with `points` nodes
/// per axis, d = 1 or 2.
pub(crate) fn trapezoid<F>(
    center: &DVector<f64>,
    half_width: f64,
    points: usize,
    mut f: F,
) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let d = center.len();
    if d > 2 {
        return Err(Error::DimensionTooLarge(d));
    }
    assert!(points >= 2, "need at least two nodes per axis");
    assert!(half_width > 0.0);
    let h = 2.0 * half_width / (points - 1) as f64;
    let node = |i: usize, j: usize| center[j] - half_width + i as f64 * h;
    let weight = |i: usize| if i == 0 || i == points - 1 { 0.5 } else { 1.0 };

    let mut total = 0.0;
    match d {
        1 => {
            let mut x = DVector::zeros(1);
            for i in 0..points {
                x[0] = node(i, 0);
                total += weight(i) * f(&x);
            }
            Ok(total * h)
        }
        _ => {
            let mut x = DVector::zeros(2);
            for i in 0..points {
                x[0] = node(i, 0);
                let wi = weight(i);
                for j in 0..points {
                    x[1] = node(j, 1);
                    total += wi * weight(j) * f(&x);
                }
            }
            Ok(total * h * h)
        }
    }
}
