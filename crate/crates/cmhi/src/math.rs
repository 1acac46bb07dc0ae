//! Numerically stable scalar kernels shared by the likelihood and density code.

/// -log(sqrt(2*pi))
pub const NEG_HALF_LN_2PI: f64 = -0.918_938_533_204_672_7;

/// ln(2*pi)
pub const LN_2PI: f64 = 1.837_877_066_409_345_4;

/// log(1 + exp(u)) without overflow: max(u, 0) + log1p(exp(-|u|)).
#[inline]
pub fn log1pexp(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Logistic sigmoid (1 + exp(-u))^-1, computed on the non-overflowing branch.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Standard normal log-density.
#[inline]
pub fn norm_logpdf(u: f64) -> f64 {
    NEG_HALF_LN_2PI - 0.5 * u * u
}

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn norm_cdf(u: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-u / std::f64::consts::SQRT_2)
}

/// log Phi(u), stable over the whole real line.
///
/// For u >= -8 the erfc path is exact enough (erfc(-u/sqrt 2) >= ~6e-16, no
/// underflow). Below that, erfc itself survives but its leading digits carry
/// all the cancellation, so we switch to the Mills-ratio expansion
/// Phi(-t) = phi(t)/t * sum_k (-1)^k (2k-1)!!/t^{2k}, truncated at the
/// smallest term (~1e-15 relative at t = 8, smaller further out).
pub fn norm_log_cdf(u: f64) -> f64 {
    if u >= -8.0 {
        (0.5 * statrs::function::erf::erfc(-u / std::f64::consts::SQRT_2)).ln()
    } else {
        let t = -u;
        norm_logpdf(t) - t.ln() + mills_series(t).ln()
    }
}

/// phi(u)/Phi(u), the inverse Mills ratio. Tends to -u as u -> -inf.
#[inline]
pub fn norm_hazard(u: f64) -> f64 {
    if u < -8.0 {
        -u / mills_series(-u)
    } else {
        (norm_logpdf(u) - norm_log_cdf(u)).exp()
    }
}

/// sum_k (-1)^k (2k-1)!!/t^{2k} with optimal truncation; valid for t >= 8.
fn mills_series(t: f64) -> f64 {
    let inv_t2 = 1.0 / (t * t);
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    for k in 0..60u32 {
        let next = -term * (2 * k + 1) as f64 * inv_t2;
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            break;
        }
        sum += next;
        term = next;
    }
    sum
}
