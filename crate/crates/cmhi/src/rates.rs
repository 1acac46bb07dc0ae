//! Convergence-rate certificates for the centered independence sampler.
//!
//! For a centered proposal passing the dominance check, the chain started at
//! the mode satisfies the exact identity
//!
//! ```text
//! W_rho(P^t(beta*, .), Pi) = (1 - eps)^t * E_Pi[rho(theta, beta*)],
//! eps = q(beta*) / pi(beta*),
//! ```
//!
//! the same rate in every Wasserstein metric including total variation. This
//! module estimates eps two independent ways (Monte Carlo importance ratio
//! and direct quadrature of the normalizer), evaluates the generic
//! Metropolis-Hastings lower bound, the finite-sample GLM bound
//! exp(-a_{d,n}), and the high-dimensional limiting curve driven by
//! a_0 = r_0 (1 + sqrt(gamma))^2 sigma^2 s_0 / (2 alpha).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;

use crate::eig::lambda_max_gram;
use crate::error::{Error, Result};
use crate::kernel::{McEstimate, MhKernel, mc_mean_stderr};
use crate::optimize::{DominanceReport, ModeResult};
use crate::quad::trapezoid;
use crate::spd::SpdMatrix;
use crate::stream::{Stream, substream};
use crate::targets::{Dataset, ModelKind};

/// Rayleigh-quotient tolerance for the power iteration.
pub const POWER_TOL: f64 = 1e-10;

/// Iteration cap before `PowerIterationStalled`.
pub const POWER_MAX_ITER: usize = 100_000;

/// Relative drift allowed when the quadrature grid is doubled.
const GRID_SELF_CHECK_TOL: f64 = 1e-6;

/// Distance used inside the Wasserstein integrals. `Tv` is the discrete
/// metric, under which the Wasserstein distance is total variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
    Linf,
    Tv,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Linf => "linf",
            Metric::Tv => "tv",
        }
    }

    /// rho(a, b); the discrete metric is the exact-inequality indicator.
    pub fn distance(self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => (a - b).norm(),
            Metric::Linf => (a - b).amax(),
            Metric::Tv => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Tightest standard c with ||.|| >= c ||.||_1 for the norm metrics.
    fn norm_equivalence(self, d: usize) -> f64 {
        match self {
            Metric::L1 => 1.0,
            Metric::L2 => 1.0 / (d as f64).sqrt(),
            Metric::Linf => 1.0 / d as f64,
            Metric::Tv => unreachable!("the lower bound is norm-only"),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            "linf" => Ok(Metric::Linf),
            "tv" => Ok(Metric::Tv),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// How an epsilon figure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsMethod {
    Mc,
    Quadrature,
    GlmBound,
}

impl EpsMethod {
    pub fn name(self) -> &'static str {
        match self {
            EpsMethod::Mc => "mc",
            EpsMethod::Quadrature => "quadrature",
            EpsMethod::GlmBound => "glm_bound",
        }
    }
}

/// Monte Carlo estimate of eps = q(beta*)/pi(beta*) as the mean over
/// proposal draws of w~(theta')/w~(beta*), w~ = pi~/q; the unknown
/// normalizer cancels. Requires a dominance certificate: without it the
/// exact-rate identity is void and certification refuses to proceed.
pub fn estimate_epsilon_mc(
    kernel: &MhKernel,
    dominance: &DominanceReport,
    m: usize,
    rng: &mut Stream,
) -> Result<McEstimate> {
    assert!(m >= 1_000, "importance estimate needs m >= 1000");
    if !dominance.pass {
        return Err(Error::DominanceNotVerified(dominance.max_violation));
    }
    let spec = kernel
        .independence_spec()
        .ok_or(Error::NotIndependenceKernel)?;
    let beta_star = spec.mean();
    let log_w_star =
        -kernel.target().neg_log_post(beta_star)? - spec.logpdf(beta_star)?;
    let values: Vec<f64> = (0..m)
        .map(|_| {
            let theta = spec.sample(rng);
            let log_w = -kernel
                .target()
                .neg_log_post(&theta)
                .expect("dims fixed at construction")
                - spec.logpdf(&theta).expect("dims fixed at construction");
            (log_w - log_w_star).exp()
        })
        .collect();
    Ok(mc_mean_stderr(&values))
}

/// Quadrature oracle for eps in d <= 2:
/// eps = q(beta*) * integral of exp(f(beta*) - f(theta)) over the box
/// [beta* - h, beta* + h]^d. The result must be stable under grid doubling
/// to 1e-6 relative or `GridTooCoarse` is returned.
pub fn epsilon_quadrature(
    kernel: &MhKernel,
    grid_half_width: f64,
    grid_points: usize,
) -> Result<f64> {
    let spec = kernel
        .independence_spec()
        .ok_or(Error::NotIndependenceKernel)?;
    let d = kernel.dim();
    if d > 2 {
        return Err(Error::DimensionTooLarge(d));
    }
    let beta_star = spec.mean().clone();
    let f_star = kernel.target().neg_log_post(&beta_star)?;
    let shifted_mass = |points: usize| -> Result<f64> {
        trapezoid(&beta_star, grid_half_width, points, |theta| {
            let f = kernel
                .target()
                .neg_log_post(theta)
                .expect("dims fixed at construction");
            (f_star - f).exp()
        })
    };
    let coarse = shifted_mass(grid_points)?;
    let fine = shifted_mass(2 * grid_points)?;
    let rel = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if rel > GRID_SELF_CHECK_TOL {
        return Err(Error::GridTooCoarse { rel });
    }
    Ok((spec.logpdf_at_mean() + fine.ln()).exp())
}

/// sup of the normalized target density over the quadrature box, for
/// checking a caller-supplied bound M >= sup pi in d <= 2. Since f is
/// minimized at the mode, this is exp(-f*)/Z = 1/integral of e^{-(f - f*)}.
pub fn sup_density_quadrature(
    kernel: &MhKernel,
    mode: &ModeResult,
    grid_half_width: f64,
    grid_points: usize,
) -> Result<f64> {
    let d = kernel.dim();
    if d > 2 {
        return Err(Error::DimensionTooLarge(d));
    }
    let mass = trapezoid(&mode.beta_star, grid_half_width, grid_points, |theta| {
        let f = kernel
            .target()
            .neg_log_post(theta)
            .expect("dims fixed at construction");
        (mode.f_star - f).exp()
    })?;
    Ok(1.0 / mass)
}

/// The finite-sample GLM rate bound.
#[derive(Debug, Clone, Copy)]
pub struct GlmBound {
    pub a_dn: f64,
    pub epsilon_lb: f64,
    pub lambda_max: f64,
}

/// Curvature constant for the binary-response families; the count families
/// have no universal r0 and the caller must supply one.
pub fn r0_for_kind(kind: ModelKind) -> Option<f64> {
    match kind {
        ModelKind::Logistic => Some(0.25),
        ModelKind::Probit => Some(1.0),
        _ => None,
    }
}

/// a_{d,n} = (r0 / 2 alpha) lambda_max(X^T X) tr(C), with
/// eps >= exp(-a_{d,n}) guaranteed for the matching model.
pub fn epsilon_lower_bound_glm(
    data: &Dataset,
    alpha: f64,
    c: &SpdMatrix,
    r0: f64,
) -> Result<GlmBound> {
    assert!(alpha > 0.0 && r0 > 0.0);
    let lambda_max = lambda_max_gram(data.x(), POWER_TOL, POWER_MAX_ITER)?;
    let a_dn = 0.5 * r0 / alpha * lambda_max * c.trace();
    Ok(GlmBound {
        a_dn,
        epsilon_lb: (-a_dn).exp(),
        lambda_max,
    })
}

/// (1 - eps)^t * mean_rho for t = 0..=t_max.
pub fn exact_rate_series(epsilon: f64, mean_rho: f64, t_max: u32) -> Vec<f64> {
    assert!(epsilon > 0.0 && epsilon <= 1.0, "epsilon must be in (0, 1]");
    assert!(mean_rho >= 0.0);
    (0..=t_max)
        .map(|t| (1.0 - epsilon).powi(t as i32) * mean_rho)
        .collect()
}

/// How to estimate the t = 0 Wasserstein distance E_Pi[rho(theta, beta*)].
#[derive(Debug, Clone, Copy)]
pub enum RhoMethod {
    /// Direct quadrature of both integrals, d <= 2.
    Quadrature { half_width: f64, points: usize },
    /// Time average over `replicas` independent chains of length `t`; valid
    /// because the dominated kernel is uniformly ergodic.
    LongChain { t: u64, replicas: u64 },
}

/// E_Pi[rho(theta, beta*)]. Exactly one for the discrete metric (Pi is
/// atomless), quadrature or ergodic chain averages otherwise.
pub fn mean_rho(
    kernel: &MhKernel,
    mode: &ModeResult,
    metric: Metric,
    method: RhoMethod,
    dominance: &DominanceReport,
    seed: u64,
) -> Result<McEstimate> {
    if metric == Metric::Tv {
        return Ok(McEstimate {
            mean: 1.0,
            stderr: 0.0,
        });
    }
    match method {
        RhoMethod::Quadrature { half_width, points } => {
            let d = kernel.dim();
            if d > 2 {
                return Err(Error::DimensionTooLarge(d));
            }
            let f_star = mode.f_star;
            let shifted = |theta: &DVector<f64>| {
                let f = kernel
                    .target()
                    .neg_log_post(theta)
                    .expect("dims fixed at construction");
                (f_star - f).exp()
            };
            let weighted = trapezoid(&mode.beta_star, half_width, points, |theta| {
                metric.distance(theta, &mode.beta_star) * shifted(theta)
            })?;
            let mass = trapezoid(&mode.beta_star, half_width, points, &shifted)?;
            Ok(McEstimate {
                mean: weighted / mass,
                stderr: 0.0,
            })
        }
        RhoMethod::LongChain { t, replicas } => {
            if !dominance.pass {
                return Err(Error::DominanceNotVerified(dominance.max_violation));
            }
            assert!(t >= 1 && replicas >= 2);
            use rayon::prelude::*;
            let means: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|k| {
                    let mut rng = substream(seed, k);
                    let mut state = kernel
                        .init_state(mode.beta_star.clone())
                        .expect("mode has the kernel dimension");
                    let mut acc = 0.0;
                    for _ in 0..t {
                        kernel.step(&mut state, &mut rng);
                        acc += metric.distance(&state.position, &mode.beta_star);
                    }
                    acc / t as f64
                })
                .collect();
            Ok(mc_mean_stderr(&means))
        }
    }
}

/// Generic Metropolis-Hastings Wasserstein lower bound
/// C0 (1 - A(theta))^{t (1 + 1/d)} with
/// C0 = c_norm (1 - 1/(1+d)) / (2 M^{1/d} (1+d)^{1/d}), valid whenever the
/// target density is bounded by M.
pub fn wasserstein_lower_bound(
    m_density_bound: f64,
    d: usize,
    a_theta: f64,
    t: u32,
    norm: Metric,
) -> Result<f64> {
    if !(m_density_bound > 0.0) {
        return Err(Error::InvalidBound(m_density_bound));
    }
    assert!(norm != Metric::Tv, "the lower bound applies to norm metrics");
    assert!((0.0..=1.0).contains(&a_theta));
    assert!(d >= 1);
    let df = d as f64;
    let c0 = norm.norm_equivalence(d) * (1.0 - 1.0 / (1.0 + df))
        / (2.0 * m_density_bound.powf(1.0 / df) * (1.0 + df).powf(1.0 / df));
    if a_theta == 1.0 && t >= 1 {
        return Ok(0.0);
    }
    Ok(c0 * (1.0 - a_theta).powf(t as f64 * (1.0 + 1.0 / df)))
}

/// The limiting d/n -> gamma curve.
#[derive(Debug, Clone)]
pub struct AsymptoticCurve {
    pub a0: f64,
    /// 1 - exp(-a0), the limiting per-step contraction factor.
    pub rate: f64,
    /// rate^t for t = 0..=t_max.
    pub series: Vec<f64>,
}

/// a_0 = r_0 (1 + sqrt(gamma))^2 sigma^2 s_0 / (2 alpha) and the bound
/// series (1 - exp(-a_0))^t.
pub fn asymptotic_curve(
    gamma: f64,
    sigma2: f64,
    s0: f64,
    alpha: f64,
    r0: f64,
    t_max: u32,
) -> AsymptoticCurve {
    assert!(
        gamma > 0.0 && sigma2 > 0.0 && s0 > 0.0 && alpha > 0.0 && r0 > 0.0,
        "all curve parameters must be positive"
    );
    let a0 = r0 * (1.0 + gamma.sqrt()).powi(2) * sigma2 * s0 / (2.0 * alpha);
    let rate = 1.0 - (-a0).exp();
    let series = (0..=t_max).map(|t| rate.powi(t as i32)).collect();
    AsymptoticCurve { a0, rate, series }
}

/// One row of the rate-series table.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRow {
    pub t: u32,
    pub exact_w: Option<f64>,
    pub lower_bound: Option<f64>,
    pub asymptotic_bound: Option<f64>,
}

/// A certified rate: the epsilon estimate, the t = 0 Wasserstein distance,
/// and the per-iteration series.
#[derive(Debug, Clone)]
pub struct RateCertificate {
    pub epsilon: f64,
    pub epsilon_stderr: f64,
    pub method: EpsMethod,
    pub metric: Metric,
    pub mean_rho: f64,
    pub mean_rho_stderr: f64,
    pub series: Vec<SeriesRow>,
}

impl RateCertificate {
    /// Assemble a certificate. For the discrete metric the t = 0 distance is
    /// forced to 1 (Pi is atomless, so TV(delta, Pi) = 1). The optional
    /// density bound M adds the generic lower-bound column using
    /// A(beta*) = epsilon.
    pub fn assemble(
        epsilon: McEstimate,
        method: EpsMethod,
        metric: Metric,
        rho: McEstimate,
        t_max: u32,
        density_bound: Option<(f64, usize)>,
    ) -> Result<Self> {
        let (rho_mean, rho_stderr) = if metric == Metric::Tv {
            (1.0, 0.0)
        } else {
            (rho.mean, rho.stderr)
        };
        let eps = epsilon.mean.clamp(f64::MIN_POSITIVE, 1.0);
        let exact = exact_rate_series(eps, rho_mean, t_max);
        let mut series = Vec::with_capacity(exact.len());
        for (t, w) in exact.iter().enumerate() {
            let lower_bound = match (density_bound, metric) {
                (Some(_), Metric::Tv) => None,
                (Some((m, d)), norm) => {
                    Some(wasserstein_lower_bound(m, d, eps, t as u32, norm)?)
                }
                (None, _) => None,
            };
            series.push(SeriesRow {
                t: t as u32,
                exact_w: Some(*w),
                lower_bound,
                asymptotic_bound: None,
            });
        }
        Ok(RateCertificate {
            epsilon: epsilon.mean,
            epsilon_stderr: epsilon.stderr,
            method,
            metric,
            mean_rho: rho_mean,
            mean_rho_stderr: rho_stderr,
            series,
        })
    }
}

/// `t,exact_w,lower_bound,asymptotic_bound` with empty fields where a column
/// does not apply.
pub fn write_series_csv<W: Write>(rows: &[SeriesRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,exact_w,lower_bound,asymptotic_bound")?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.t,
            cell(row.exact_w),
            cell(row.lower_bound),
            cell(row.asymptotic_bound)
        )?;
    }
    Ok(())
}
