//! Synthetic GLM data under the proportional high-dimensional scaling:
//! design rows X_i ~ N(0, sigma^2 n^-1 I_d), coefficients drawn from the
//! N(0, alpha^-1 C) prior, responses from the model's conditional law.
//!
//! One dataset consumes a single stream in a fixed order (X, then beta, then
//! Y row by row), so a `GenConfig` with its seed reproduces the CSV byte for
//! byte.

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::math::{norm_cdf, sigmoid};
use crate::spd::SpdMatrix;
use crate::stream::{Stream, root_stream};
use crate::targets::{Dataset, ModelKind};

/// Prior covariance shape.
#[derive(Debug, Clone)]
pub enum CovSpec {
    Identity,
    /// (s0/d) I, so tr(C) = s0 for every dimension.
    ScaledIdentity { s0: f64 },
    Diagonal(Vec<f64>),
    /// Dense matrix from a headerless CSV with d rows of d entries.
    File(PathBuf),
}

impl CovSpec {
    pub fn build(&self, d: usize) -> Result<SpdMatrix> {
        match self {
            CovSpec::Identity => Ok(SpdMatrix::identity(d)),
            CovSpec::ScaledIdentity { s0 } => SpdMatrix::scaled_identity(d, s0 / d as f64),
            CovSpec::Diagonal(entries) => {
                if entries.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: entries.len(),
                    });
                }
                SpdMatrix::diagonal(entries)
            }
            CovSpec::File(path) => {
                let m = read_matrix_csv(path)?;
                if m.nrows() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: m.nrows(),
                    });
                }
                SpdMatrix::from_entries(m)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CovSpec::Identity => "identity".into(),
            CovSpec::ScaledIdentity { s0 } => format!("scaled_identity({s0})"),
            CovSpec::Diagonal(entries) => {
                let joined: Vec<String> = entries.iter().map(|v| format!("{v}")).collect();
                format!("diagonal({})", joined.join(";"))
            }
            CovSpec::File(path) => format!("file({})", path.display()),
        }
    }
}

/// Square dense matrix from a headerless CSV.
pub fn read_matrix_csv(path: &std::path::Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "matrix file must be square".into(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Everything needed to regenerate one dataset.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub kind: ModelKind,
    pub n: usize,
    pub d: usize,
    pub sigma2: f64,
    pub alpha: f64,
    pub cov: CovSpec,
    pub nb_xi: Option<f64>,
    pub seed: u64,
}

impl GenConfig {
    /// Flat key=value echo written next to the dataset for provenance.
    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model={}", self.kind);
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "d={}", self.d);
        let _ = writeln!(s, "sigma2={}", self.sigma2);
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "cov={}", self.cov.describe());
        if let Some(xi) = self.nb_xi {
            let _ = writeln!(s, "nb_xi={xi}");
        }
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}

/// n x d design with i.i.d. N(0, sigma^2/n) entries, filled row-major.
pub fn gen_design(n: usize, d: usize, sigma2: f64, rng: &mut Stream) -> DMatrix<f64> {
    assert!(n >= 1 && d >= 1 && sigma2 > 0.0);
    let sd = (sigma2 / n as f64).sqrt();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    x
}

/// One coefficient draw from the N(0, alpha^-1 C) prior.
pub fn draw_beta_prior(alpha: f64, cov: &SpdMatrix, rng: &mut Stream) -> DVector<f64> {
    GaussianSpec::new(DVector::zeros(cov.dim()), cov.clone(), alpha)
        .expect("zero mean always matches")
        .sample(rng)
}

/// Poisson by CDF inversion below mean 10, transformed rejection above.
pub fn sample_poisson(lambda: f64, rng: &mut Stream) -> f64 {
    assert!(lambda.is_finite() && lambda >= 0.0);
    if lambda == 0.0 {
        return 0.0;
    }
    if lambda <= 10.0 {
        let u: f64 = rng.random();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && k < 1000 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k as f64
    } else {
        poisson_ptrs(lambda, rng)
    }
}

/// Hormann's PTRS transformed-rejection sampler, exact for lambda >= 10.
fn poisson_ptrs(lambda: f64, rng: &mut Stream) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let b = 0.931 + 2.53 * lambda.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_lambda = lambda.ln();
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if (v * inv_alpha / (a / (us * us) + b)).ln()
            <= k * ln_lambda - lambda - ln_gamma(k + 1.0)
        {
            return k;
        }
    }
}

/// Responses for one design under the model's conditional law.
pub fn gen_response(
    kind: ModelKind,
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    nb_xi: Option<f64>,
    rng: &mut Stream,
) -> Result<DVector<f64>> {
    assert_eq!(x.ncols(), beta.len(), "design/coefficient dims disagree");
    let u = x * beta;
    let mut y = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        y[i] = match kind {
            ModelKind::Logistic => f64::from(rng.random::<f64>() < sigmoid(u[i])),
            ModelKind::Probit => f64::from(rng.random::<f64>() < norm_cdf(u[i])),
            ModelKind::Poisson => sample_poisson(u[i].exp(), rng),
            ModelKind::NegBinom => {
                // Gamma-Poisson mixture: lambda ~ Gamma(xi, scale e^u)
                let xi = nb_xi.expect("negbinom requires nb_xi");
                let gamma = Gamma::new(xi, u[i].exp()).expect("positive parameters");
                sample_poisson(gamma.sample(rng), rng)
            }
            other => return Err(Error::UnknownKind(other.name())),
        };
    }
    Ok(y)
}

/// Generate a full dataset: design, prior coefficient draw, responses, in
/// that stream order. Returns the dataset, the coefficient used, and the
/// prior covariance.
pub fn generate(cfg: &GenConfig) -> Result<(Dataset, DVector<f64>, SpdMatrix)> {
    let mut rng = root_stream(cfg.seed);
    let x = gen_design(cfg.n, cfg.d, cfg.sigma2, &mut rng);
    let cov = cfg.cov.build(cfg.d)?;
    let beta = draw_beta_prior(cfg.alpha, &cov, &mut rng);
    let y = gen_response(cfg.kind, &x, &beta, cfg.nb_xi, &mut rng)?;
    Ok((Dataset::new(x, y)?, beta, cov))
}
