//! Target posteriors: unnormalized negative log-densities f, gradients, and
//! curvature probes.
//!
//! Four GLM families (logistic, probit, Poisson, negative-binomial) with a
//! Gaussian N(0, alpha^-1 C) prior, plus two synthetic targets used by the
//! rate machinery: a centered Gaussian, and the two-dimensional
//! exp[-(x^2 + x^2 z^2 + z^2)] random-walk counterexample.
//!
//! Additive constants that do not depend on beta (log y!, binomial terms) are
//! dropped from every likelihood; all downstream rate estimates are built
//! from constant-free ratios, so they never surface.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::{log1pexp, norm_hazard, norm_log_cdf, sigmoid};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    GaussianSynthetic,
    RwmExample,
    Logistic,
    Probit,
    Poisson,
    NegBinom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GaussianSynthetic => "gaussian-synthetic",
            ModelKind::RwmExample => "rwm-example",
            ModelKind::Logistic => "logistic",
            ModelKind::Probit => "probit",
            ModelKind::Poisson => "poisson",
            ModelKind::NegBinom => "negbinom",
        }
    }

    pub fn is_glm(self) -> bool {
        matches!(
            self,
            ModelKind::Logistic | ModelKind::Probit | ModelKind::Poisson | ModelKind::NegBinom
        )
    }

    fn is_binary(self) -> bool {
        matches!(self, ModelKind::Logistic | ModelKind::Probit)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian-synthetic" => Ok(ModelKind::GaussianSynthetic),
            "rwm-example" => Ok(ModelKind::RwmExample),
            "logistic" => Ok(ModelKind::Logistic),
            "probit" => Ok(ModelKind::Probit),
            "poisson" => Ok(ModelKind::Poisson),
            "negbinom" => Ok(ModelKind::NegBinom),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Design matrix X (n x d) and integer-valued responses Y.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// `n = 0` is permitted and means "prior only" (the likelihood is
    /// identically zero); `d` must still be at least 1.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        assert!(x.ncols() >= 1, "design must have at least one feature");
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Strict CSV reader for the `y,x1,...,xd` format: a header row followed
    /// by one decimal row per observation; any row with the wrong column
    /// count or a non-numeric field is an error.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let header = header?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"y") {
            return Err(err(1, format!("expected header starting with `y`, got `{header}`")));
        }
        let d = cols.len() - 1;
        if d == 0 {
            return Err(err(1, "header has no feature columns".into()));
        }
        for (j, c) in cols.iter().enumerate().skip(1) {
            if *c != format!("x{j}") {
                return Err(err(1, format!("expected column `x{j}`, got `{c}`")));
            }
        }

        let mut ys = Vec::new();
        let mut xs = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let row = line.trim_end();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != d + 1 {
                return Err(err(
                    idx + 1,
                    format!("expected {} columns, got {}", d + 1, fields.len()),
                ));
            }
            let mut parsed = fields.iter().map(|f| {
                f.parse::<f64>()
                    .map_err(|e| err(idx + 1, format!("bad number `{f}`: {e}")))
            });
            ys.push(parsed.next().unwrap()?);
            for v in parsed {
                xs.push(v?);
            }
        }
        let n = ys.len();
        Dataset::new(DMatrix::from_row_iterator(n, d, xs), DVector::from_vec(ys))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "y")?;
        for j in 1..=self.d() {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.n() {
            write!(w, "{}", self.y[i])?;
            for j in 0..self.d() {
                write!(w, ",{}", self.x[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// A target distribution pi(beta) = Z^-1 exp(-f(beta)) together with the
/// prior parameters (alpha, C) that the centered proposal reuses.
#[derive(Debug, Clone)]
pub struct TargetModel {
    kind: ModelKind,
    data: Option<Dataset>,
    synth_cov: Option<SpdMatrix>,
    prior_alpha: f64,
    prior_cov: SpdMatrix,
    nb_xi: Option<f64>,
}

impl TargetModel {
    fn glm(
        kind: ModelKind,
        data: Dataset,
        alpha: f64,
        cov: SpdMatrix,
        xi: Option<f64>,
    ) -> Result<Self> {
        assert!(alpha > 0.0 && alpha.is_finite(), "prior_alpha must be positive");
        if data.d() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: data.d(),
            });
        }
        for i in 0..data.n() {
            let y = data.y()[i];
            let ok = if kind.is_binary() {
                y == 0.0 || y == 1.0
            } else {
                y >= 0.0 && y.fract() == 0.0 && y.is_finite()
            };
            if !ok {
                return Err(Error::InvalidResponse {
                    row: i,
                    value: y,
                    kind: kind.name(),
                });
            }
        }
        Ok(Self {
            kind,
            data: Some(data),
            synth_cov: None,
            prior_alpha: alpha,
            prior_cov: cov,
            nb_xi: xi,
        })
    }

    pub fn logistic(data: Dataset, alpha: f64, cov: SpdMatrix) -> Result<Self> {
        Self::glm(ModelKind::Logistic, data, alpha, cov, None)
    }

    pub fn probit(data: Dataset, alpha: f64, cov: SpdMatrix) -> Result<Self> {
        Self::glm(ModelKind::Probit, data, alpha, cov, None)
    }

    pub fn poisson(data: Dataset, alpha: f64, cov: SpdMatrix) -> Result<Self> {
        Self::glm(ModelKind::Poisson, data, alpha, cov, None)
    }

    pub fn negbinom(data: Dataset, alpha: f64, cov: SpdMatrix, xi: f64) -> Result<Self> {
        assert!(xi > 0.0 && xi.is_finite(), "nb_xi must be positive");
        Self::glm(ModelKind::NegBinom, data, alpha, cov, Some(xi))
    }

    /// Centered Gaussian target N(0, target_cov). The prior fields only feed
    /// the proposal construction; they do not enter the density.
    pub fn gaussian_synthetic(
        target_cov: SpdMatrix,
        prior_alpha: f64,
        prior_cov: SpdMatrix,
    ) -> Result<Self> {
        assert!(prior_alpha > 0.0 && prior_alpha.is_finite());
        if target_cov.dim() != prior_cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: target_cov.dim(),
                got: prior_cov.dim(),
            });
        }
        Ok(Self {
            kind: ModelKind::GaussianSynthetic,
            data: None,
            synth_cov: Some(target_cov),
            prior_alpha,
            prior_cov,
            nb_xi: None,
        })
    }

    /// The planar target exp[-(x^2 + x^2 z^2 + z^2)] on which random-walk
    /// Metropolis fails to be geometrically ergodic.
    pub fn rwm_example() -> Self {
        Self {
            kind: ModelKind::RwmExample,
            data: None,
            synth_cov: None,
            prior_alpha: 1.0,
            prior_cov: SpdMatrix::identity(2),
            nb_xi: None,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::RwmExample => 2,
            ModelKind::GaussianSynthetic => self.synth_cov.as_ref().unwrap().dim(),
            _ => self.data.as_ref().unwrap().d(),
        }
    }

    pub fn data(&self) -> Option<&Dataset> {
        self.data.as_ref()
    }

    pub fn prior_alpha(&self) -> f64 {
        self.prior_alpha
    }

    pub fn prior_cov(&self) -> &SpdMatrix {
        &self.prior_cov
    }

    pub fn nb_xi(&self) -> Option<f64> {
        self.nb_xi
    }

    fn check_dim(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.dim() {
            if self.kind == ModelKind::RwmExample {
                return Err(Error::RwmDimension(beta.len()));
            }
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: beta.len(),
            });
        }
        Ok(())
    }

    fn dataset(&self) -> Result<&Dataset> {
        self.data
            .as_ref()
            .ok_or(Error::ModelHasNoData(self.kind.name()))
    }

    /// Per-observation negative log-likelihood term at linear predictor `u`,
    /// up to beta-independent constants.
    fn nll_term(&self, u: f64, y: f64) -> f64 {
        match self.kind {
            ModelKind::Logistic => log1pexp(u) - y * u,
            ModelKind::Probit => {
                if y == 1.0 {
                    -norm_log_cdf(u)
                } else {
                    -norm_log_cdf(-u)
                }
            }
            ModelKind::Poisson => u.exp() - y * u,
            ModelKind::NegBinom => (y + self.nb_xi.unwrap()) * log1pexp(u) - y * u,
            _ => unreachable!("nll_term is GLM-only"),
        }
    }

    /// d/du of `nll_term`.
    fn nll_dterm(&self, u: f64, y: f64) -> f64 {
        match self.kind {
            ModelKind::Logistic => sigmoid(u) - y,
            ModelKind::Probit => {
                if y == 1.0 {
                    -norm_hazard(u)
                } else {
                    norm_hazard(-u)
                }
            }
            ModelKind::Poisson => u.exp() - y,
            ModelKind::NegBinom => (y + self.nb_xi.unwrap()) * sigmoid(u) - y,
            _ => unreachable!("nll_dterm is GLM-only"),
        }
    }

    /// Negative log-likelihood l_n(beta), dropping beta-independent constants
    /// consistently across calls. Zero when the dataset is empty.
    pub fn neg_log_lik(&self, beta: &DVector<f64>) -> Result<f64> {
        let data = self.dataset()?;
        self.check_dim(beta)?;
        let u = data.x() * beta;
        Ok((0..data.n()).map(|i| self.nll_term(u[i], data.y()[i])).sum())
    }

    /// Gradient of `neg_log_lik`: X^T g(u).
    pub fn grad_neg_log_lik(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        let data = self.dataset()?;
        self.check_dim(beta)?;
        let u = data.x() * beta;
        let g = DVector::from_fn(data.n(), |i, _| self.nll_dterm(u[i], data.y()[i]));
        Ok(data.x().transpose() * g)
    }

    /// f(beta): l_n plus the Gaussian prior quadratic for GLMs; the pure
    /// quadratic for the synthetic Gaussian; x^2 + x^2 z^2 + z^2 for the
    /// random-walk example.
    pub fn neg_log_post(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check_dim(beta)?;
        match self.kind {
            ModelKind::GaussianSynthetic => {
                Ok(0.5 * self.synth_cov.as_ref().unwrap().inv_quad(beta))
            }
            ModelKind::RwmExample => {
                let (x, z) = (beta[0], beta[1]);
                Ok(x * x + x * x * z * z + z * z)
            }
            _ => {
                let quad = 0.5 * self.prior_alpha * self.prior_cov.inv_quad(beta);
                Ok(self.neg_log_lik(beta)? + quad)
            }
        }
    }

    pub fn grad_neg_log_post(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(beta)?;
        match self.kind {
            ModelKind::GaussianSynthetic => Ok(self.synth_cov.as_ref().unwrap().solve(beta)),
            ModelKind::RwmExample => {
                let (x, z) = (beta[0], beta[1]);
                Ok(DVector::from_row_slice(&[
                    2.0 * x + 2.0 * x * z * z,
                    2.0 * x * x * z + 2.0 * z,
                ]))
            }
            _ => {
                let prior = self.prior_cov.solve(beta) * self.prior_alpha;
                Ok(self.grad_neg_log_lik(beta)? + prior)
            }
        }
    }

    /// Directional second derivative v^T H_{l_n}(beta) v of the likelihood
    /// along the unit vector `v`, by second-order central differences with
    /// step 1e-4. No dense Hessian is ever assembled.
    pub fn curvature_probe(&self, beta: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        assert!(
            (v.norm() - 1.0).abs() <= 1e-10,
            "direction must be a unit vector"
        );
        let h = 1e-4;
        let plus = self.neg_log_lik(&(beta + v * h))?;
        let mid = self.neg_log_lik(beta)?;
        let minus = self.neg_log_lik(&(beta - v * h))?;
        Ok((plus - 2.0 * mid + minus) / (h * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Stream, root_stream};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_design(n: usize, d: usize, rng: &mut Stream) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.7)
    }

    fn random_beta(d: usize, rng: &mut Stream) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
    }

    /// Small dataset with plausible responses per kind.
    fn desk_dataset(kind: ModelKind, n: usize, d: usize, rng: &mut Stream) -> Dataset {
        let x = random_design(n, d, rng);
        let y = DVector::from_fn(n, |i, _| match kind {
            ModelKind::Logistic | ModelKind::Probit => {
                if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 }
            }
            _ => (i % 4) as f64,
        });
        Dataset::new(x, y).unwrap()
    }

    fn desk_model(kind: ModelKind, n: usize, d: usize, rng: &mut Stream) -> TargetModel {
        let data = desk_dataset(kind, n, d, rng);
        let cov = SpdMatrix::identity(d);
        match kind {
            ModelKind::Logistic => TargetModel::logistic(data, 1.0, cov).unwrap(),
            ModelKind::Probit => TargetModel::probit(data, 1.0, cov).unwrap(),
            ModelKind::Poisson => TargetModel::poisson(data, 1.0, cov).unwrap(),
            ModelKind::NegBinom => TargetModel::negbinom(data, 1.0, cov, 2.0).unwrap(),
            _ => unreachable!(),
        }
    }

    const GLM_KINDS: [ModelKind; 4] = [
        ModelKind::Logistic,
        ModelKind::Probit,
        ModelKind::Poisson,
        ModelKind::NegBinom,
    ];

    #[test]
    fn logistic_at_zero_is_n_log_two() {
        let mut rng = root_stream(1);
        let model = desk_model(ModelKind::Logistic, 10, 3, &mut rng);
        let val = model.neg_log_lik(&DVector::zeros(3)).unwrap();
        assert_relative_eq!(val, 6.9314718055994531, max_relative = 1e-12);
    }

    #[test]
    fn probit_at_zero_is_n_log_two() {
        let mut rng = root_stream(2);
        let model = desk_model(ModelKind::Probit, 4, 2, &mut rng);
        let val = model.neg_log_lik(&DVector::zeros(2)).unwrap();
        assert_relative_eq!(val, 4.0 * std::f64::consts::LN_2, max_relative = 1e-12);
    }

    #[test]
    fn poisson_at_zero_with_zero_counts_is_n() {
        let mut rng = root_stream(3);
        let x = random_design(7, 2, &mut rng);
        let data = Dataset::new(x, DVector::zeros(7)).unwrap();
        let model = TargetModel::poisson(data, 1.0, SpdMatrix::identity(2)).unwrap();
        assert_relative_eq!(
            model.neg_log_lik(&DVector::zeros(2)).unwrap(),
            7.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let mut rng = root_stream(4);
        let model = desk_model(ModelKind::Logistic, 12, 3, &mut rng);
        let grad = model.grad_neg_log_lik(&DVector::zeros(3)).unwrap();
        let data = model.data().unwrap();
        let want =
            data.x().transpose() * DVector::from_fn(data.n(), |i, _| 0.5 - data.y()[i]);
        assert!((grad - want).amax() < 1e-12);
    }

    #[test]
    fn poisson_gradient_vanishes_at_zero_with_unit_counts() {
        let mut rng = root_stream(5);
        let x = random_design(9, 3, &mut rng);
        let data = Dataset::new(x, DVector::from_element(9, 1.0)).unwrap();
        let model = TargetModel::poisson(data, 1.0, SpdMatrix::identity(3)).unwrap();
        let grad = model.grad_neg_log_lik(&DVector::zeros(3)).unwrap();
        assert!(grad.amax() < 1e-14);
    }

    /// Central-difference oracle for both likelihood and posterior gradients.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = root_stream(6);
        for kind in GLM_KINDS {
            let model = desk_model(kind, 15, 3, &mut rng);
            for _ in 0..20 {
                let beta = random_beta(3, &mut rng);
                let grad = model.grad_neg_log_post(&beta).unwrap();
                let h = 1e-5;
                for j in 0..3 {
                    let mut bp = beta.clone();
                    let mut bm = beta.clone();
                    bp[j] += h;
                    bm[j] -= h;
                    let fd = (model.neg_log_post(&bp).unwrap()
                        - model.neg_log_post(&bm).unwrap())
                        / (2.0 * h);
                    let scale = grad[j].abs().max(1.0);
                    assert!(
                        (grad[j] - fd).abs() / scale < 1e-4,
                        "{kind}: grad[{j}] = {}, fd = {fd}",
                        grad[j]
                    );
                }
            }
        }
    }

    #[test]
    fn rwm_example_values_and_gradient() {
        let model = TargetModel::rwm_example();
        assert_eq!(model.neg_log_post(&DVector::zeros(2)).unwrap(), 0.0);
        assert_eq!(
            model
                .neg_log_post(&DVector::from_row_slice(&[1.0, 1.0]))
                .unwrap(),
            3.0
        );
        let g = model
            .grad_neg_log_post(&DVector::from_row_slice(&[1.0, 0.0]))
            .unwrap();
        assert_eq!(g, DVector::from_row_slice(&[2.0, 0.0]));
        assert!(matches!(
            model.neg_log_post(&DVector::zeros(3)),
            Err(Error::RwmDimension(3))
        ));
    }

    #[test]
    fn gaussian_synthetic_quadratic() {
        let model = TargetModel::gaussian_synthetic(
            SpdMatrix::identity(1),
            1.0,
            SpdMatrix::identity(1),
        )
        .unwrap();
        assert_relative_eq!(
            model
                .neg_log_post(&DVector::from_row_slice(&[2.0]))
                .unwrap(),
            2.0
        );
        let g = model
            .grad_neg_log_post(&DVector::from_row_slice(&[3.0]))
            .unwrap();
        assert_relative_eq!(g[0], 3.0);
        assert!(model.neg_log_lik(&DVector::zeros(1)).is_err());
    }

    #[test]
    fn curvature_bounded_by_r0_lambda_max() {
        let mut rng = root_stream(7);
        for (kind, r0) in [(ModelKind::Logistic, 0.25), (ModelKind::Probit, 1.0)] {
            let model = desk_model(kind, 20, 3, &mut rng);
            let gram = model.data().unwrap().x().transpose() * model.data().unwrap().x();
            let lambda_max = gram.symmetric_eigen().eigenvalues.max();
            for _ in 0..10 {
                let v = random_beta(3, &mut rng).normalize();
                let beta = random_beta(3, &mut rng);
                let c = model.curvature_probe(&beta, &v).unwrap();
                assert!(
                    c <= r0 * lambda_max + 1e-6,
                    "{kind}: {c} > {}",
                    r0 * lambda_max
                );
            }
        }
    }

    #[test]
    fn poisson_curvature_at_zero_along_first_axis() {
        let mut rng = root_stream(8);
        let x = random_design(11, 3, &mut rng);
        let want: f64 = (0..11).map(|i| x[(i, 0)] * x[(i, 0)]).sum();
        let data = Dataset::new(x, DVector::zeros(11)).unwrap();
        let model = TargetModel::poisson(data, 1.0, SpdMatrix::identity(3)).unwrap();
        let mut e1 = DVector::zeros(3);
        e1[0] = 1.0;
        let c = model.curvature_probe(&DVector::zeros(3), &e1).unwrap();
        assert_relative_eq!(c, want, max_relative = 1e-6);
    }

    /// f is convex for every GLM kind, and so is the strong-convexity witness
    /// f - (alpha/2) beta^T C^-1 beta (which is exactly l_n).
    #[test]
    fn convexity_probe() {
        let mut rng = root_stream(9);
        for kind in GLM_KINDS {
            let model = desk_model(kind, 10, 3, &mut rng);
            for _ in 0..100 {
                let a = random_beta(3, &mut rng);
                let b = random_beta(3, &mut rng);
                let lam: f64 = rng.random();
                let mix = &a * lam + &b * (1.0 - lam);
                for f in [TargetModel::neg_log_post, TargetModel::neg_log_lik] {
                    let lhs = f(&model, &mix).unwrap();
                    let rhs =
                        lam * f(&model, &a).unwrap() + (1.0 - lam) * f(&model, &b).unwrap();
                    assert!(lhs <= rhs + 1e-9, "{kind}: {lhs} > {rhs}");
                }
            }
        }
    }

    #[test]
    fn empty_dataset_reduces_to_prior() {
        let data = Dataset::new(DMatrix::zeros(0, 2), DVector::zeros(0)).unwrap();
        let cov = SpdMatrix::scaled_identity(2, 0.5).unwrap();
        let model = TargetModel::logistic(data, 3.0, cov.clone()).unwrap();
        let beta = DVector::from_row_slice(&[1.0, -2.0]);
        let want = 0.5 * 3.0 * cov.inv_quad(&beta);
        assert_relative_eq!(model.neg_log_post(&beta).unwrap(), want, epsilon = 1e-14);
        assert_eq!(model.neg_log_lik(&beta).unwrap(), 0.0);
    }

    #[test]
    fn binary_kinds_reject_non_binary_responses() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_row_slice(&[0.0, 2.0]);
        let r = TargetModel::logistic(
            Dataset::new(x, y).unwrap(),
            1.0,
            SpdMatrix::identity(1),
        );
        assert!(matches!(r, Err(Error::InvalidResponse { row: 1, .. })));
    }

    #[test]
    fn count_kinds_reject_negative_or_fractional() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        for bad in [-1.0, 2.5] {
            let y = DVector::from_row_slice(&[0.0, bad]);
            let r = TargetModel::poisson(
                Dataset::new(x.clone(), y).unwrap(),
                1.0,
                SpdMatrix::identity(1),
            );
            assert!(matches!(r, Err(Error::InvalidResponse { row: 1, .. })));
        }
    }

    #[test]
    fn csv_roundtrip_and_strictness() {
        let dir = std::env::temp_dir().join("cmhi-targets-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.csv");

        let mut rng = root_stream(10);
        let data = desk_dataset(ModelKind::Poisson, 5, 3, &mut rng);
        data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back.n(), 5);
        assert_eq!(back.d(), 3);
        assert!((back.x() - data.x()).amax() == 0.0);
        assert!((back.y() - data.y()).amax() == 0.0);

        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "y,x1,x2\n1,2\n").unwrap();
        assert!(matches!(
            Dataset::read_csv(&bad),
            Err(Error::Parse { line: 2, .. })
        ));
        std::fs::write(&bad, "y,x1\n1,oops\n").unwrap();
        assert!(matches!(Dataset::read_csv(&bad), Err(Error::Parse { .. })));
        std::fs::write(&bad, "a,b\n").unwrap();
        assert!(matches!(
            Dataset::read_csv(&bad),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
