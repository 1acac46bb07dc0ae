//! Subcommand handlers. Each one resolves its inputs, runs the library
//! pipeline, writes its output files, and records a manifest.

use std::path::Path;

use nalgebra::DVector;

use cmhi::coupling::{coupling_curve, write_coupling_csv};
use cmhi::datagen::{self, CovSpec, GenConfig};
use cmhi::gaussian::GaussianSpec;
use cmhi::kernel::{
    McEstimate, MhKernel, RecordMode, estimate_acceptance, run_chain, write_trace_csv,
};
use cmhi::optimize::{DominanceReport, ModeResult, find_mode, verify_dominance};
use cmhi::rates::{
    EpsMethod, Metric, RateCertificate, RhoMethod, SeriesRow, asymptotic_curve,
    epsilon_lower_bound_glm, epsilon_quadrature, estimate_epsilon_mc, mean_rho, r0_for_kind,
    sup_density_quadrature, write_series_csv,
};
use cmhi::spd::SpdMatrix;
use cmhi::stream::substream;
use cmhi::targets::{Dataset, ModelKind, TargetModel};
use cmhi::{Error, Result};

use crate::manifest::{Manifest, manifest_to_argv};
use crate::{
    Cli, Command, CoupleArgs, CurveArgs, DatagenArgs, FalsifyArgs, LowerBoundArgs, ModeArgs,
    RateArgs, RerunArgs, SampleArgs, TargetArgs,
};

/// Usage problems exit 2 (like flag parsing); numerical/certification
/// failures exit 1 with the inner error name.
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult = std::result::Result<(), CliError>;

// Reserved stream ids; replica ensembles use ids 0..replicas.
const STREAM_DOMINANCE: u64 = 1 << 62;
const STREAM_EPS_MC: u64 = (1 << 62) + 1;
const STREAM_CHAIN: u64 = (1 << 62) + 2;
const STREAM_FALSIFY: u64 = (1 << 62) + 16;

pub fn dispatch(cli: Cli) -> CliResult {
    let threads = cli.threads;
    match cli.command {
        Command::Datagen(a) => cmd_datagen(a, threads),
        Command::Mode(a) => cmd_mode(a, threads),
        Command::Sample(a) => cmd_sample(a, threads),
        Command::Rate(a) => cmd_rate(a, threads),
        Command::LowerBound(a) => cmd_lower_bound(a, threads),
        Command::Couple(a) => cmd_couple(a, threads),
        Command::Curve(a) => cmd_curve(a, threads),
        Command::Falsify(a) => cmd_falsify(a, threads),
        Command::Rerun(a) => cmd_rerun(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_cov(s: &str) -> std::result::Result<CovSpec, CliError> {
    if s == "identity" {
        return Ok(CovSpec::Identity);
    }
    if let Some(rest) = s.strip_prefix("scaled:") {
        let s0: f64 = rest
            .parse()
            .map_err(|e| usage(format!("bad scaled covariance `{rest}`: {e}")))?;
        return Ok(CovSpec::ScaledIdentity { s0 });
    }
    if let Some(rest) = s.strip_prefix("diag:") {
        let entries: std::result::Result<Vec<f64>, _> =
            rest.split(';').map(|v| v.parse::<f64>()).collect();
        return Ok(CovSpec::Diagonal(entries.map_err(|e| {
            usage(format!("bad diagonal covariance `{rest}`: {e}"))
        })?));
    }
    if let Some(rest) = s.strip_prefix("file:") {
        return Ok(CovSpec::File(rest.into()));
    }
    Err(usage(format!(
        "unknown covariance spec `{s}` (identity | scaled:S0 | diag:V1;V2 | file:PATH)"
    )))
}

fn parse_glm_kind(s: &str) -> std::result::Result<ModelKind, CliError> {
    let kind: ModelKind = s.parse().map_err(usage)?;
    if !kind.is_glm() {
        return Err(usage(format!("model `{s}` is not a GLM kind")));
    }
    Ok(kind)
}

fn parse_metric(s: &str) -> std::result::Result<Metric, CliError> {
    s.parse().map_err(usage)
}

fn glm_model(
    kind: ModelKind,
    data: Dataset,
    alpha: f64,
    cov: SpdMatrix,
    nb_xi: Option<f64>,
) -> std::result::Result<TargetModel, CliError> {
    Ok(match kind {
        ModelKind::Logistic => TargetModel::logistic(data, alpha, cov)?,
        ModelKind::Probit => TargetModel::probit(data, alpha, cov)?,
        ModelKind::Poisson => TargetModel::poisson(data, alpha, cov)?,
        ModelKind::NegBinom => {
            let xi = nb_xi.ok_or_else(|| usage("negbinom requires --nb-xi"))?;
            TargetModel::negbinom(data, alpha, cov, xi)?
        }
        _ => unreachable!("parse_glm_kind filtered"),
    })
}

fn build_target(args: &TargetArgs) -> std::result::Result<TargetModel, CliError> {
    match args.target.as_str() {
        "gauss1d" | "gauss2d" => {
            let d = if args.target == "gauss1d" { 1 } else { 2 };
            let pa = args
                .proposal_alpha
                .ok_or_else(|| usage("gauss targets require --proposal-alpha"))?;
            Ok(TargetModel::gaussian_synthetic(
                SpdMatrix::identity(d),
                pa,
                SpdMatrix::identity(d),
            )?)
        }
        "data" => {
            let path = args
                .data
                .as_ref()
                .ok_or_else(|| usage("target `data` requires --data FILE"))?;
            let kind = parse_glm_kind(
                args.model
                    .as_deref()
                    .ok_or_else(|| usage("target `data` requires --model KIND"))?,
            )?;
            let data = Dataset::read_csv(path)?;
            let cov = parse_cov(&args.cov)?.build(data.d())?;
            glm_model(kind, data, args.alpha, cov, args.nb_xi)
        }
        other => Err(usage(format!(
            "unknown target `{other}` (gauss1d | gauss2d | data)"
        ))),
    }
}

fn target_manifest(m: &mut Manifest, args: &TargetArgs) {
    m.push("target", &args.target);
    m.push_opt("data", args.data.as_ref().map(|p| p.display()));
    m.push_opt("model", args.model.as_ref());
    m.push("alpha", args.alpha);
    m.push("cov", &args.cov);
    m.push_opt("nb-xi", args.nb_xi);
    m.push_opt("proposal-alpha", args.proposal_alpha);
    m.push("tol", args.tol);
    m.push("max-iter", args.max_iter);
}

/// Optimize, center, and verify: the common front half of the certified
/// commands.
fn centered_pipeline(
    model: TargetModel,
    args: &TargetArgs,
    dominance_probes: usize,
    seed: u64,
) -> Result<(MhKernel, ModeResult, DominanceReport)> {
    let init = DVector::zeros(model.dim());
    let mode = find_mode(&model, &init, args.tol, args.max_iter)?;
    let proposal = GaussianSpec::new(
        mode.beta_star.clone(),
        model.prior_cov().clone(),
        model.prior_alpha(),
    )?;
    let dominance = verify_dominance(
        &model,
        &mode,
        &proposal,
        dominance_probes,
        &mut substream(seed, STREAM_DOMINANCE),
    )?;
    let kernel = MhKernel::centered_mhi(model, &mode)?;
    Ok((kernel, mode, dominance))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn cmd_datagen(a: DatagenArgs, threads: usize) -> CliResult {
    let kind = parse_glm_kind(&a.model)?;
    if kind == ModelKind::NegBinom && a.nb_xi.is_none() {
        return Err(usage("negbinom requires --nb-xi"));
    }
    let cfg = GenConfig {
        kind,
        n: a.n,
        d: a.d,
        sigma2: a.sigma2,
        alpha: a.alpha,
        cov: parse_cov(&a.cov)?,
        nb_xi: a.nb_xi,
        seed: a.seed,
    };
    let (dataset, _beta, _cov) = datagen::generate(&cfg)?;
    let mut buf = Vec::new();
    dataset.write_csv(&mut buf).map_err(Error::Io)?;
    write_out(&a.out, &buf)?;

    let mut sidecar = a.out.as_os_str().to_owned();
    sidecar.push(".gen.txt");
    write_out(Path::new(&sidecar), cfg.sidecar().as_bytes())?;

    let mut m = Manifest::new("datagen", threads);
    m.push("model", kind)
        .push("n", a.n)
        .push("d", a.d)
        .push("sigma2", a.sigma2)
        .push("alpha", a.alpha)
        .push("cov", &a.cov)
        .push_opt("nb-xi", a.nb_xi)
        .push("seed", a.seed)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;
    println!("wrote {} ({} rows, {} features)", a.out.display(), a.n, a.d);
    Ok(())
}

fn cmd_mode(a: ModeArgs, threads: usize) -> CliResult {
    let model = build_target(&a.target)?;
    let init = DVector::zeros(model.dim());
    let mode = find_mode(&model, &init, a.target.tol, a.target.max_iter)?;
    write_out(&a.out, mode.to_record().as_bytes())?;

    let mut m = Manifest::new("mode", threads);
    target_manifest(&mut m, &a.target);
    m.push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;
    println!(
        "converged={} grad_norm={} iterations={}",
        mode.converged, mode.grad_norm, mode.iterations
    );
    Ok(())
}

fn cmd_sample(a: SampleArgs, threads: usize) -> CliResult {
    let record = match a.record.as_str() {
        "trace" => RecordMode::Trace,
        "summary" => RecordMode::Summary,
        other => return Err(usage(format!("unknown record mode `{other}`"))),
    };
    let model = build_target(&a.target)?;
    let init = DVector::zeros(model.dim());
    let mode = find_mode(&model, &init, a.target.tol, a.target.max_iter)?;
    let kernel = MhKernel::centered_mhi(model, &mode)?;
    let run = run_chain(
        &kernel,
        mode.beta_star.clone(),
        a.t,
        &mut substream(a.seed, STREAM_CHAIN),
        record,
    )?;

    let mut buf = Vec::new();
    match &run.trace {
        Some(rows) => write_trace_csv(rows, kernel.dim(), &mut buf).map_err(Error::Io)?,
        None => {
            use std::io::Write as _;
            let state = &run.final_state;
            let pos: Vec<String> = state.position.iter().map(|v| format!("{v}")).collect();
            writeln!(buf, "final={}", pos.join(",")).map_err(Error::Io)?;
            writeln!(buf, "steps={}", state.steps).map_err(Error::Io)?;
            writeln!(buf, "accepts={}", state.accepts).map_err(Error::Io)?;
            writeln!(buf, "acceptance_rate={}", run.acceptance_rate).map_err(Error::Io)?;
            writeln!(buf, "ever_accepted={}", state.ever_accepted).map_err(Error::Io)?;
        }
    }
    write_out(&a.out, &buf)?;

    let mut m = Manifest::new("sample", threads);
    target_manifest(&mut m, &a.target);
    m.push("t", a.t)
        .push("record", &a.record)
        .push("seed", a.seed)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;
    println!(
        "steps={} acceptance_rate={}",
        run.final_state.steps, run.acceptance_rate
    );
    Ok(())
}

fn cmd_rate(a: RateArgs, threads: usize) -> CliResult {
    let metric = parse_metric(&a.metric)?;
    let model = build_target(&a.target)?;
    let d = model.dim();
    let (kernel, mode, dominance) =
        centered_pipeline(model, &a.target, a.dominance_probes, a.seed)?;
    if !dominance.pass {
        return Err(Error::DominanceNotVerified(dominance.max_violation).into());
    }

    let (eps, method) = match a.method.as_str() {
        "quadrature" => {
            let value = epsilon_quadrature(&kernel, a.grid_half_width, a.grid_points)?;
            (
                McEstimate {
                    mean: value,
                    stderr: 0.0,
                },
                EpsMethod::Quadrature,
            )
        }
        "mc" => (
            estimate_epsilon_mc(&kernel, &dominance, a.m, &mut substream(a.seed, STREAM_EPS_MC))?,
            EpsMethod::Mc,
        ),
        other => return Err(usage(format!("unknown method `{other}`"))),
    };

    let rho_method = match a.rho_method.as_str() {
        "quadrature" => RhoMethod::Quadrature {
            half_width: a.grid_half_width,
            points: a.grid_points,
        },
        "chain" => RhoMethod::LongChain {
            t: a.rho_t,
            replicas: a.rho_replicas,
        },
        other => return Err(usage(format!("unknown rho method `{other}`"))),
    };
    let rho = mean_rho(&kernel, &mode, metric, rho_method, &dominance, a.seed)?;

    if let Some(bound) = a.density_bound {
        if !(bound > 0.0) {
            return Err(Error::InvalidBound(bound).into());
        }
        if d <= 2 {
            let sup = sup_density_quadrature(&kernel, &mode, a.grid_half_width, a.grid_points)?;
            if bound < sup * (1.0 - 1e-9) {
                return Err(Error::InvalidBound(bound).into());
            }
            println!("density_bound_check=ok (sup~{sup})");
        } else {
            println!("density_bound_check=skipped (d>2, caller-asserted)");
        }
    }

    let cert = RateCertificate::assemble(
        eps,
        method,
        metric,
        rho,
        a.tmax,
        a.density_bound.map(|m| (m, d)),
    )?;
    let mut buf = Vec::new();
    write_series_csv(&cert.series, &mut buf).map_err(Error::Io)?;
    write_out(&a.out, &buf)?;

    let mut m = Manifest::new("rate", threads);
    target_manifest(&mut m, &a.target);
    m.push("method", &a.method)
        .push("metric", &a.metric)
        .push("rho-method", &a.rho_method)
        .push("m", a.m)
        .push("grid-half-width", a.grid_half_width)
        .push("grid-points", a.grid_points)
        .push("rho-t", a.rho_t)
        .push("rho-replicas", a.rho_replicas)
        .push("tmax", a.tmax)
        .push_opt("density-bound", a.density_bound)
        .push("dominance-probes", a.dominance_probes)
        .push("seed", a.seed)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;

    println!("epsilon={}", cert.epsilon);
    println!("epsilon_stderr={}", cert.epsilon_stderr);
    println!("mean_rho={}", cert.mean_rho);
    println!("max_dominance_violation={}", dominance.max_violation);
    Ok(())
}

fn cmd_lower_bound(a: LowerBoundArgs, threads: usize) -> CliResult {
    let kind = parse_glm_kind(&a.model)?;
    let r0 = match a.r0.or_else(|| r0_for_kind(kind)) {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(usage(format!("--r0 must be positive, got {v}"))),
        None => {
            return Err(usage(format!(
                "no built-in curvature constant for `{kind}`; pass --r0 VALUE"
            )));
        }
    };
    let data = Dataset::read_csv(&a.data)?;
    let cov = parse_cov(&a.cov)?.build(data.d())?;
    let bound = epsilon_lower_bound_glm(&data, a.alpha, &cov, r0)?;

    let csv = format!(
        "a_dn,epsilon_lb,lambda_max\n{},{},{}\n",
        bound.a_dn, bound.epsilon_lb, bound.lambda_max
    );
    write_out(&a.out, csv.as_bytes())?;

    let mut m = Manifest::new("lower-bound", threads);
    m.push("data", a.data.display())
        .push("model", kind)
        .push("alpha", a.alpha)
        .push("cov", &a.cov)
        .push("r0", r0)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;

    println!("a_dn={}", bound.a_dn);
    println!("epsilon_lb={}", bound.epsilon_lb);
    println!("lambda_max={}", bound.lambda_max);
    Ok(())
}

fn cmd_couple(a: CoupleArgs, threads: usize) -> CliResult {
    let metric = parse_metric(&a.metric)?;
    let model = build_target(&a.target)?;
    let (kernel, mode, dominance) =
        centered_pipeline(model, &a.target, a.dominance_probes, a.seed)?;
    if !dominance.pass {
        return Err(Error::DominanceNotVerified(dominance.max_violation).into());
    }
    let rows = coupling_curve(&kernel, &mode, a.tmax, a.replicas, metric, a.burnin, a.seed)?;
    let mut buf = Vec::new();
    write_coupling_csv(&rows, &mut buf).map_err(Error::Io)?;
    write_out(&a.out, &buf)?;

    let mut m = Manifest::new("couple", threads);
    target_manifest(&mut m, &a.target);
    m.push("tmax", a.tmax)
        .push("replicas", a.replicas)
        .push("metric", &a.metric)
        .push("burnin", a.burnin)
        .push("dominance-probes", a.dominance_probes)
        .push("seed", a.seed)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;

    println!(
        "stationary_burnin={} (partner bias decays like (1-eps)^burnin)",
        a.burnin
    );
    println!(
        "final_fraction_coalesced={}",
        rows.last().map(|r| r.fraction_coalesced).unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_curve(a: CurveArgs, threads: usize) -> CliResult {
    let curve = asymptotic_curve(a.gamma, a.sigma2, a.s0, a.alpha, a.r0, a.tmax);
    let rows: Vec<SeriesRow> = curve
        .series
        .iter()
        .enumerate()
        .map(|(t, v)| SeriesRow {
            t: t as u32,
            exact_w: None,
            lower_bound: None,
            asymptotic_bound: Some(*v),
        })
        .collect();
    let mut buf = Vec::new();
    write_series_csv(&rows, &mut buf).map_err(Error::Io)?;
    write_out(&a.out, &buf)?;

    let mut m = Manifest::new("curve", threads);
    m.push("gamma", a.gamma)
        .push("sigma2", a.sigma2)
        .push("s0", a.s0)
        .push("alpha", a.alpha)
        .push("r0", a.r0)
        .push("tmax", a.tmax)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;

    println!("a0={}", curve.a0);
    println!("rate={}", curve.rate);
    Ok(())
}

fn cmd_falsify(a: FalsifyArgs, threads: usize) -> CliResult {
    // (kernel, probe points)
    let (kernel, probes): (MhKernel, Vec<DVector<f64>>) = match a.case.as_str() {
        "mhi-gauss" => {
            // N(0,1) target, deliberately uncentered N(1,1) proposal
            let model = TargetModel::gaussian_synthetic(
                SpdMatrix::identity(1),
                1.0,
                SpdMatrix::identity(1),
            )?;
            let spec = GaussianSpec::new(
                DVector::from_row_slice(&[1.0]),
                SpdMatrix::identity(1),
                1.0,
            )?;
            let kernel = MhKernel::independence(model, spec)?;
            let probes = (1..=8)
                .map(|k| DVector::from_row_slice(&[-(k as f64)]))
                .collect();
            (kernel, probes)
        }
        "rwm" => {
            let model = TargetModel::rwm_example();
            let step = SpdMatrix::scaled_identity(2, a.rw_step * a.rw_step)?;
            let kernel = MhKernel::random_walk(model, step)?;
            let probes = (1..=6)
                .map(|k| DVector::from_row_slice(&[f64::from(1u32 << k), 0.0]))
                .collect();
            (kernel, probes)
        }
        other => return Err(usage(format!("unknown case `{other}` (mhi-gauss | rwm)"))),
    };

    let mut rows = Vec::new();
    for (i, theta) in probes.iter().enumerate() {
        let est = estimate_acceptance(
            &kernel,
            theta,
            a.m,
            &mut substream(a.seed, STREAM_FALSIFY + i as u64),
        )?;
        rows.push((theta.clone(), est));
    }

    let mut buf = String::new();
    buf.push_str("probe,coord_1,coord_2,a_mean,a_stderr\n");
    for (i, (theta, est)) in rows.iter().enumerate() {
        let c2 = if theta.len() > 1 {
            format!("{}", theta[1])
        } else {
            String::new()
        };
        buf.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            theta[0],
            c2,
            est.mean,
            est.stderr
        ));
    }
    write_out(&a.out, buf.as_bytes())?;

    let mut m = Manifest::new("falsify", threads);
    m.push("case", &a.case)
        .push("m", a.m)
        .push("rw-step", a.rw_step)
        .push("seed", a.seed)
        .push("out", a.out.display());
    m.write_for(&a.out).map_err(Error::Io)?;

    let monotone = rows.windows(2).all(|w| w[1].1.mean < w[0].1.mean);
    println!("monotone_decreasing={monotone}");
    println!("final_acceptance={}", rows.last().unwrap().1.mean);
    Ok(())
}

fn cmd_rerun(a: RerunArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.manifest).map_err(Error::Io)?;
    let argv = manifest_to_argv(&text).map_err(CliError::Usage)?;
    let cli = <Cli as clap::Parser>::try_parse_from(&argv)
        .map_err(|e| usage(format!("manifest does not parse: {e}")))?;
    // the rayon pool was sized by the rerun invocation; the recorded thread
    // count only documents the original run (results are thread-invariant)
    dispatch(cli)
}
