//! Command-line driver: dataset generation, mode finding, sampling, rate
//! certification, coupling diagnostics, asymptotic curves, and the
//! non-ergodicity probe scans. One experiment = one subcommand invocation;
//! every run writes a `<out>.manifest` with the resolved parameters, and
//! `rerun --manifest FILE` replays it byte for byte.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cmhi",
    version,
    about = "Centered MH independence sampling with convergence-rate certificates"
)]
pub struct Cli {
    /// Replica-level parallelism (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic GLM dataset CSV (plus provenance sidecar).
    Datagen(DatagenArgs),
    /// Optimize the posterior mode and write it as a flat record.
    Mode(ModeArgs),
    /// Run the centered MHI sampler and record a trace or summary.
    Sample(SampleArgs),
    /// Certify the exact convergence rate (epsilon and the decay series).
    Rate(RateArgs),
    /// Finite-sample GLM rate bound exp(-a_{d,n}).
    LowerBound(LowerBoundArgs),
    /// Synchronous-coupling diagnostics over t = 0..tmax.
    Couple(CoupleArgs),
    /// High-dimensional limiting curve (1 - exp(-a0))^t.
    Curve(CurveArgs),
    /// Acceptance-decay probe scans for the non-ergodic examples.
    Falsify(FalsifyArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
pub struct DatagenArgs {
    /// logistic | probit | poisson | negbinom
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Feature variance scale; entries are N(0, sigma2/n).
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// identity | scaled:S0 | diag:V1;V2;... | file:PATH
    #[arg(long, default_value = "identity")]
    pub cov: String,
    #[arg(long)]
    pub nb_xi: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone)]
pub struct TargetArgs {
    /// gauss1d | gauss2d | data
    #[arg(long, default_value = "data")]
    pub target: String,
    /// Dataset CSV (target = data).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// GLM kind for the dataset target.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value = "identity")]
    pub cov: String,
    #[arg(long)]
    pub nb_xi: Option<f64>,
    /// Prior/proposal precision for the gauss targets.
    #[arg(long)]
    pub proposal_alpha: Option<f64>,
    /// Gradient-norm tolerance for the mode search.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
}

#[derive(Args)]
pub struct ModeArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Number of kernel steps.
    #[arg(long)]
    pub t: u64,
    /// trace | summary
    #[arg(long, default_value = "trace")]
    pub record: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// quadrature | mc
    #[arg(long)]
    pub method: String,
    /// l1 | l2 | linf | tv
    #[arg(long, default_value = "l1")]
    pub metric: String,
    /// quadrature | chain
    #[arg(long, default_value = "quadrature")]
    pub rho_method: String,
    /// Draws for the Monte Carlo epsilon estimate.
    #[arg(long, default_value_t = 100_000)]
    pub m: usize,
    #[arg(long, default_value_t = 12.0)]
    pub grid_half_width: f64,
    #[arg(long, default_value_t = 20_001)]
    pub grid_points: usize,
    /// Chain length for rho-method = chain.
    #[arg(long, default_value_t = 2_000)]
    pub rho_t: u64,
    /// Replicas for rho-method = chain.
    #[arg(long, default_value_t = 500)]
    pub rho_replicas: u64,
    #[arg(long, default_value_t = 50)]
    pub tmax: u32,
    /// Density bound M >= sup pi enabling the generic lower-bound column.
    #[arg(long)]
    pub density_bound: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub dominance_probes: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LowerBoundArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// logistic | probit (others need an explicit --r0)
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value = "identity")]
    pub cov: String,
    /// Curvature constant; defaults to 1/4 (logistic) or 1 (probit).
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub tmax: u64,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    #[arg(long, default_value = "l1")]
    pub metric: String,
    /// Burn-in for the stationary partner chain.
    #[arg(long, default_value_t = cmhi::coupling::DEFAULT_STATIONARY_BURNIN)]
    pub burnin: u64,
    #[arg(long, default_value_t = 200)]
    pub dominance_probes: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    pub r0: f64,
    #[arg(long, default_value_t = 100)]
    pub tmax: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FalsifyArgs {
    /// mhi-gauss | rwm
    #[arg(long)]
    pub case: String,
    /// Proposal draws per probe point.
    #[arg(long, default_value_t = 100_000)]
    pub m: usize,
    /// Per-axis standard deviation of the random-walk step (rwm case).
    #[arg(long, default_value_t = 2.0)]
    pub rw_step: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .expect("rayon pool initialized once");
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Run(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}
