//! Synchronous coupling of two independence-sampler chains.
//!
//! Both chains receive the same proposal draw and the same uniform each step;
//! once both accept simultaneously they occupy the same point and remain
//! bit-identical forever. With chain A started at the mode and chain B
//! started near stationarity, the mean distance at time t upper-bounds the
//! Wasserstein distance W_rho(P^t(beta*, .), Pi), and the fraction of
//! chains that never accepted realizes the Dirac atom of the
//! convex-combination representation.
//!
//! Replicas are embarrassingly parallel; replica k draws from
//! `substream(seed, k)` and the reduction is done in replica order, so
//! results do not depend on the worker count.

use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{ChainState, McEstimate, MhKernel, mc_mean_stderr};
use crate::optimize::ModeResult;
use crate::rates::Metric;
use crate::stream::{Stream, substream};

/// Default burn-in for the stationary partner chain. Uniform ergodicity makes
/// the residual bias geometrically small; runs report the value they used.
pub const DEFAULT_STATIONARY_BURNIN: u64 = 10_000;

/// Two chains sharing randomness.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub chain_a: ChainState,
    pub chain_b: ChainState,
    pub coalesced: bool,
    pub coalesce_step: Option<u64>,
}

impl CoupledPair {
    pub fn new(kernel: &MhKernel, a: DVector<f64>, b: DVector<f64>) -> Result<Self> {
        if kernel.independence_spec().is_none() {
            return Err(Error::NotIndependenceKernel);
        }
        Ok(Self {
            chain_a: kernel.init_state(a)?,
            chain_b: kernel.init_state(b)?,
            coalesced: false,
            coalesce_step: None,
        })
    }
}

/// One coupled transition: a single proposal and a single uniform drive both
/// chains through their own accept/reject.
pub fn couple_step(kernel: &MhKernel, pair: &mut CoupledPair, rng: &mut Stream) -> Result<()> {
    let spec = kernel
        .independence_spec()
        .ok_or(Error::NotIndependenceKernel)?;
    let cand = spec.sample(rng);
    let cand_lp = -kernel
        .target()
        .neg_log_post(&cand)
        .expect("dims fixed at construction");
    let log_u = rng.random::<f64>().ln();

    let advance = |state: &mut ChainState| -> bool {
        let log_acc = kernel.log_accept(&state.position, state.log_post, &cand, cand_lp);
        state.steps += 1;
        if log_u <= log_acc {
            state.position = cand.clone();
            state.log_post = cand_lp;
            state.accepts += 1;
            state.ever_accepted = true;
            true
        } else {
            false
        }
    };
    let acc_a = advance(&mut pair.chain_a);
    let acc_b = advance(&mut pair.chain_b);
    if acc_a && acc_b && !pair.coalesced {
        pair.coalesced = true;
        pair.coalesce_step = Some(pair.chain_a.steps);
    }
    Ok(())
}

/// Evolve one replica: burn chain B in from the mode, then couple for
/// `t_max` steps, reporting (distance, coalesced, never-accepted) per step
/// including step 0.
fn run_replica(
    kernel: &MhKernel,
    mode: &ModeResult,
    t_max: u64,
    metric: Metric,
    stationary_burnin: u64,
    rng: &mut Stream,
) -> Result<Vec<(f64, bool, bool)>> {
    let mut partner = kernel.init_state(mode.beta_star.clone())?;
    for _ in 0..stationary_burnin {
        kernel.step(&mut partner, rng);
    }
    let mut pair = CoupledPair::new(kernel, mode.beta_star.clone(), partner.position)?;
    let mut rows = Vec::with_capacity(t_max as usize + 1);
    rows.push((
        metric.distance(&pair.chain_a.position, &pair.chain_b.position),
        pair.coalesced,
        !pair.chain_a.ever_accepted,
    ));
    for _ in 0..t_max {
        couple_step(kernel, &mut pair, rng)?;
        rows.push((
            metric.distance(&pair.chain_a.position, &pair.chain_b.position),
            pair.coalesced,
            !pair.chain_a.ever_accepted,
        ));
    }
    Ok(rows)
}

/// Coupling estimate of W_rho(P^t(beta*, .), Pi) over `replicas` pairs.
pub fn estimate_wasserstein_coupling(
    kernel: &MhKernel,
    mode: &ModeResult,
    t: u64,
    replicas: u64,
    metric: Metric,
    stationary_burnin: u64,
    seed: u64,
) -> Result<McEstimate> {
    assert!(replicas >= 100, "coupling estimates need >= 100 replicas");
    let distances: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            run_replica(kernel, mode, t, metric, stationary_burnin, &mut rng)
                .map(|rows| rows[t as usize].0)
        })
        .collect::<Result<_>>()?;
    Ok(mc_mean_stderr(&distances))
}

/// Fraction of chains started at the mode that have never accepted after
/// `t` steps: the empirical mass of the Dirac atom at beta*.
pub fn atom_mass(
    kernel: &MhKernel,
    mode: &ModeResult,
    t: u64,
    replicas: u64,
    seed: u64,
) -> Result<McEstimate> {
    assert!(replicas >= 100, "atom estimates need >= 100 replicas");
    let at_mode: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let mut state = kernel.init_state(mode.beta_star.clone())?;
            for _ in 0..t {
                kernel.step(&mut state, &mut rng);
            }
            Ok(if state.ever_accepted { 0.0 } else { 1.0 })
        })
        .collect::<Result<_>>()?;
    let n = at_mode.len() as f64;
    let mean = at_mode.iter().sum::<f64>() / n;
    Ok(McEstimate {
        mean,
        stderr: (mean * (1.0 - mean) / n).sqrt(),
    })
}

/// One row of the coupling table.
#[derive(Debug, Clone, Copy)]
pub struct CouplingRow {
    pub t: u64,
    pub mean_distance: f64,
    pub stderr: f64,
    pub fraction_coalesced: f64,
    pub fraction_at_mode: f64,
}

/// Full coupling diagnostics for t = 0..=t_max in one pass over the
/// replicas.
pub fn coupling_curve(
    kernel: &MhKernel,
    mode: &ModeResult,
    t_max: u64,
    replicas: u64,
    metric: Metric,
    stationary_burnin: u64,
    seed: u64,
) -> Result<Vec<CouplingRow>> {
    assert!(replicas >= 100, "coupling estimates need >= 100 replicas");
    let per_replica: Vec<Vec<(f64, bool, bool)>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            run_replica(kernel, mode, t_max, metric, stationary_burnin, &mut rng)
        })
        .collect::<Result<_>>()?;

    let n = replicas as f64;
    let mut rows = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max as usize {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut coalesced = 0u64;
        let mut at_mode = 0u64;
        for rep in &per_replica {
            let (dist, co, atom) = rep[t];
            sum += dist;
            sumsq += dist * dist;
            coalesced += u64::from(co);
            at_mode += u64::from(atom);
        }
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0) * n / (n - 1.0);
        rows.push(CouplingRow {
            t: t as u64,
            mean_distance: mean,
            stderr: (var / n).sqrt(),
            fraction_coalesced: coalesced as f64 / n,
            fraction_at_mode: at_mode as f64 / n,
        });
    }
    Ok(rows)
}

/// `t,mean_distance,stderr,fraction_coalesced,fraction_at_mode`.
pub fn write_coupling_csv<W: Write>(rows: &[CouplingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,mean_distance,stderr,fraction_coalesced,fraction_at_mode")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t, r.mean_distance, r.stderr, r.fraction_coalesced, r.fraction_at_mode
        )?;
    }
    Ok(())
}
