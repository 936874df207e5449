//! Parallel drivers over independent random streams.
//!
//! Work items are keyed by index and results are collected in index order,
//! so outputs do not depend on the thread count or scheduling.

use rayon::prelude::*;
use spde_bridge_core::oracles::{rejection_draw, RejectionConfig, RejectionReport};
use spde_bridge_core::samplers::{combine_log_weights, cpm_chain};
use spde_bridge_core::{
    ChainReport, CpmConfig, GuidedRun, GuidedSolver, NoiseDraft, Nonlinearity, Result, Role, SpectralModel,
    StreamKey, TimeGrid,
};

/// Noise draft of guided replication `r`. Replication 0 coincides with the
/// initial state of an MH chain on the same seed and chain 0.
pub fn replication_noise(modes: usize, steps: usize, seed: u64, r: usize) -> NoiseDraft {
    NoiseDraft::standard(modes, steps, StreamKey::new(seed, Role::InitialNoise).index(r as u64))
}

pub fn guided_runs(solver: &GuidedSolver<'_>, x0: &[f64], y: &[f64], seed: u64, count: usize) -> Result<Vec<GuidedRun>> {
    let (j, n) = (solver.model().modes(), solver.time().steps());
    (0..count)
        .into_par_iter()
        .map(|r| solver.solve(x0, y, &replication_noise(j, n, seed, r)))
        .collect()
}

/// Log-weights of a set of drafts, in draft order.
pub fn log_weights(solver: &GuidedSolver<'_>, x0: &[f64], y: &[f64], drafts: &[NoiseDraft]) -> Result<Vec<f64>> {
    drafts.par_iter().map(|d| solver.log_weight(x0, y, d)).collect()
}

/// `log π̂(y)` with the particle solves spread over the thread pool.
pub fn log_pi_hat(solver: &GuidedSolver<'_>, x0: &[f64], y: &[f64], drafts: &[NoiseDraft]) -> Result<f64> {
    let log_rho = solver.log_transition_density(x0, y)?;
    if solver.drift().is_zero() {
        return Ok(log_rho);
    }
    Ok(combine_log_weights(log_rho, &log_weights(solver, x0, y, drafts)?))
}

/// CPM sampler of `L X_T`; same chain as the sequential core version.
pub fn cpm_density(solver: &GuidedSolver<'_>, x0: &[f64], cfg: &CpmConfig) -> Result<ChainReport<Vec<f64>>> {
    let k = solver.observation().dim();
    cpm_chain(cfg, k, solver.model().modes(), solver.time().steps(), |y, drafts| {
        log_pi_hat(solver, x0, y, drafts)
    })
}

/// Rejection sampling over the whole budget, survivors sorted by draw index.
pub fn rejection_forward(
    model: &SpectralModel,
    drift: &Nonlinearity,
    x0: &[f64],
    time: &TimeGrid,
    cfg: &RejectionConfig,
) -> Result<RejectionReport> {
    cfg.validate(model.modes())?;
    let hits: Vec<_> = (0..cfg.budget)
        .into_par_iter()
        .filter_map(|i| match rejection_draw(model, drift, x0, time, cfg, i) {
            Ok(Some(p)) => Some(Ok((i, p))),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    let (indices, paths) = hits.into_iter().unzip();
    Ok(RejectionReport {
        budget: cfg.budget,
        indices,
        paths,
    })
}

/// Forward endpoints of `count` independent draws on `chain`.
pub fn forward_endpoints(
    model: &SpectralModel,
    drift: &Nonlinearity,
    x0: &[f64],
    time: &TimeGrid,
    seed: u64,
    chain: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let key = StreamKey::new(seed, Role::Forward).chain(chain).index(i as u64);
            let noise = NoiseDraft::standard(model.modes(), time.steps(), key);
            spde_bridge_core::solver::solve_forward(model, drift, x0, time, &noise).map(|p| p.endpoint().to_vec())
        })
        .collect()
}

/// Values of `(node, mode)` pairs on `count` guided replications, replication
/// major. Paths are dropped as soon as they are read.
pub fn guided_probes(
    solver: &GuidedSolver<'_>,
    x0: &[f64],
    y: &[f64],
    seed: u64,
    count: usize,
    probes: &[(usize, usize)],
) -> Result<Vec<Vec<f64>>> {
    let (j, n) = (solver.model().modes(), solver.time().steps());
    (0..count)
        .into_par_iter()
        .map(|r| {
            let run = solver.solve(x0, y, &replication_noise(j, n, seed, r))?;
            Ok(probes.iter().map(|&(node, mode)| run.path.state(node)[mode]).collect())
        })
        .collect()
}
