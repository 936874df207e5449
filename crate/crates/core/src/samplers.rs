//! Metropolis-Hastings bridge sampler and correlated pseudo-marginal sampler.
//!
//! The MH chain lives on noise drafts. A proposal mixes the current draft with
//! fresh noise (pCN), the guided solver maps it to a path, and the move is
//! accepted on the difference of log weights. The prefactors of the full
//! likelihood ratio do not depend on the draft and cancel.
//!
//! The CPM chain lives on `(y, drafts)`: a Gaussian random walk on `y`, a
//! correlated refresh of every particle draft, and acceptance on the ratio of
//! density estimates `π̂`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{Role, StreamKey};
use crate::solver::{GuidedRun, GuidedSolver, NoiseDraft};
use crate::stats::logsumexp;
use crate::{Error, Result};

/// `√(1 − β²) z + β w`, entrywise.
pub fn pcn_mix(z: &NoiseDraft, w: &NoiseDraft, beta: f64) -> Result<NoiseDraft> {
    if z.modes() != w.modes() || z.steps() != w.steps() {
        return Err(Error::mismatch("noise draft", z.as_slice().len(), w.as_slice().len()));
    }
    let keep = libm::sqrt(1.0 - beta * beta);
    let mixed = z.as_slice().iter().zip(w.as_slice()).map(|(a, b)| keep * a + beta * b).collect();
    NoiseDraft::from_vec(z.modes(), z.steps(), mixed)
}

fn pcn_mix_in_place(z: &mut NoiseDraft, w: &NoiseDraft, beta: f64) {
    let keep = libm::sqrt(1.0 - beta * beta);
    for (a, b) in z.as_mut_slice().iter_mut().zip(w.as_slice()) {
        *a = keep * *a + beta * b;
    }
}

/// Which chain states are kept: those after the first half of the
/// iterations, every `thin`-th, then evenly reduced to at most `retained`
/// (`0` keeps all). States are numbered `0..=iterations`, `0` being the
/// initial state.
pub fn retained_states(iterations: usize, thin: usize, retained: usize) -> Vec<usize> {
    let thin = thin.max(1);
    let candidates: Vec<usize> = (iterations / 2 + 1..=iterations).step_by(thin).collect();
    if retained == 0 || candidates.len() <= retained {
        return candidates;
    }
    (0..retained)
        .map(|i| candidates[(i * candidates.len()) / retained + candidates.len() / (2 * retained)])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub iterations: usize,
    pub beta: f64,
    pub thin: usize,
    pub retained_samples: usize,
    pub seed: u64,
    pub chain: u64,
}

impl MhConfig {
    pub fn new(iterations: usize, beta: f64, seed: u64) -> Self {
        MhConfig {
            iterations,
            beta,
            thin: 1,
            retained_samples: 100,
            seed,
            chain: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("sampler.iterations", "must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid("sampler.beta", "must lie in (0, 1]"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("sampler.thin", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpmConfig {
    pub iterations: usize,
    pub beta: f64,
    pub rho: f64,
    pub n_particles: usize,
    pub thin: usize,
    pub retained_samples: usize,
    pub seed: u64,
    pub chain: u64,
    /// Overrides the `N(0, β² I)` initial draw of `y`.
    pub initial_y: Option<Vec<f64>>,
}

impl CpmConfig {
    pub fn new(iterations: usize, beta: f64, rho: f64, n_particles: usize, seed: u64) -> Self {
        CpmConfig {
            iterations,
            beta,
            rho,
            n_particles,
            thin: 1,
            retained_samples: 0,
            seed,
            chain: 0,
            initial_y: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("sampler.iterations", "must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("sampler.beta", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid("sampler.rho", "must lie in [0, 1)"));
        }
        if self.n_particles == 0 {
            return Err(Error::invalid("sampler.n_particles", "must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("sampler.thin", "must be at least 1"));
        }
        Ok(())
    }
}

/// One MH step: the proposal's log target, the chain's log target after the
/// decision, and whether the proposal was accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub proposed: f64,
    pub current: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport<S> {
    pub iterations: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub samples: Vec<S>,
    /// State index of each retained sample (see [`retained_states`]).
    pub sample_states: Vec<usize>,
    pub trace: Vec<TraceEntry>,
    /// `log π` of the initial state.
    pub initial_log_target: f64,
}

/// Accept/reject on `ln U < proposed − current`.
#[inline]
fn accept(key: StreamKey, proposed: f64, current: f64) -> bool {
    let u: f64 = key.rng().random();
    libm::log(u) < proposed - current
}

/// Generic pCN chain over noise drafts. `evaluate` maps a draft to its log
/// target and a state; `visit` sees the current state after every iteration.
pub fn mh_chain<S, E, V>(
    cfg: &MhConfig,
    modes: usize,
    steps: usize,
    mut evaluate: E,
    mut visit: V,
) -> Result<ChainReport<S>>
where
    S: Clone,
    E: FnMut(&NoiseDraft) -> Result<(f64, S)>,
    V: FnMut(usize, &S),
{
    cfg.validate()?;
    let base = StreamKey::new(cfg.seed, Role::InitialNoise).chain(cfg.chain);
    let mut draft = NoiseDraft::standard(modes, steps, base);
    let (mut current, mut state) = evaluate(&draft)?;
    let initial_log_target = current;
    let keep = retained_states(cfg.iterations, cfg.thin, cfg.retained_samples);
    let mut next_keep = keep.iter().peekable();
    let mut samples = Vec::with_capacity(keep.len());
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut accepted = 0;
    visit(0, &state);

    for i in 1..=cfg.iterations {
        let it = i as u64;
        let w = NoiseDraft::standard(modes, steps, StreamKey { role: Role::ProposalNoise, ..base }.iteration(it));
        let mut proposal = draft.clone();
        pcn_mix_in_place(&mut proposal, &w, cfg.beta);
        let (proposed, candidate) = evaluate(&proposal)?;
        let ok = accept(StreamKey { role: Role::Acceptance, ..base }.iteration(it), proposed, current);
        if ok {
            accepted += 1;
            draft = proposal;
            current = proposed;
            state = candidate;
        }
        trace.push(TraceEntry {
            iteration: i,
            proposed,
            current,
            accepted: ok,
        });
        visit(i, &state);
        if next_keep.peek() == Some(&&i) {
            next_keep.next();
            samples.push(state.clone());
        }
    }
    Ok(ChainReport {
        iterations: cfg.iterations,
        accepted,
        acceptance_rate: accepted as f64 / cfg.iterations as f64,
        samples,
        sample_states: keep,
        trace,
        initial_log_target,
    })
}

/// A `(node, mode)` pair whose value is recorded every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub node: usize,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeReport {
    pub chain: ChainReport<GuidedRun>,
    /// Mean of the current path over the retained window (states after the
    /// first half), node-major `(N + 1) × J`.
    pub mean_path: Vec<f64>,
    pub mean_count: usize,
    /// `iterations + 1` rows of probe values, one column per probe.
    pub probe_trace: Vec<f64>,
    pub probe_width: usize,
}

impl BridgeReport {
    pub fn probe_series(&self, p: usize) -> Vec<f64> {
        self.probe_trace.iter().skip(p).step_by(self.probe_width.max(1)).copied().collect()
    }
}

/// pCN Metropolis-Hastings targeting the bridge law given the guided solver.
pub fn mh_bridge(
    solver: &GuidedSolver<'_>,
    x0: &[f64],
    y: &[f64],
    cfg: &MhConfig,
    probes: &[Probe],
) -> Result<BridgeReport> {
    let j = solver.model().modes();
    let steps = solver.time().steps();
    for p in probes {
        if p.node > steps || p.mode >= j {
            return Err(Error::invalid("probe", "node or mode out of range"));
        }
    }
    let burn = cfg.iterations / 2;
    let mut mean_path = vec![0.0; (steps + 1) * j];
    let mut mean_count = 0;
    let mut probe_trace = Vec::with_capacity((cfg.iterations + 1) * probes.len());
    let chain = mh_chain(
        cfg,
        j,
        steps,
        |draft| {
            let run = solver.solve(x0, y, draft)?;
            Ok((run.log_psi, run))
        },
        |i, run: &GuidedRun| {
            for p in probes {
                probe_trace.push(run.path.state(p.node)[p.mode]);
            }
            if i > burn {
                mean_count += 1;
                for (m, v) in mean_path.iter_mut().zip(run.path.as_slice()) {
                    *m += v;
                }
            }
        },
    )?;
    if mean_count > 0 {
        let c = mean_count as f64;
        mean_path.iter_mut().for_each(|m| *m /= c);
    }
    Ok(BridgeReport {
        chain,
        mean_path,
        mean_count,
        probe_trace,
        probe_width: probes.len(),
    })
}

/// `log π̂(y) = log ρ_Z(0, x0; T, y) + log( n⁻¹ Σ_i Ψ_T(X_i) )`.
pub fn log_pi_hat(solver: &GuidedSolver<'_>, x0: &[f64], y: &[f64], drafts: &[NoiseDraft]) -> Result<f64> {
    if drafts.is_empty() {
        return Err(Error::invalid("n_particles", "at least one draft is required"));
    }
    let log_rho = solver.log_transition_density(x0, y)?;
    if solver.drift().is_zero() {
        return Ok(log_rho);
    }
    let weights = drafts
        .iter()
        .map(|d| solver.log_weight(x0, y, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine_log_weights(log_rho, &weights))
}

/// `log_rho + logsumexp(weights) − log n`.
pub fn combine_log_weights(log_rho: f64, weights: &[f64]) -> f64 {
    log_rho + logsumexp(weights) - libm::log(weights.len() as f64)
}

/// Generic CPM chain. `estimate(y, drafts)` returns `log π̂`.
pub fn cpm_chain<E>(cfg: &CpmConfig, dim: usize, modes: usize, steps: usize, mut estimate: E) -> Result<ChainReport<Vec<f64>>>
where
    E: FnMut(&[f64], &[NoiseDraft]) -> Result<f64>,
{
    cfg.validate()?;
    let base = StreamKey::new(cfg.seed, Role::InitialNoise).chain(cfg.chain);
    let mut y = match &cfg.initial_y {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::mismatch("sampler.initial_y", dim, v.len()));
            }
            v.clone()
        }
        None => {
            let mut rng = StreamKey { role: Role::InitialState, ..base }.rng();
            (0..dim).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); cfg.beta * z }).collect()
        }
    };
    let mut drafts: Vec<NoiseDraft> = (0..cfg.n_particles)
        .map(|p| NoiseDraft::standard(modes, steps, base.index(p as u64)))
        .collect();
    let mut current = estimate(&y, &drafts)?;
    let initial_log_target = current;
    let keep = retained_states(cfg.iterations, cfg.thin, cfg.retained_samples);
    let mut next_keep = keep.iter().peekable();
    let mut samples = Vec::with_capacity(keep.len());
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut accepted = 0;

    for i in 1..=cfg.iterations {
        let it = i as u64;
        let mut rng = StreamKey { role: Role::StateProposal, ..base }.iteration(it).rng();
        let y_prop: Vec<f64> = y
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + cfg.beta * z
            })
            .collect();
        let mut d_prop = drafts.clone();
        for (p, d) in d_prop.iter_mut().enumerate() {
            let v = NoiseDraft::standard(
                modes,
                steps,
                StreamKey { role: Role::ProposalNoise, ..base }.iteration(it).index(p as u64),
            );
            // W° = √(1 − ρ²) W + ρ V
            pcn_mix_in_place(d, &v, cfg.rho);
        }
        let proposed = estimate(&y_prop, &d_prop)?;
        let ok = accept(StreamKey { role: Role::Acceptance, ..base }.iteration(it), proposed, current);
        if ok {
            accepted += 1;
            y = y_prop;
            drafts = d_prop;
            current = proposed;
        }
        trace.push(TraceEntry {
            iteration: i,
            proposed,
            current,
            accepted: ok,
        });
        if next_keep.peek() == Some(&&i) {
            next_keep.next();
            samples.push(y.clone());
        }
    }
    Ok(ChainReport {
        iterations: cfg.iterations,
        accepted,
        acceptance_rate: accepted as f64 / cfg.iterations as f64,
        samples,
        sample_states: keep,
        trace,
        initial_log_target,
    })
}

/// CPM sampler of `L X_T` with the sequential estimator [`log_pi_hat`].
pub fn cpm_density(solver: &GuidedSolver<'_>, x0: &[f64], cfg: &CpmConfig) -> Result<ChainReport<Vec<f64>>> {
    let k = solver.observation().dim();
    cpm_chain(cfg, k, solver.model().modes(), solver.time().steps(), |y, drafts| {
        log_pi_hat(solver, x0, y, drafts)
    })
}
