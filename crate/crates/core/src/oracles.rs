//! Reference results: Gaussian bridge moments for the linear equation, the
//! forward rejection sampler, and the `λ` bound of the weight process.

use alloc::vec::Vec;

use crate::nonlinearity::Nonlinearity;
use crate::observation::Observation;
use crate::rng::{Role, StreamKey};
use crate::solver::{solve_forward, NoiseDraft, Path, TimeGrid};
use crate::spectral::{covariance_eig, SpectralModel};
use crate::{Error, Result};

/// Mean and variance at time `t` of a scalar OU mode `dZ = −aZ dt + √q dW`,
/// started at `x0` and conditioned on `Z_T = y`.
pub fn scalar_bridge_moments(a: f64, q: f64, horizon: f64, x0: f64, y: f64, t: f64) -> (f64, f64) {
    let qt = covariance_eig(a, q, t);
    let q_total = covariance_eig(a, q, horizon);
    let back = libm::exp(-a * (horizon - t));
    let mean = libm::exp(-a * t) * x0 + qt * back / q_total * (y - libm::exp(-a * horizon) * x0);
    let var = qt - qt * qt * back * back / q_total;
    (mean, var.max(0.0))
}

/// Node-major `(N + 1) × J` moment tables of the linear bridge. Modes beyond
/// `k` are unconditioned and carry the forward OU moments.
#[derive(Debug, Clone, PartialEq)]
pub struct OuBridgeMoments {
    pub modes: usize,
    pub conditioned: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl OuBridgeMoments {
    pub fn mean(&self, node: usize, mode: usize) -> f64 {
        self.means[node * self.modes + mode]
    }

    pub fn variance(&self, node: usize, mode: usize) -> f64 {
        self.variances[node * self.modes + mode]
    }
}

/// Exact bridge moments for `F = 0` under a spectral projection.
pub fn ou_bridge_moments(
    model: &SpectralModel,
    drift: &Nonlinearity,
    obs: &Observation,
    y: &[f64],
    x0: &[f64],
    time: &TimeGrid,
) -> Result<OuBridgeMoments> {
    if !drift.is_zero() {
        return Err(Error::Unsupported("bridge moments are only closed-form for a zero nonlinearity"));
    }
    let k = match obs {
        Observation::SpectralProjection { k } => *k,
        Observation::WeightedFunctionals { .. } => {
            return Err(Error::Unsupported("bridge moments need a spectral projection"));
        }
    };
    let j = model.modes();
    obs.check_modes(j)?;
    if y.len() != k {
        return Err(Error::mismatch("observation vector", k, y.len()));
    }
    if x0.len() != j {
        return Err(Error::mismatch("initial state", j, x0.len()));
    }
    let nodes = time.steps() + 1;
    let mut means = Vec::with_capacity(nodes * j);
    let mut variances = Vec::with_capacity(nodes * j);
    for n in 0..nodes {
        let t = time.node(n);
        for m in 0..j {
            let (a, q) = (model.drift_eigs()[m], model.noise_eigs()[m]);
            if m < k {
                let (mu, v) = if n + 1 == nodes {
                    (y[m], 0.0)
                } else {
                    scalar_bridge_moments(a, q, time.horizon(), x0[m], y[m], t)
                };
                means.push(mu);
                variances.push(v);
            } else {
                means.push(libm::exp(-a * t) * x0[m]);
                variances.push(covariance_eig(a, q, t));
            }
        }
    }
    Ok(OuBridgeMoments {
        modes: j,
        conditioned: k,
        means,
        variances,
    })
}

/// Forward rejection: keep paths whose selected endpoint modes lie within
/// `epsilon` of their targets. The remaining modes are disregarded.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionConfig {
    pub target_modes: Vec<usize>,
    pub targets: Vec<f64>,
    pub epsilon: f64,
    pub budget: usize,
    pub seed: u64,
    /// Stream chain of the forward draws; keep it apart from the chain that
    /// generated the data being conditioned on.
    pub chain: u64,
}

impl RejectionConfig {
    pub fn validate(&self, modes: usize) -> Result<()> {
        if self.target_modes.len() != self.targets.len() {
            return Err(Error::mismatch("rejection targets", self.target_modes.len(), self.targets.len()));
        }
        if self.target_modes.iter().any(|&m| m >= modes) {
            return Err(Error::invalid("rejection.target_modes", "mode index out of range"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("rejection.epsilon", "must be positive"));
        }
        if self.budget == 0 {
            return Err(Error::invalid("rejection.budget", "must be at least 1"));
        }
        Ok(())
    }

    pub fn accepts(&self, endpoint: &[f64]) -> bool {
        self.target_modes
            .iter()
            .zip(&self.targets)
            .all(|(&m, &y)| libm::fabs(endpoint[m] - y) < self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionReport {
    pub budget: usize,
    /// Draw indices of the survivors, ascending.
    pub indices: Vec<usize>,
    pub paths: Vec<Path>,
}

impl RejectionReport {
    pub const CAVEAT: &'static str = "only the selected endpoint modes are conditioned; the other spectral modes are disregarded";

    pub fn kept(&self) -> usize {
        self.paths.len()
    }
}

/// Draw number `index` of a rejection run; `Some` if it survives.
pub fn rejection_draw(
    model: &SpectralModel,
    drift: &Nonlinearity,
    x0: &[f64],
    time: &TimeGrid,
    cfg: &RejectionConfig,
    index: usize,
) -> Result<Option<Path>> {
    let noise = NoiseDraft::standard(
        model.modes(),
        time.steps(),
        StreamKey::new(cfg.seed, Role::Forward)
            .chain(cfg.chain)
            .index(index as u64),
    );
    let path = solve_forward(model, drift, x0, time, &noise)?;
    Ok(if cfg.accepts(path.endpoint()) { Some(path) } else { None })
}

/// Sequential rejection run over the whole budget.
pub fn rejection_forward(
    model: &SpectralModel,
    drift: &Nonlinearity,
    x0: &[f64],
    time: &TimeGrid,
    cfg: &RejectionConfig,
) -> Result<RejectionReport> {
    cfg.validate(model.modes())?;
    let mut indices = Vec::new();
    let mut paths = Vec::new();
    for i in 0..cfg.budget {
        if let Some(p) = rejection_draw(model, drift, x0, time, cfg, i)? {
            indices.push(i);
            paths.push(p);
        }
    }
    Ok(RejectionReport {
        budget: cfg.budget,
        indices,
        paths,
    })
}

/// `λ(Δ) = exp(C²Δ/2) · (1 + erf(√(C²Δ/2)))`.
pub fn lambda_bound(c: f64, lag: f64) -> f64 {
    let s = c * c * lag / 2.0;
    libm::exp(s) * (1.0 + libm::erf(libm::sqrt(s)))
}
