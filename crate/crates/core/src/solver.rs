//! Forward and guided path simulation in spectral coordinates.
//!
//! Both solvers use the semi-implicit Euler–Maruyama update
//!
//! ```text
//! x_{n+1,j} = (x_{n,j} + Δt·(F_j(t_n, x_n) + e_j) + √(q_j Δt)·ξ_{n,j}) / (1 + a_j Δt)
//! ```
//!
//! where `e` is an extra explicit drift (`Q G` for the guided process). The
//! guiding term is evaluated at left endpoints only, so the lag `T − t_n` is
//! never below `Δt` and `R⁻¹` is never formed at zero lag.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{dot, norm};
use crate::nonlinearity::{Nonlinearity, Workspace};
use crate::observation::{Observation, ObservationAtLag};
use crate::rng::StreamKey;
use crate::spectral::SpectralModel;
use crate::{Error, Result};

/// Uniform time grid on `[0, T]` with `N` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("grid.T", "must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::invalid("grid.N", "must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_n`; the last node is exactly `T`.
    pub fn node(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    /// `T − t_n`, computed without accumulating `t_n`.
    pub fn lag(&self, n: usize) -> f64 {
        if n >= self.steps {
            0.0
        } else {
            self.horizon * ((self.steps - n) as f64 / self.steps as f64)
        }
    }

    /// The grid with half the step size.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            horizon: self.horizon,
            steps: 2 * self.steps,
        }
    }
}

/// Standard-normal increments, one per mode per time step.
///
/// The physical Wiener increment of mode `j` over step `n` is
/// `√(q_j Δt) · ξ_{n,j}`; scaling happens in the stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraft {
    modes: usize,
    steps: usize,
    /// Step-major: `increments[n * modes + j]`.
    increments: Vec<f64>,
}

impl NoiseDraft {
    pub fn zeros(modes: usize, steps: usize) -> Self {
        NoiseDraft {
            modes,
            steps,
            increments: vec![0.0; modes * steps],
        }
    }

    pub fn from_vec(modes: usize, steps: usize, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != modes * steps {
            return Err(Error::mismatch("noise increments", modes * steps, increments.len()));
        }
        Ok(NoiseDraft {
            modes,
            steps,
            increments,
        })
    }

    /// I.i.d. standard normal draft from the stream `key`.
    pub fn standard(modes: usize, steps: usize, key: StreamKey) -> Self {
        let mut rng = key.rng();
        let increments = (0..modes * steps).map(|_| StandardNormal.sample(&mut rng)).collect();
        NoiseDraft {
            modes,
            steps,
            increments,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self, n: usize) -> &[f64] {
        &self.increments[n * self.modes..(n + 1) * self.modes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.increments
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.increments
    }

    /// Draft on the grid with twice the step size, driven by the same
    /// Brownian path: consecutive increments are summed and renormalised.
    pub fn coarsen(&self) -> Result<NoiseDraft> {
        if self.steps % 2 != 0 {
            return Err(Error::invalid("noise", "coarsening needs an even number of steps"));
        }
        let j = self.modes;
        let steps = self.steps / 2;
        let mut increments = Vec::with_capacity(j * steps);
        for n in 0..steps {
            let (a, b) = (self.step(2 * n), self.step(2 * n + 1));
            increments.extend(a.iter().zip(b).map(|(u, v)| (u + v) * core::f64::consts::FRAC_1_SQRT_2));
        }
        Ok(NoiseDraft {
            modes: j,
            steps,
            increments,
        })
    }
}

/// Spectral coefficients at every node `t_0, …, t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    modes: usize,
    values: Vec<f64>,
}

impl Path {
    fn with_capacity(modes: usize, nodes: usize) -> Self {
        Path {
            modes,
            values: Vec::with_capacity(modes * nodes),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.values.extend_from_slice(x);
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        if self.modes == 0 {
            0
        } else {
            self.values.len() / self.modes
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.values[n * self.modes..(n + 1) * self.modes]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.modes)
    }

    /// Time series of mode `j` (zero-based).
    pub fn mode_series(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Per-mode coefficients of the semi-implicit update for a fixed `Δt`.
#[derive(Debug, Clone)]
struct Stepper {
    dt: f64,
    noise_scale: Vec<f64>,
    implicit: Vec<f64>,
}

impl Stepper {
    fn new(model: &SpectralModel, dt: f64) -> Self {
        Stepper {
            dt,
            noise_scale: model.noise_eigs().iter().map(|q| libm::sqrt(q * dt)).collect(),
            implicit: model.drift_eigs().iter().map(|a| 1.0 / (1.0 + a * dt)).collect(),
        }
    }

    #[inline]
    fn advance(&self, x: &mut [f64], forcing: &[f64], xi: &[f64]) {
        for j in 0..x.len() {
            x[j] = (x[j] + self.dt * forcing[j] + self.noise_scale[j] * xi[j]) * self.implicit[j];
        }
    }
}

/// One semi-implicit Euler–Maruyama update of a single mode with rate `a`,
/// noise variance rate `q`, explicit forcing `forcing` and increment `xi`.
pub fn semi_implicit_step(a: f64, q: f64, x: f64, forcing: f64, xi: f64, dt: f64) -> f64 {
    (x + dt * forcing + libm::sqrt(q * dt) * xi) / (1.0 + a * dt)
}

/// One step of the full system: evaluates `F(t, x)`, adds `drift_extra` and
/// advances every mode.
pub fn step(
    model: &SpectralModel,
    drift: &Nonlinearity,
    t: f64,
    x: &[f64],
    drift_extra: Option<&[f64]>,
    xi: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let j = model.modes();
    if x.len() != j || xi.len() != j {
        return Err(Error::mismatch("spectral state", j, if x.len() != j { x.len() } else { xi.len() }));
    }
    let mut forcing = drift.eval_spectral(t, x)?;
    if let Some(extra) = drift_extra {
        if extra.len() != j {
            return Err(Error::mismatch("drift_extra", j, extra.len()));
        }
        for (f, e) in forcing.iter_mut().zip(extra) {
            *f += e;
        }
    }
    let mut out = x.to_vec();
    Stepper::new(model, dt).advance(&mut out, &forcing, xi);
    Ok(out)
}

fn check_inputs(model: &SpectralModel, drift: &Nonlinearity, x0: &[f64], time: &TimeGrid, noise: &NoiseDraft) -> Result<()> {
    let j = model.modes();
    if drift.grid().modes() != j {
        return Err(Error::mismatch("nonlinearity grid modes", j, drift.grid().modes()));
    }
    if x0.len() != j {
        return Err(Error::mismatch("initial state", j, x0.len()));
    }
    if noise.modes() != j {
        return Err(Error::mismatch("noise modes", j, noise.modes()));
    }
    if noise.steps() != time.steps() {
        return Err(Error::mismatch("noise steps", time.steps(), noise.steps()));
    }
    Ok(())
}

/// Simulates the unconditioned equation driven by `noise`.
pub fn solve_forward(
    model: &SpectralModel,
    drift: &Nonlinearity,
    x0: &[f64],
    time: &TimeGrid,
    noise: &NoiseDraft,
) -> Result<Path> {
    check_inputs(model, drift, x0, time, noise)?;
    let j = model.modes();
    let stepper = Stepper::new(model, time.dt());
    let mut ws = drift.workspace();
    let mut path = Path::with_capacity(j, time.steps() + 1);
    let mut x = x0.to_vec();
    let mut f = vec![0.0; j];
    path.push(&x);
    for n in 0..time.steps() {
        drift.eval_into(time.node(n), &x, &mut f, &mut ws);
        stepper.advance(&mut x, &f, noise.step(n));
        path.push(&x);
    }
    Ok(path)
}

/// `r(τ) = √(τ ln(1/τ))`, defined for `0 < τ < 1`.
pub fn rate_envelope(lag: f64) -> Option<f64> {
    if lag > 0.0 && lag < 1.0 {
        Some(libm::sqrt(lag * libm::log(1.0 / lag)))
    } else {
        None
    }
}

/// `G(t, x) = L_Δᵀ R_Δ⁻¹ (y − L_Δ x)` in spectral coordinates, `Δ = T − t`.
///
/// The drift added to the equation is `Q G`, i.e. `q_j G_j` on mode `j`.
pub fn guiding_drift(lag: &ObservationAtLag, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != lag.modes() {
        return Err(Error::mismatch("spectral state", lag.modes(), x.len()));
    }
    if y.len() != lag.dim() {
        return Err(Error::mismatch("observation vector", lag.dim(), y.len()));
    }
    let mut resid = vec![0.0; lag.dim()];
    lag.apply_l(x, &mut resid);
    for (r, yi) in resid.iter_mut().zip(y) {
        *r = yi - *r;
    }
    lag.r_inv_apply_in_place(&mut resid)?;
    let mut g = vec![0.0; lag.modes()];
    lag.apply_l_transposed(&resid, &mut g);
    Ok(g)
}

/// A guided path with its accumulated weight and endpoint diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedRun {
    pub path: Path,
    /// `log Ψ_T`, left-Riemann sum of `⟨F, G⟩ Δt`.
    pub log_psi: f64,
    /// `|y − L x_N|`.
    pub endpoint_gap: f64,
    /// Supremum of the defined entries of `rate_trace`.
    pub rate_sup: f64,
    /// Node-aligned `|y − L_{T−t_n} x_n| / r(T − t_n)`; the final entry
    /// divides the endpoint gap by `r(Δt)`. `None` where `r` is undefined.
    pub rate_trace: Vec<Option<f64>>,
}

impl GuidedRun {
    /// Supremum of the rate ratio over the last 10% of the time grid.
    pub fn rate_diagnostic(&self) -> f64 {
        let steps = self.rate_trace.len() - 1;
        let start = steps - steps / 10;
        self.rate_trace[start..].iter().flatten().fold(0.0f64, |acc, v| acc.max(*v))
    }
}

/// Guided-process solver with `L_Δ`, `R_Δ` precomputed for every left node.
#[derive(Debug, Clone)]
pub struct GuidedSolver<'a> {
    model: &'a SpectralModel,
    drift: &'a Nonlinearity,
    obs: Observation,
    time: TimeGrid,
    lags: Vec<ObservationAtLag>,
    stepper: Stepper,
}

impl<'a> GuidedSolver<'a> {
    pub fn new(model: &'a SpectralModel, drift: &'a Nonlinearity, obs: Observation, time: TimeGrid) -> Result<Self> {
        obs.check_modes(model.modes())?;
        if drift.grid().modes() != model.modes() {
            return Err(Error::mismatch("nonlinearity grid modes", model.modes(), drift.grid().modes()));
        }
        let lags = (0..time.steps())
            .map(|n| obs.at_lag(model, time.lag(n)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GuidedSolver {
            model,
            drift,
            obs,
            stepper: Stepper::new(model, time.dt()),
            time,
            lags,
        })
    }

    pub fn model(&self) -> &SpectralModel {
        self.model
    }

    pub fn drift(&self) -> &Nonlinearity {
        self.drift
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    /// Lag table entry for node `n < N`, at lag `T − t_n`.
    pub fn lag_table(&self, n: usize) -> &ObservationAtLag {
        &self.lags[n]
    }

    /// `log ρ_Z(0, x0; T, y)`: Gaussian log density of `L Z_T` at `y`.
    pub fn log_transition_density(&self, x0: &[f64], y: &[f64]) -> Result<f64> {
        self.lags[0].log_density(x0, y)
    }

    pub fn solve(&self, x0: &[f64], y: &[f64], noise: &NoiseDraft) -> Result<GuidedRun> {
        self.run(x0, y, noise, true)
    }

    /// `log Ψ_T` alone; skips path storage.
    pub fn log_weight(&self, x0: &[f64], y: &[f64], noise: &NoiseDraft) -> Result<f64> {
        self.run(x0, y, noise, false).map(|r| r.log_psi)
    }

    fn run(&self, x0: &[f64], y: &[f64], noise: &NoiseDraft, record: bool) -> Result<GuidedRun> {
        check_inputs(self.model, self.drift, x0, &self.time, noise)?;
        let k = self.obs.dim();
        if y.len() != k {
            return Err(Error::mismatch("observation vector", k, y.len()));
        }
        let j = self.model.modes();
        let steps = self.time.steps();
        let dt = self.time.dt();
        let q = self.model.noise_eigs();
        let zero_drift = self.drift.is_zero();

        let mut ws: Workspace = self.drift.workspace();
        let mut path = Path::with_capacity(j, if record { steps + 1 } else { 1 });
        let mut rate_trace = vec![None; steps + 1];
        let mut x = x0.to_vec();
        let mut f = vec![0.0; j];
        let mut g = vec![0.0; j];
        let mut forcing = vec![0.0; j];
        let mut resid = vec![0.0; k];
        let mut log_psi = 0.0;
        path.push(&x);

        for n in 0..steps {
            let lag = &self.lags[n];
            lag.apply_l(&x, &mut resid);
            for (r, yi) in resid.iter_mut().zip(y) {
                *r = yi - *r;
            }
            if let Some(env) = rate_envelope(lag.lag) {
                rate_trace[n] = Some(norm(&resid) / env);
            }
            lag.r_inv_apply_in_place(&mut resid)?;
            lag.apply_l_transposed(&resid, &mut g);

            self.drift.eval_into(self.time.node(n), &x, &mut f, &mut ws);
            if !zero_drift {
                log_psi += dt * dot(&f, &g);
            }
            for i in 0..j {
                forcing[i] = f[i] + q[i] * g[i];
            }
            self.stepper.advance(&mut x, &forcing, noise.step(n));
            if record {
                path.push(&x);
            }
        }
        if !record {
            path.push(&x);
        }

        let observed = self.obs.observe(&x)?;
        let endpoint_gap = libm::sqrt(observed.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>());
        if let Some(env) = rate_envelope(dt) {
            rate_trace[steps] = Some(endpoint_gap / env);
        }
        let rate_sup = rate_trace.iter().flatten().fold(0.0f64, |acc, v| acc.max(*v));
        Ok(GuidedRun {
            path,
            log_psi,
            endpoint_gap,
            rate_sup,
            rate_trace,
        })
    }
}
