//! Subcommand drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use spde_bridge_core::samplers::mh_bridge;
use spde_bridge_core::solver::solve_forward;
use spde_bridge_core::{GuidedRun, GuidedSolver, NoiseDraft, Observation, Role, StreamKey, TraceEntry};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::manifest::{quantiles, Manifest, LOG_PSI_WARN};
use crate::output::{field_table, grid_table, path_table, prefixed, OutputDir, Table};
use crate::{parallel, validate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Guided,
    BridgeMh,
    DensityCpm,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Guided => "guided",
            Command::BridgeMh => "bridge-mh",
            Command::DensityCpm => "density-cpm",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

/// Loads the config, validates it, runs `cmd` and writes every output.
pub fn run(cmd: Command, opts: &RunOptions) -> Result<RunSummary> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let base = opts
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let out = match (&opts.out, config.output_dir(&base)) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => dir,
        (None, None) => return Err(CliError::config("no output directory: pass --out or set `output.dir`")),
    };
    let exp = Experiment::new(config, base)?;
    run_experiment(cmd, &exp, &out)
}

pub fn run_experiment(cmd: Command, exp: &Experiment, out: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    let mut manifest = Manifest::new(cmd.name(), exp);
    // Validate every command-specific input before touching the output directory.
    let plan = Plan::new(cmd, exp, &mut manifest)?;
    let mut dir = OutputDir::create(out)?;
    let outcome = match plan {
        Plan::Forward => forward(exp, &mut dir, &mut manifest),
        Plan::Guided { obs, y } => guided(exp, obs, &y, &mut dir, &mut manifest),
        Plan::BridgeMh { obs, y } => bridge_mh(exp, obs, &y, &mut dir, &mut manifest),
        Plan::DensityCpm { obs } => density_cpm(exp, obs, &mut dir, &mut manifest),
        Plan::Validate => validate::run(exp, &mut dir, &mut manifest),
    };
    let failure = match outcome {
        Ok(()) => None,
        Err(e @ CliError::ValidationFailed { .. }) => Some(e),
        Err(e) => return Err(e),
    };
    let warnings = manifest.warnings().to_vec();
    let files = dir.written().to_vec();
    let value = manifest.into_value(&files);
    dir.write_json("manifest.json", &value)?;
    dir.write_json(
        "timing.json",
        &json!({ "wall_clock_seconds": started.elapsed().as_secs_f64() }),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunSummary {
        out: out.to_path_buf(),
        warnings,
        files: dir.written().to_vec(),
    })
}

enum Plan {
    Forward,
    Guided { obs: Observation, y: Vec<f64> },
    BridgeMh { obs: Observation, y: Vec<f64> },
    DensityCpm { obs: Observation },
    Validate,
}

impl Plan {
    fn new(cmd: Command, exp: &Experiment, manifest: &mut Manifest) -> Result<Self> {
        let observed = |manifest: &mut Manifest| -> Result<Observation> {
            let obs = exp.observation()?;
            if let Some(rows) = exp.weight_rows(&obs) {
                manifest.input("weights", json!(rows));
            }
            Ok(obs)
        };
        let targeted = |manifest: &mut Manifest| -> Result<(Observation, Vec<f64>)> {
            let obs = observed(manifest)?;
            let y = exp.target(&obs)?;
            manifest.input("y", json!(y));
            Ok((obs, y))
        };
        Ok(match cmd {
            Command::Forward => {
                let obs = if exp.has_observation() { Some(observed(manifest)?) } else { None };
                manifest.model_diagnostics(&exp.model, obs.as_ref());
                Plan::Forward
            }
            Command::Guided => {
                exp.config.replications()?;
                let (obs, y) = targeted(manifest)?;
                manifest.model_diagnostics(&exp.model, Some(&obs));
                Plan::Guided { obs, y }
            }
            Command::BridgeMh => {
                exp.config.mh_config()?;
                let (obs, y) = targeted(manifest)?;
                manifest.model_diagnostics(&exp.model, Some(&obs));
                Plan::BridgeMh { obs, y }
            }
            Command::DensityCpm => {
                let cfg = exp.config.cpm_config()?;
                let obs = observed(manifest)?;
                if let Some(y0) = &cfg.initial_y {
                    if y0.len() != obs.dim() {
                        return Err(CliError::config(format!(
                            "`sampler.initial_y` has {} entries but the observation has dimension {}",
                            y0.len(),
                            obs.dim()
                        )));
                    }
                }
                manifest.model_diagnostics(&exp.model, Some(&obs));
                Plan::DensityCpm { obs }
            }
            Command::Validate => {
                exp.config.validate_paths()?;
                let obs = if exp.has_observation() { Some(observed(manifest)?) } else { None };
                if let Some(y) = obs.as_ref().and_then(|o| exp.target(o).ok()) {
                    manifest.input("y", json!(y));
                }
                manifest.model_diagnostics(&exp.model, obs.as_ref());
                Plan::Validate
            }
        })
    }
}

fn times(exp: &Experiment) -> impl Iterator<Item = f64> + '_ {
    (0..=exp.time.steps()).map(|n| exp.time.node(n))
}

fn write_path(dir: &mut OutputDir, exp: &Experiment, prefix: &str, states: &[f64]) -> Result<()> {
    let j = exp.modes();
    dir.write_table(&format!("{prefix}path.csv"), &path_table(times(exp), states.chunks_exact(j), j))?;
    dir.write_table(&format!("{prefix}field.csv"), &field_table(times(exp), states.chunks_exact(j), &exp.grid))
}

fn forward(exp: &Experiment, dir: &mut OutputDir, manifest: &mut Manifest) -> Result<()> {
    let noise = NoiseDraft::standard(exp.modes(), exp.time.steps(), StreamKey::new(exp.config.seed, Role::Forward));
    let path = solve_forward(&exp.model, &exp.drift, &exp.x0, &exp.time, &noise)?;
    write_path(dir, exp, "", path.as_slice())?;
    dir.write_table("grid.csv", &grid_table(&exp.grid))?;
    manifest.result("endpoint", json!(path.endpoint()));
    manifest.result("forward_solves", json!(1));
    Ok(())
}

fn solver<'a>(exp: &'a Experiment, obs: Observation) -> Result<GuidedSolver<'a>> {
    Ok(GuidedSolver::new(&exp.model, &exp.drift, obs, exp.time)?)
}

fn run_summary(runs: &[GuidedRun], manifest: &mut Manifest) {
    let pick = |f: fn(&GuidedRun) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    manifest.diagnostic("log_psi", quantiles(&pick(|r| r.log_psi)));
    manifest.diagnostic("endpoint_gap", quantiles(&pick(|r| r.endpoint_gap)));
    manifest.diagnostic("rate_sup", quantiles(&pick(|r| r.rate_sup)));
    manifest.diagnostic("rate_final_window", quantiles(&pick(GuidedRun::rate_diagnostic)));
}

fn guided(exp: &Experiment, obs: Observation, y: &[f64], dir: &mut OutputDir, manifest: &mut Manifest) -> Result<()> {
    let reps = exp.config.replications()?;
    let solver = solver(exp, obs)?;
    let runs = parallel::guided_runs(&solver, &exp.x0, y, exp.config.seed, reps)?;
    let first = &runs[0];
    write_path(dir, exp, "", first.path.as_slice())?;
    dir.write_table("grid.csv", &grid_table(&exp.grid))?;

    let mut rate = Table::new(&["t", "rate_ratio"]);
    for (n, r) in first.rate_trace.iter().enumerate() {
        if let Some(r) = r {
            rate.float_row(exp.time.node(n), &[*r]);
        }
    }
    dir.write_table("rate.csv", &rate)?;

    let mut table = Table::new(&["replication", "log_psi", "endpoint_gap", "rate_sup", "rate_final_window"]);
    for (i, r) in runs.iter().enumerate() {
        table.row(&i.to_string(), &[r.log_psi, r.endpoint_gap, r.rate_sup, r.rate_diagnostic()]);
    }
    dir.write_table("replications.csv", &table)?;

    for (i, r) in runs.iter().enumerate() {
        if r.log_psi.abs() > LOG_PSI_WARN || !r.log_psi.is_finite() {
            manifest.warn(format!(
                "replication {i}: |log_psi| = {:.3e} exceeds {LOG_PSI_WARN}; y may be far from the reachable set",
                r.log_psi.abs()
            ));
            break;
        }
    }
    manifest.result("log_psi", json!(first.log_psi));
    manifest.result("endpoint_gap", json!(first.endpoint_gap));
    manifest.result("rate_sup", json!(first.rate_sup));
    manifest.result("rate_final_window", json!(first.rate_diagnostic()));
    manifest.result("log_transition_density", json!(solver.log_transition_density(&exp.x0, y)?));
    manifest.result("replications", json!(reps));
    manifest.result("guided_solves", json!(reps));
    run_summary(&runs, manifest);
    Ok(())
}

fn trace_table(trace: &[TraceEntry]) -> Table {
    let mut t = Table::new(&["iteration", "log_weight_proposed", "log_weight_current", "accepted"]);
    for e in trace {
        t.raw_row(&[
            e.iteration.to_string(),
            format!("{:?}", e.proposed),
            format!("{:?}", e.current),
            u8::from(e.accepted).to_string(),
        ]);
    }
    t
}

fn bridge_mh(exp: &Experiment, obs: Observation, y: &[f64], dir: &mut OutputDir, manifest: &mut Manifest) -> Result<()> {
    let cfg = exp.config.mh_config()?;
    let solver = solver(exp, obs)?;
    let report = mh_bridge(&solver, &exp.x0, y, &cfg, &[])?;
    let chain = &report.chain;
    dir.write_table("trace.csv", &trace_table(&chain.trace))?;

    let mut index = Table::new(&["sample", "state", "log_psi", "endpoint_gap", "rate_sup"]);
    for (i, (run, state)) in chain.samples.iter().zip(&chain.sample_states).enumerate() {
        let j = exp.modes();
        let name = format!("samples/sample_{i:04}_path.csv");
        dir.write_table(&name, &path_table(times(exp), run.path.states(), j))?;
        index.raw_row(&[
            i.to_string(),
            state.to_string(),
            format!("{:?}", run.log_psi),
            format!("{:?}", run.endpoint_gap),
            format!("{:?}", run.rate_sup),
        ]);
    }
    dir.write_table("samples.csv", &index)?;
    if report.mean_count > 0 {
        write_path(dir, exp, "mean_", &report.mean_path)?;
    }
    dir.write_table("grid.csv", &grid_table(&exp.grid))?;

    if chain.initial_log_target.abs() > LOG_PSI_WARN {
        manifest.warn(format!(
            "initial |log_psi| = {:.3e} exceeds {LOG_PSI_WARN}",
            chain.initial_log_target.abs()
        ));
    }
    manifest.result("acceptance_rate", json!(chain.acceptance_rate));
    manifest.result("accepted", json!(chain.accepted));
    manifest.result("iterations", json!(chain.iterations));
    manifest.result("retained", json!(chain.samples.len()));
    manifest.result("mean_window", json!(report.mean_count));
    manifest.result("initial_log_psi", json!(chain.initial_log_target));
    manifest.result("guided_solves", json!(chain.iterations + 1));
    run_summary(&chain.samples, manifest);
    Ok(())
}

fn density_cpm(exp: &Experiment, obs: Observation, dir: &mut OutputDir, manifest: &mut Manifest) -> Result<()> {
    let cfg = exp.config.cpm_config()?;
    let k = obs.dim();
    let solver = solver(exp, obs)?;
    let report = parallel::cpm_density(&solver, &exp.x0, &cfg)?;
    dir.write_table("trace.csv", &trace_table(&report.trace))?;
    let mut table = Table::new(&prefixed("state", "y", k));
    for (y, state) in report.samples.iter().zip(&report.sample_states) {
        table.row(&state.to_string(), y);
    }
    dir.write_table("y_samples.csv", &table)?;

    // Law of L X_T when F = 0: N(L_T x0, R_T).
    let at_t = solver.lag_table(0);
    let mut mean = vec![0.0; k];
    at_t.apply_l(&exp.x0, &mut mean);
    manifest.diagnostic(
        "gaussian_reference",
        json!({ "mean": mean, "covariance": at_t.r_matrix() }),
    );
    manifest.result("acceptance_rate", json!(report.acceptance_rate));
    manifest.result("accepted", json!(report.accepted));
    manifest.result("iterations", json!(report.iterations));
    manifest.result("retained", json!(report.samples.len()));
    manifest.result("initial_log_pi_hat", json!(report.initial_log_target));
    let solves = if exp.drift.is_zero() { 0 } else { (report.iterations + 1) * cfg.n_particles };
    manifest.result("guided_solves", json!(solves));
    Ok(())
}
