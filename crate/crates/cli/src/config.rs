//! Experiment configuration files.
//!
//! Configs are TOML. Every section rejects unknown keys, and keys that the
//! selected `kind` does not use are errors too, so a typo never falls back
//! to a default silently.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spde_bridge_core::spectral::{self, PhysicalGrid};
use spde_bridge_core::{
    AmariParams, CpmConfig, MhConfig, Nonlinearity, NonlinearityKind, Observation, SpectralModel, TimeGrid,
};

use crate::error::{CliError, Result};

pub const DEFAULT_MH_RETAINED: usize = 100;
pub const DEFAULT_VALIDATE_PATHS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guided: Option<GuidedConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DirichletLaplacian,
    Damping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    PowerLaw,
    Matern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityChoice {
    #[default]
    Zero,
    MichaelisMenten,
    AllenCahn,
    Amari,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, rename = "A1", skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, rename = "A2", skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Logistic slope of the Amari activation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Projection,
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub kind: ObservationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<String>,
    /// Literal conditioning value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    /// Path CSV of a previous run; `y` is `L` applied to its last row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Zero,
    SpectralFile,
    FieldExpr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidedConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Mh,
    Cpm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub iterations: usize,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Guided paths used by the bridge-moment check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn required<T: Copy>(v: Option<T>, key: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| CliError::config(format!("`{key}` is required when the kind is `{kind}`")))
}

fn unused(keys: &[(&str, bool)], kind: &str) -> Result<()> {
    match keys.iter().find(|(_, set)| *set) {
        Some((key, _)) => Err(CliError::config(format!("`{key}` is not used when the kind is `{kind}`"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().trim_end().to_string();
            if path == "." || path.is_empty() {
                CliError::config(msg)
            } else {
                CliError::config(format!("at `{path}`: {msg}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// The config with every defaulted value written out.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.grid.points.get_or_insert(4 * self.model.modes);
        if c.nonlinearity.kind == NonlinearityChoice::Amari {
            c.nonlinearity.s.get_or_insert(AmariParams::DEFAULT_SLOPE);
        }
        if let Some(g) = c.guided.as_mut() {
            g.replications.get_or_insert(1);
        }
        if let Some(s) = c.sampler.as_mut() {
            s.thin.get_or_insert(1);
            s.chain.get_or_insert(0);
            match s.kind {
                SamplerKind::Mh => {
                    s.retained_samples.get_or_insert(DEFAULT_MH_RETAINED);
                }
                SamplerKind::Cpm => {
                    s.retained_samples.get_or_insert(0);
                }
            }
        }
        if let Some(v) = c.validate.as_mut() {
            v.paths.get_or_insert(DEFAULT_VALIDATE_PATHS);
        }
        c
    }

    pub fn grid_points(&self) -> usize {
        self.grid.points.unwrap_or(4 * self.model.modes)
    }

    pub fn spectral_model(&self) -> Result<SpectralModel> {
        let j = self.model.modes;
        let drift = match self.model.kind {
            ModelKind::DirichletLaplacian => {
                let eta = required(self.model.eta, "model.eta", "dirichlet_laplacian")?;
                spectral::dirichlet_laplacian(eta, j)
            }
            ModelKind::Damping => {
                unused(&[("model.eta", self.model.eta.is_some())], "damping")?;
                spectral::damping(j)
            }
        }
        .map_err(|e| CliError::in_section("model", e))?;

        let n = &self.noise;
        let noise = match n.kind {
            NoiseKind::White => {
                unused(
                    &[("noise.r", n.r.is_some()), ("noise.sigma0", n.sigma0.is_some()), ("noise.rho", n.rho.is_some()), ("noise.nu", n.nu.is_some())],
                    "white",
                )?;
                spectral::white_noise(required(n.sigma, "noise.sigma", "white")?, j)
            }
            NoiseKind::PowerLaw => {
                unused(
                    &[("noise.sigma0", n.sigma0.is_some()), ("noise.rho", n.rho.is_some()), ("noise.nu", n.nu.is_some())],
                    "power_law",
                )?;
                spectral::power_law_noise(
                    required(n.sigma, "noise.sigma", "power_law")?,
                    required(n.r, "noise.r", "power_law")?,
                    j,
                )
            }
            NoiseKind::Matern => {
                unused(&[("noise.sigma", n.sigma.is_some()), ("noise.r", n.r.is_some())], "matern")?;
                spectral::matern_noise(
                    required(n.sigma0, "noise.sigma0", "matern")?,
                    required(n.rho, "noise.rho", "matern")?,
                    required(n.nu, "noise.nu", "matern")?,
                    j,
                )
            }
        }
        .map_err(|e| CliError::in_section("noise", e))?;
        SpectralModel::new(drift, noise, PI).map_err(|e| CliError::in_section("model", e))
    }

    pub fn physical_grid(&self) -> Result<PhysicalGrid> {
        PhysicalGrid::new(self.model.modes, self.grid_points(), PI).map_err(|e| CliError::in_section("grid", e))
    }

    pub fn nonlinearity_kind(&self) -> Result<NonlinearityKind> {
        let c = &self.nonlinearity;
        let mm = [("nonlinearity.zeta1", c.zeta1.is_some()), ("nonlinearity.zeta2", c.zeta2.is_some())];
        let ac = [("nonlinearity.zeta", c.zeta.is_some())];
        let amari = [
            ("nonlinearity.A1", c.a1.is_some()),
            ("nonlinearity.A2", c.a2.is_some()),
            ("nonlinearity.sigma1", c.sigma1.is_some()),
            ("nonlinearity.sigma2", c.sigma2.is_some()),
            ("nonlinearity.theta", c.theta.is_some()),
            ("nonlinearity.s", c.s.is_some()),
        ];
        Ok(match c.kind {
            NonlinearityChoice::Zero => {
                unused(&[&mm[..], &ac[..], &amari[..]].concat(), "zero")?;
                NonlinearityKind::Zero
            }
            NonlinearityChoice::MichaelisMenten => {
                unused(&[&ac[..], &amari[..]].concat(), "michaelis_menten")?;
                NonlinearityKind::MichaelisMenten {
                    zeta1: required(c.zeta1, "nonlinearity.zeta1", "michaelis_menten")?,
                    zeta2: required(c.zeta2, "nonlinearity.zeta2", "michaelis_menten")?,
                }
            }
            NonlinearityChoice::AllenCahn => {
                unused(&[&mm[..], &amari[..]].concat(), "allen_cahn")?;
                NonlinearityKind::AllenCahn {
                    zeta: required(c.zeta, "nonlinearity.zeta", "allen_cahn")?,
                }
            }
            NonlinearityChoice::Amari => {
                unused(&[&mm[..], &ac[..]].concat(), "amari")?;
                NonlinearityKind::Amari(AmariParams {
                    a1: required(c.a1, "nonlinearity.A1", "amari")?,
                    a2: required(c.a2, "nonlinearity.A2", "amari")?,
                    sigma1: required(c.sigma1, "nonlinearity.sigma1", "amari")?,
                    sigma2: required(c.sigma2, "nonlinearity.sigma2", "amari")?,
                    theta: required(c.theta, "nonlinearity.theta", "amari")?,
                    slope: c.s.unwrap_or(AmariParams::DEFAULT_SLOPE),
                })
            }
        })
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.steps).map_err(|e| CliError::in_section("grid", e))
    }

    pub fn sampler(&self, want: SamplerKind) -> Result<&SamplerConfig> {
        let s = self
            .sampler
            .as_ref()
            .ok_or_else(|| CliError::config("a `[sampler]` section is required for this command"))?;
        if s.kind != want {
            let name = match want {
                SamplerKind::Mh => "mh",
                SamplerKind::Cpm => "cpm",
            };
            return Err(CliError::config(format!("`sampler.kind` must be `{name}` for this command")));
        }
        Ok(s)
    }

    pub fn mh_config(&self) -> Result<MhConfig> {
        let s = self.sampler(SamplerKind::Mh)?;
        unused(
            &[
                ("sampler.rho", s.rho.is_some()),
                ("sampler.n_particles", s.n_particles.is_some()),
                ("sampler.initial_y", s.initial_y.is_some()),
            ],
            "mh",
        )?;
        let cfg = MhConfig {
            iterations: s.iterations,
            beta: s.beta,
            thin: s.thin.unwrap_or(1),
            retained_samples: s.retained_samples.unwrap_or(DEFAULT_MH_RETAINED),
            seed: self.seed,
            chain: s.chain.unwrap_or(0),
        };
        cfg.validate().map_err(|e| CliError::in_section("sampler", e))?;
        Ok(cfg)
    }

    pub fn cpm_config(&self) -> Result<CpmConfig> {
        let s = self.sampler(SamplerKind::Cpm)?;
        let cfg = CpmConfig {
            iterations: s.iterations,
            beta: s.beta,
            rho: required(s.rho, "sampler.rho", "cpm")?,
            n_particles: required(s.n_particles, "sampler.n_particles", "cpm")?,
            thin: s.thin.unwrap_or(1),
            retained_samples: s.retained_samples.unwrap_or(0),
            seed: self.seed,
            chain: s.chain.unwrap_or(0),
            initial_y: s.initial_y.clone(),
        };
        cfg.validate().map_err(|e| CliError::in_section("sampler", e))?;
        Ok(cfg)
    }

    pub fn replications(&self) -> Result<usize> {
        let r = self.guided.as_ref().and_then(|g| g.replications).unwrap_or(1);
        if r == 0 {
            return Err(CliError::config("invalid parameter `guided.replications`: must be at least 1"));
        }
        Ok(r)
    }

    pub fn validate_paths(&self) -> Result<usize> {
        let n = self.validate.as_ref().and_then(|v| v.paths).unwrap_or(DEFAULT_VALIDATE_PATHS);
        if n < 2 {
            return Err(CliError::config("invalid parameter `validate.paths`: must be at least 2"));
        }
        Ok(n)
    }

    pub fn output_dir(&self, base: &Path) -> Option<PathBuf> {
        self.output.as_ref().and_then(|o| o.dir.as_ref()).map(|d| base.join(d))
    }
}

/// Everything a command needs, built and validated before any compute.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Directory that relative file references are resolved against.
    pub base: PathBuf,
    pub model: SpectralModel,
    pub grid: PhysicalGrid,
    pub drift: Nonlinearity,
    pub time: TimeGrid,
    pub x0: Vec<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, base: PathBuf) -> Result<Self> {
        let model = config.spectral_model()?;
        let grid = config.physical_grid()?;
        let drift = Nonlinearity::new(config.nonlinearity_kind()?, grid.clone())
            .map_err(|e| CliError::in_section("nonlinearity", e))?;
        let time = config.time_grid()?;
        let x0 = initial_state(&config.init, &grid, &base)?;
        if let Some(obs) = &config.observation {
            check_observation_keys(obs)?;
        }
        Ok(Experiment {
            config,
            base,
            model,
            grid,
            drift,
            time,
            x0,
        })
    }

    pub fn modes(&self) -> usize {
        self.model.modes()
    }

    fn observation_config(&self) -> Result<&ObservationConfig> {
        self.config
            .observation
            .as_ref()
            .ok_or_else(|| CliError::config("an `[observation]` section is required for this command"))
    }

    pub fn has_observation(&self) -> bool {
        self.config.observation.is_some()
    }

    pub fn observation(&self) -> Result<Observation> {
        let c = self.observation_config()?;
        let obs = match c.kind {
            ObservationKind::Projection => {
                Observation::projection(required(c.k, "observation.k", "projection")?).map_err(|e| CliError::in_section("observation", e))?
            }
            ObservationKind::Weights => {
                let file = c
                    .weights_file
                    .as_ref()
                    .ok_or_else(|| CliError::config("`observation.weights_file` is required when the kind is `weights`"))?;
                let rows = crate::output::read_rows(&self.base.join(file), "observation.weights_file")?;
                if let Some(k) = c.k {
                    if k != rows.len() {
                        return Err(CliError::config(format!(
                            "`observation.k` is {k} but `observation.weights_file` has {} rows",
                            rows.len()
                        )));
                    }
                }
                Observation::weights(&rows).map_err(|e| CliError::in_section("observation", e))?
            }
        };
        obs.check_modes(self.modes()).map_err(|e| CliError::in_section("observation", e))?;
        Ok(obs)
    }

    /// The conditioning value `y`.
    pub fn target(&self, obs: &Observation) -> Result<Vec<f64>> {
        let c = self.observation_config()?;
        let y = match (&c.y, &c.y_from) {
            (Some(y), None) => y.clone(),
            (None, Some(file)) => {
                let path = self.base.join(file);
                let rows = crate::output::read_rows(&path, "observation.y_from")?;
                let last = rows
                    .last()
                    .ok_or_else(|| CliError::config("`observation.y_from` has no data rows"))?;
                let j = self.modes();
                if last.len() != j + 1 {
                    return Err(CliError::config(format!(
                        "`observation.y_from` must have {} columns (t, c_1..c_{j}), found {}",
                        j + 1,
                        last.len()
                    )));
                }
                obs.observe(&last[1..]).map_err(|e| CliError::in_section("observation", e))?
            }
            (Some(_), Some(_)) => return Err(CliError::config("set only one of `observation.y` and `observation.y_from`")),
            (None, None) => return Err(CliError::config("`observation.y` or `observation.y_from` is required for this command")),
        };
        if y.len() != obs.dim() {
            return Err(CliError::config(format!(
                "`observation.y` has {} entries but the observation has dimension {}",
                y.len(),
                obs.dim()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config("`observation.y` entries must be finite"));
        }
        Ok(y)
    }

    /// Weight rows behind a `weights` observation, for the manifest.
    pub fn weight_rows(&self, obs: &Observation) -> Option<Vec<Vec<f64>>> {
        match obs {
            Observation::WeightedFunctionals { k, coeffs } => {
                let j = coeffs.len() / k;
                Some(coeffs.chunks(j).map(<[f64]>::to_vec).collect())
            }
            Observation::SpectralProjection { .. } => None,
        }
    }
}

fn check_observation_keys(c: &ObservationConfig) -> Result<()> {
    match c.kind {
        ObservationKind::Projection => unused(&[("observation.weights_file", c.weights_file.is_some())], "projection"),
        ObservationKind::Weights => Ok(()),
    }
}

fn initial_state(c: &InitConfig, grid: &PhysicalGrid, base: &Path) -> Result<Vec<f64>> {
    let j = grid.modes();
    match c.kind {
        InitKind::Zero => {
            unused(&[("init.file", c.file.is_some()), ("init.expr", c.expr.is_some())], "zero")?;
            Ok(vec![0.0; j])
        }
        InitKind::SpectralFile => {
            unused(&[("init.expr", c.expr.is_some())], "spectral_file")?;
            let file = c
                .file
                .as_ref()
                .ok_or_else(|| CliError::config("`init.file` is required when the kind is `spectral_file`"))?;
            let path = base.join(file);
            let (header, rows) = crate::output::read_table(&path, "init.file")?;
            let last = rows.last().ok_or_else(|| CliError::config("`init.file` has no data rows"))?;
            let coeffs = if header.first().map(String::as_str) == Some("t") {
                &last[1..]
            } else {
                &last[..]
            };
            if coeffs.len() != j {
                return Err(CliError::config(format!(
                    "`init.file` must hold {j} spectral coefficients, found {}",
                    coeffs.len()
                )));
            }
            Ok(coeffs.to_vec())
        }
        InitKind::FieldExpr => {
            unused(&[("init.file", c.file.is_some())], "field_expr")?;
            let expr = c
                .expr
                .as_ref()
                .ok_or_else(|| CliError::config("`init.expr` is required when the kind is `field_expr`"))?;
            let values = crate::expr::sample_field(expr, grid)?;
            grid.to_spectral(&values).map_err(CliError::from)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[model]
kind = "dirichlet_laplacian"
modes = 8
eta = 0.003
[noise]
kind = "white"
sigma = 1.0
[grid]
T = 1.0
N = 10
"#;

    #[test]
    fn minimal_config_parses_and_resolves_defaults() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.nonlinearity.kind, NonlinearityChoice::Zero);
        assert_eq!(c.grid.points, None);
        assert_eq!(c.resolved().grid.points, Some(32));
        let e = Experiment::new(c, PathBuf::from(".")).unwrap();
        assert_eq!(e.x0, vec![0.0; 8]);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let text = BASE.replace("sigma = 1.0", "sigma = 1.0\nsigmaa = 2.0");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("noise"), "{err}");
        assert!(err.contains("sigmaa"), "{err}");
    }

    #[test]
    fn wrong_types_name_their_path() {
        let text = BASE.replace("N = 10", "N = \"ten\"");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("grid.N"), "{err}");
    }

    #[test]
    fn keys_foreign_to_the_kind_are_rejected() {
        let text = BASE.replace("sigma = 1.0", "sigma = 1.0\nnu = 1.0");
        let c = ExperimentConfig::parse(&text).unwrap();
        let err = c.spectral_model().unwrap_err().to_string();
        assert!(err.contains("noise.nu"), "{err}");
    }

    #[test]
    fn missing_parameter_is_named() {
        let text = BASE.replace("eta = 0.003\n", "");
        let err = ExperimentConfig::parse(&text).unwrap().spectral_model().unwrap_err().to_string();
        assert!(err.contains("model.eta"), "{err}");
    }

    #[test]
    fn bare_core_names_get_a_section_prefix() {
        let text = BASE.replace("eta = 0.003", "eta = -1.0");
        let err = ExperimentConfig::parse(&text).unwrap().spectral_model().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`model.eta`"), "{err}");
    }

    #[test]
    fn beta_outside_unit_interval_names_the_key() {
        let text = format!("{BASE}[sampler]\nkind = \"mh\"\niterations = 10\nbeta = 0.0\n");
        let err = ExperimentConfig::parse(&text).unwrap().mh_config().unwrap_err().to_string();
        assert!(err.contains("sampler.beta"), "{err}");
    }

    #[test]
    fn field_expression_initial_state() {
        let text = format!("{BASE}[init]\nkind = \"field_expr\"\nexpr = \"0.5 * math::sin(4 * x)\"\n");
        let e = Experiment::new(ExperimentConfig::parse(&text).unwrap(), PathBuf::from(".")).unwrap();
        // 0.5 sin(4ξ) = 0.5 √(π/2) e_4
        let expected = 0.5 * (PI / 2.0).sqrt();
        for (j, c) in e.x0.iter().enumerate() {
            let want = if j == 3 { expected } else { 0.0 };
            assert!((c - want).abs() < 1e-10, "mode {}: {c}", j + 1);
        }
    }
}
