//! Run manifests.
//!
//! `serde_json` maps are ordered by key, so a manifest serialises the same
//! way on every run. Wall-clock time is kept out of it (see `timing.json`)
//! to preserve byte equality between repeated runs.

use serde_json::{json, Map, Value};
use spde_bridge_core::rng::DERIVATION_RULE;
use spde_bridge_core::stats::quantile_sorted;
use spde_bridge_core::{Observation, SpectralModel};

use crate::config::Experiment;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Deviation of `p_hat` from 1 beyond which a warning is printed.
pub const BLOWUP_WARN: f64 = 0.15;
/// `|log Ψ|` beyond which a guided run is flagged.
pub const LOG_PSI_WARN: f64 = 1e4;

#[derive(Debug, Clone)]
pub struct Manifest {
    fields: Map<String, Value>,
    warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, exp: &Experiment) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert(
            "artifact".into(),
            json!({ "name": "spde-bridge", "version": VERSION }),
        );
        fields.insert("seed".into(), json!(exp.config.seed));
        fields.insert("rng_derivation_rule".into(), json!(DERIVATION_RULE));
        let mut echo = exp.config.resolved();
        echo.output = None;
        fields.insert(
            "config".into(),
            serde_json::to_value(&echo).expect("configs always serialise"),
        );
        fields.insert(
            "steps".into(),
            json!({
                "modes": exp.modes(),
                "grid_points": exp.grid.len(),
                "time_steps": exp.time.steps(),
                "dt": exp.time.dt(),
            }),
        );
        let mut m = Manifest {
            fields,
            warnings: Vec::new(),
        };
        m.input("x0", json!(exp.x0));
        if !exp.drift.covered_by_theory() {
            m.warn(format!(
                "nonlinearity `{}` is unbounded and not covered by the guarantees for guided proposals; results are heuristic",
                kind_name(exp)
            ));
        }
        m
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.into(), value);
    }

    /// Resolved numeric input, recorded under `inputs`.
    pub fn input(&mut self, key: &str, value: Value) {
        self.section("inputs").insert(key.into(), value);
    }

    pub fn result(&mut self, key: &str, value: Value) {
        self.section("results").insert(key.into(), value);
    }

    pub fn diagnostic(&mut self, key: &str, value: Value) {
        self.section("diagnostics").insert(key.into(), value);
    }

    fn section(&mut self, name: &str) -> &mut Map<String, Value> {
        self.fields
            .entry(name.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("manifest sections are objects")
    }

    pub fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn into_value(mut self, files: &[String]) -> Value {
        let mut files = files.to_vec();
        files.push("manifest.json".into());
        files.sort();
        self.fields.insert("files".into(), json!(files));
        self.fields.insert("warnings".into(), json!(self.warnings));
        Value::Object(self.fields)
    }

    /// Records the trace-condition and blow-up diagnostics.
    pub fn model_diagnostics(&mut self, model: &SpectralModel, obs: Option<&Observation>) {
        let trace = model.trace_diagnostic();
        self.diagnostic(
            "trace_condition",
            json!({
                "partial_sum": trace.partial_sums.last().copied(),
                "decay_exponent": trace.decay_exponent,
            }),
        );
        if let Some(obs) = obs {
            match obs.blowup_diagnostic(model, &blowup_lags()) {
                Ok(r) => {
                    if (r.p_hat - 1.0).abs() > BLOWUP_WARN {
                        self.warn(format!(
                            "blow-up exponent p_hat = {:.4} of |R^-1| deviates from 1 by more than {BLOWUP_WARN}",
                            r.p_hat
                        ));
                    }
                    self.diagnostic(
                        "blowup",
                        json!({
                            "p_hat": r.p_hat,
                            "c_lower": r.c_lower,
                            "c_upper": r.c_upper,
                            "lag_min": r.norms.first().map(|n| n.0),
                            "lag_max": r.norms.last().map(|n| n.0),
                        }),
                    );
                }
                Err(e) => self.warn(format!("blow-up diagnostic failed: {e}")),
            }
        }
    }
}

fn kind_name(exp: &Experiment) -> String {
    serde_json::to_value(exp.config.nonlinearity.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Sixteen log-spaced lags on `[1e-4, 1e-1]`.
pub fn blowup_lags() -> Vec<f64> {
    (0..16).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 15.0)).collect()
}

/// `min, q05, q50, q95, max` of `xs`.
pub fn quantiles(xs: &[f64]) -> Value {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Value::Null;
    }
    json!({
        "count": v.len(),
        "min": v[0],
        "q05": quantile_sorted(&v, 0.05),
        "q50": quantile_sorted(&v, 0.5),
        "q95": quantile_sorted(&v, 0.95),
        "max": v[v.len() - 1],
    })
}
