use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_spde-bridge");

const HEAT: &str = r#"
seed = 11

[model]
kind = "dirichlet_laplacian"
modes = 8
eta = 0.05

[noise]
kind = "white"
sigma = 1.0

[grid]
T = 1.0
N = 40

[observation]
kind = "projection"
k = 2
y = [0.5, -0.25]
"#;

const MM: &str = r#"
seed = 5

[model]
kind = "dirichlet_laplacian"
modes = 12
eta = 3e-3

[noise]
kind = "white"
sigma = 1.0

[nonlinearity]
kind = "michaelis_menten"
zeta1 = 3.0
zeta2 = 0.1

[grid]
T = 1.0
N = 40

[observation]
kind = "projection"
k = 3
y = [1.0, 0.0, 0.5]
"#;

const MH: &str = r#"
[sampler]
kind = "mh"
iterations = 30
beta = 0.3
thin = 3
retained_samples = 4
"#;

const CPM: &str = r#"
[sampler]
kind = "cpm"
iterations = 30
beta = 0.2
rho = 0.5
n_particles = 3
retained_samples = 10
"#;

struct Case {
    dir: tempfile::TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("config.toml"), config).unwrap();
        Case { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write(&self, rel: &str, contents: &str) {
        fs::write(self.path(rel), contents).unwrap();
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(BIN)
            .arg(cmd)
            .arg("--config")
            .arg(self.path("config.toml"))
            .arg("--out")
            .arg(self.path(out))
            .arg("--quiet")
            .args(extra)
            .output()
            .unwrap()
    }

    fn ok(&self, cmd: &str, out: &str) {
        let o = self.run(cmd, out, &[]);
        assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    }

    fn manifest(&self, out: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(out).join("manifest.json")).unwrap()).unwrap()
    }

    fn csv(&self, rel: &str) -> (Vec<String>, Vec<Vec<f64>>) {
        let text = fs::read_to_string(self.path(rel)).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(str::to_string).collect();
        let rows = lines
            .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
            .collect();
        (header, rows)
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let fa = files_under(a);
    assert_eq!(fa, files_under(b));
    assert!(!fa.is_empty());
    for f in fa {
        if f == Path::new("timing.json") {
            continue;
        }
        assert!(fs::read(a.join(&f)).unwrap() == fs::read(b.join(&f)).unwrap(), "{} differs", f.display());
    }
}

#[test]
fn every_command_is_byte_reproducible() {
    let mh = Case::new(&format!("{MM}{MH}"));
    for cmd in ["forward", "guided", "bridge-mh"] {
        mh.ok(cmd, &format!("{cmd}-a"));
        mh.ok(cmd, &format!("{cmd}-b"));
        assert_same_outputs(&mh.path(&format!("{cmd}-a")), &mh.path(&format!("{cmd}-b")));
    }
    let cpm = Case::new(&format!("{MM}{CPM}"));
    cpm.ok("density-cpm", "a");
    cpm.ok("density-cpm", "b");
    assert_same_outputs(&cpm.path("a"), &cpm.path("b"));
    let v = Case::new(&format!("{HEAT}[validate]\npaths = 200\n"));
    v.ok("validate", "a");
    v.ok("validate", "b");
    assert_same_outputs(&v.path("a"), &v.path("b"));
}

#[test]
fn csv_widths_match_modes_and_grid_points() {
    let c = Case::new(&HEAT.replace("N = 40", "N = 40\nM = 20"));
    c.ok("forward", "f");
    let (h, rows) = c.csv("f/path.csv");
    assert_eq!(h[0], "t");
    assert_eq!(h.len(), 9);
    assert_eq!(rows.len(), 41);
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!(rows[40][0], 1.0);
    let (h, rows) = c.csv("f/field.csv");
    assert_eq!(h.len(), 21);
    assert_eq!(h[20], "u_20");
    assert!(rows.iter().all(|r| r.len() == 21));
    let (_, grid) = c.csv("f/grid.csv");
    assert_eq!(grid.len(), 20);
    assert_eq!(c.manifest("f")["config"]["grid"]["M"], 20);
}

#[test]
fn defaults_are_echoed_in_the_manifest() {
    let c = Case::new(&format!("{MM}{MH}"));
    c.ok("bridge-mh", "o");
    let m = c.manifest("o");
    assert_eq!(m["config"]["grid"]["M"], 48);
    assert_eq!(m["config"]["sampler"]["chain"], 0);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["artifact"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["rng_derivation_rule"].is_string());
    assert_eq!(m["inputs"]["y"], serde_json::json!([1.0, 0.0, 0.5]));
    assert!(m["diagnostics"]["blowup"]["p_hat"].is_number());
    assert!(m["diagnostics"]["rate_sup"]["q50"].is_number());
    assert!(m["diagnostics"]["endpoint_gap"]["q95"].is_number());
}

#[test]
fn zero_noise_zero_drift_zero_start_gives_zero_fields() {
    let c = Case::new(&HEAT.replace("sigma = 1.0", "sigma = 0.0"));
    c.ok("forward", "f");
    for f in ["f/path.csv", "f/field.csv"] {
        let (_, rows) = c.csv(f);
        assert!(rows.iter().all(|r| r[1..].iter().all(|v| *v == 0.0)), "{f}");
    }
}

#[test]
fn zero_drift_guided_run_has_zero_log_weight() {
    let c = Case::new(&format!("{HEAT}[guided]\nreplications = 5\n"));
    c.ok("guided", "g");
    let m = c.manifest("g");
    assert_eq!(m["results"]["log_psi"], 0.0);
    assert_eq!(m["diagnostics"]["log_psi"]["max"], 0.0);
    let (_, reps) = c.csv("g/replications.csv");
    assert_eq!(reps.len(), 5);
}

#[test]
fn one_iteration_writes_one_trace_row() {
    let c = Case::new(&format!("{MM}{}", MH.replace("iterations = 30", "iterations = 1")));
    c.ok("bridge-mh", "o");
    let (h, rows) = c.csv("o/trace.csv");
    assert_eq!(h, ["iteration", "log_weight_proposed", "log_weight_current", "accepted"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 1.0);
}

#[test]
fn mh_outputs_samples_and_mean_field() {
    let c = Case::new(&format!("{MM}{MH}"));
    c.ok("bridge-mh", "o");
    let (_, idx) = c.csv("o/samples.csv");
    assert_eq!(idx.len(), 4);
    for i in 0..4 {
        let (h, rows) = c.csv(&format!("o/samples/sample_{i:04}_path.csv"));
        assert_eq!(h.len(), 13);
        assert_eq!(rows.len(), 41);
    }
    let (h, rows) = c.csv("o/mean_field.csv");
    assert_eq!(h.len(), 49);
    assert_eq!(rows.len(), 41);
    let rate = c.manifest("o")["results"]["acceptance_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn cpm_writes_y_samples() {
    let c = Case::new(&format!("{MM}{CPM}"));
    c.ok("density-cpm", "o");
    let (h, rows) = c.csv("o/y_samples.csv");
    assert_eq!(h, ["state", "y_1", "y_2", "y_3"]);
    assert_eq!(rows.len(), 10);
    let m = c.manifest("o");
    assert_eq!(m["results"]["guided_solves"], 31 * 3);
    assert!(m["diagnostics"]["gaussian_reference"]["covariance"].is_array());
}

#[test]
fn beta_zero_is_a_config_error_naming_the_key() {
    let c = Case::new(&format!("{MM}{}", MH.replace("beta = 0.3", "beta = 0.0")));
    let o = c.run("bridge-mh", "o", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampler.beta"));
    assert!(!c.path("o").exists());
}

#[test]
fn unknown_and_foreign_keys_are_config_errors() {
    let c = Case::new(&HEAT.replace("eta = 0.05", "eta = 0.05\netta = 1.0"));
    let o = c.run("forward", "o", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("etta"));

    let c = Case::new(&HEAT.replace("kind = \"dirichlet_laplacian\"", "kind = \"damping\""));
    let o = c.run("forward", "o", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.eta"));
}

#[test]
fn missing_input_files_are_config_errors() {
    let c = Case::new(&HEAT.replace("y = [0.5, -0.25]", "y_from = \"nowhere/path.csv\""));
    let o = c.run("guided", "o", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("observation.y_from"));
}

#[test]
fn singular_observation_is_a_numerical_failure() {
    let cfg = HEAT.replace(
        "kind = \"projection\"\nk = 2",
        "kind = \"weights\"\nweights_file = \"w.csv\"",
    );
    let c = Case::new(&cfg);
    c.write("w.csv", "w_1,w_2,w_3,w_4,w_5,w_6,w_7,w_8\n1,0,1,0,0,0,0,0\n1,0,1,0,0,0,0,0\n");
    let o = c.run("guided", "o", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lag"));
    let o = c.run("validate", "v", &[]);
    assert_eq!(o.status.code(), Some(4));
    let report: Value = serde_json::from_str(&fs::read_to_string(c.path("v/report.json")).unwrap()).unwrap();
    assert!(report["failed"].as_u64().unwrap() >= 1);
}

#[test]
fn validate_passes_on_the_heat_equation() {
    let c = Case::new(&format!("{HEAT}[validate]\npaths = 400\n"));
    c.ok("validate", "v");
    let report: Value = serde_json::from_str(&fs::read_to_string(c.path("v/report.json")).unwrap()).unwrap();
    assert_eq!(report["failed"], 0);
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["transform_round_trip", "semigroup_composition", "blowup_exponent", "zero_drift_log_weight", "lambda_bound"] {
        assert!(names.contains(&n), "{n}");
    }
    assert!(names.iter().filter(|n| n.starts_with("bridge_mean")).count() == 6);
}

#[test]
fn seed_flag_overrides_the_config() {
    let c = Case::new(HEAT);
    c.ok("forward", "a");
    let o = c.run("forward", "b", &["--seed", "12"]);
    assert!(o.status.success());
    assert_eq!(c.manifest("b")["seed"], 12);
    assert_ne!(fs::read(c.path("a/path.csv")).unwrap(), fs::read(c.path("b/path.csv")).unwrap());
    let o = c.run("forward", "c", &["--seed", "11"]);
    assert!(o.status.success());
    assert_eq!(fs::read(c.path("a/path.csv")).unwrap(), fs::read(c.path("c/path.csv")).unwrap());
}

#[test]
fn forward_endpoint_feeds_guided_conditioning() {
    let c = Case::new(&HEAT.replace("y = [0.5, -0.25]", "y_from = \"f/path.csv\""));
    c.ok("forward", "f");
    c.ok("guided", "g");
    let (_, rows) = c.csv("f/path.csv");
    let last = rows.last().unwrap();
    let y = &c.manifest("g")["inputs"]["y"];
    assert_eq!(y[0].as_f64().unwrap(), last[1]);
    assert_eq!(y[1].as_f64().unwrap(), last[2]);
}

#[test]
fn spectral_file_initial_state_uses_last_row() {
    let cfg = format!("{HEAT}[init]\nkind = \"spectral_file\"\nfile = \"x0.csv\"\n");
    let c = Case::new(&cfg);
    c.write("x0.csv", "t,c_1,c_2,c_3,c_4,c_5,c_6,c_7,c_8\n0,9,9,9,9,9,9,9,9\n1,1,2,3,4,5,6,7,8\n");
    c.ok("forward", "f");
    let (_, rows) = c.csv("f/path.csv");
    assert_eq!(&rows[0][1..], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
}

#[test]
fn allen_cahn_prints_a_theory_warning() {
    let cfg = MM.replace(
        "kind = \"michaelis_menten\"\nzeta1 = 3.0\nzeta2 = 0.1",
        "kind = \"allen_cahn\"\nzeta = 1.0",
    );
    let c = Case::new(&cfg);
    let o = Command::new(BIN)
        .args(["forward", "--config"])
        .arg(c.path("config.toml"))
        .arg("--out")
        .arg(c.path("f"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(c.manifest("f")["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn far_conditioning_value_completes_with_a_warning() {
    let c = Case::new(&MM.replace("y = [1.0, 0.0, 0.5]", "y = [1e6, -1e6, 1e6]"));
    c.ok("guided", "g");
    let m = c.manifest("g");
    assert!(m["results"]["log_psi"].as_f64().unwrap().abs() > 1e4);
    assert!(m["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("log_psi")));
}
