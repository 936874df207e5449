use std::f64::consts::PI;

use proptest::prelude::*;
use spde_bridge_core::oracles::{ou_bridge_moments, rejection_draw, rejection_forward, RejectionConfig};
use spde_bridge_core::samplers::{cpm_density, log_pi_hat, mh_bridge, mh_chain};
use spde_bridge_core::solver::solve_forward;
use spde_bridge_core::spectral::{covariance_eig, dirichlet_laplacian, white_noise};
use spde_bridge_core::stats::{mean, sample_variance};
use spde_bridge_core::{
    CpmConfig, GuidedSolver, MhConfig, NoiseDraft, Nonlinearity, NonlinearityKind, Observation, PhysicalGrid, Role,
    SpectralModel, StreamKey, TimeGrid,
};

fn heat(j: usize) -> SpectralModel {
    SpectralModel::new(dirichlet_laplacian(3e-3, j).unwrap(), white_noise(1.0, j).unwrap(), PI).unwrap()
}

fn michaelis_menten(j: usize) -> Nonlinearity {
    reaction(j, 3.0)
}

fn reaction(j: usize, zeta1: f64) -> Nonlinearity {
    Nonlinearity::new(
        NonlinearityKind::MichaelisMenten { zeta1, zeta2: 0.1 },
        PhysicalGrid::for_modes(j, PI).unwrap(),
    )
    .unwrap()
}

#[test]
fn guided_paths_match_closed_form_bridge_moments() {
    let j = 8;
    let model = heat(j);
    let drift = Nonlinearity::zero(PhysicalGrid::for_modes(j, PI).unwrap());
    let time = TimeGrid::new(1.0, 100).unwrap();
    let obs = Observation::projection(2).unwrap();
    let y = [0.8, -0.4];
    let x0 = vec![0.1; j];
    let oracle = ou_bridge_moments(&model, &drift, &obs, &y, &x0, &time).unwrap();
    let solver = GuidedSolver::new(&model, &drift, obs, time).unwrap();
    let paths = 3000;
    let runs: Vec<_> = (0..paths)
        .map(|r| solver.solve(&x0, &y, &NoiseDraft::standard(j, 100, StreamKey::new(5, Role::InitialNoise).index(r))).unwrap())
        .collect();
    for node in [25, 50, 75] {
        for mode in 0..3 {
            let xs: Vec<f64> = runs.iter().map(|r| r.path.state(node)[mode]).collect();
            let (m, v) = (mean(&xs), sample_variance(&xs));
            let (mu, var) = (oracle.mean(node, mode), oracle.variance(node, mode));
            assert!((m - mu).abs() <= 3.5 * (v / paths as f64).sqrt(), "mean node {node} mode {mode}: {m} vs {mu}");
            assert!((v - var).abs() <= 3.5 * var * (2.0 / paths as f64).sqrt(), "variance node {node} mode {mode}: {v} vs {var}");
        }
    }
    // Unobserved modes follow the free OU law.
    let q = covariance_eig(model.drift_eigs()[5], 1.0, 0.5);
    assert!((oracle.variance(50, 5) - q).abs() < 1e-12);
}

#[test]
fn zero_drift_density_estimate_is_the_gaussian_density() {
    let j = 6;
    let model = heat(j);
    let drift = Nonlinearity::zero(PhysicalGrid::for_modes(j, PI).unwrap());
    let time = TimeGrid::new(1.0, 20).unwrap();
    let solver = GuidedSolver::new(&model, &drift, Observation::projection(2).unwrap(), time).unwrap();
    let x0 = [1.0, -0.5, 0.0, 0.0, 0.0, 0.0];
    let y = [0.3, 0.2];
    let drafts = [NoiseDraft::standard(j, 20, StreamKey::new(1, Role::ProposalNoise))];
    let est = log_pi_hat(&solver, &x0, &y, &drafts).unwrap();
    let exact: f64 = (0..2)
        .map(|c| {
            let a = model.drift_eigs()[c];
            let (mu, var) = ((-a).exp() * x0[c], covariance_eig(a, 1.0, 1.0));
            -0.5 * ((2.0 * PI * var).ln() + (y[c] - mu).powi(2) / var)
        })
        .sum();
    assert!((est - exact).abs() < 1e-10, "{est} vs {exact}");
}

// A weak reaction keeps the spread of log Ψ near 1, so a few particles suffice.
#[test]
fn reduced_cpm_chain_tracks_forward_endpoint_moments() {
    let j = 12;
    let model = heat(j);
    let drift = reaction(j, 0.3);
    let time = TimeGrid::new(1.0, 40).unwrap();
    let x0 = vec![0.0; j];
    let forward: Vec<f64> = (0..4000)
        .map(|i| {
            let noise = NoiseDraft::standard(j, 40, StreamKey::new(3, Role::Forward).index(i));
            solve_forward(&model, &drift, &x0, &time, &noise).unwrap().endpoint()[0]
        })
        .collect();
    let solver = GuidedSolver::new(&model, &drift, Observation::projection(1).unwrap(), time).unwrap();
    let r = cpm_density(&solver, &x0, &CpmConfig::new(6000, 1.5, 0.1, 4, 3)).unwrap();
    let xs: Vec<f64> = r.samples.iter().map(|y| y[0]).collect();
    let (mf, sf) = (mean(&forward), sample_variance(&forward).sqrt());
    assert!((mean(&xs) - mf).abs() < 0.25 * sf, "{} vs {mf}", mean(&xs));
    let ratio = sample_variance(&xs).sqrt() / sf;
    assert!((0.7..1.3).contains(&ratio), "sd ratio {ratio}");
}

#[test]
fn michaelis_menten_log_weight_converges_under_refinement() {
    let j = 16;
    let model = heat(j);
    let drift = michaelis_menten(j);
    let obs = Observation::projection(4).unwrap();
    let y = [2.0, 0.5, 0.0, -0.3];
    let x0 = vec![0.0; j];
    let steps = [50, 100, 200, 400];
    let solvers: Vec<_> = steps
        .iter()
        .map(|&n| GuidedSolver::new(&model, &drift, obs.clone(), TimeGrid::new(1.0, n).unwrap()).unwrap())
        .collect();
    let mut gaps = [0.0; 3];
    for d in 0..20 {
        let mut noise = NoiseDraft::standard(j, 400, StreamKey::new(9, Role::InitialNoise).index(d));
        let mut psi = [0.0; 4];
        for i in (0..4).rev() {
            psi[i] = solvers[i].log_weight(&x0, &y, &noise).unwrap();
            if i > 0 {
                noise = noise.coarsen().unwrap();
            }
        }
        for i in 0..3 {
            gaps[i] += (psi[i + 1] - psi[i]).abs();
        }
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn pure_heat_bridge_accepts_every_proposal() {
    let j = 8;
    let model = heat(j);
    let drift = Nonlinearity::zero(PhysicalGrid::for_modes(j, PI).unwrap());
    let solver = GuidedSolver::new(&model, &drift, Observation::projection(3).unwrap(), TimeGrid::new(1.0, 30).unwrap()).unwrap();
    let r = mh_bridge(&solver, &[0.0; 8], &[1.0, 0.0, -1.0], &MhConfig::new(200, 0.5, 2), &[]).unwrap();
    assert_eq!(r.chain.accepted, 200);
    let end = &r.mean_path[30 * j..31 * j];
    assert!((end[0] - 1.0).abs() < 0.05 && (end[2] + 1.0).abs() < 0.05, "{end:?}");
}

#[test]
fn rejection_run_equals_its_individual_draws() {
    let j = 8;
    let model = heat(j);
    let drift = michaelis_menten(j);
    let time = TimeGrid::new(1.0, 20).unwrap();
    let x0 = vec![0.0; j];
    let cfg = RejectionConfig {
        target_modes: vec![0],
        targets: vec![1.0],
        epsilon: 0.5,
        budget: 200,
        seed: 4,
        chain: 1,
    };
    let report = rejection_forward(&model, &drift, &x0, &time, &cfg).unwrap();
    assert!(report.kept() > 0 && report.kept() < 200);
    for (i, p) in report.indices.iter().zip(&report.paths) {
        assert_eq!(rejection_draw(&model, &drift, &x0, &time, &cfg, *i).unwrap().as_ref(), Some(p));
        assert!((p.endpoint()[0] - 1.0).abs() < 0.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn acceptance_decisions_ignore_constant_log_offsets(offset in -1e3f64..1e3, seed in 0u64..1000) {
        let j = 6;
        let model = heat(j);
        let drift = michaelis_menten(j);
        let solver = GuidedSolver::new(&model, &drift, Observation::projection(2).unwrap(), TimeGrid::new(1.0, 20).unwrap()).unwrap();
        let (x0, y) = ([0.0; 6], [1.5, -0.5]);
        let cfg = MhConfig::new(40, 0.5, seed);
        let run = |c: f64| {
            mh_chain(&cfg, j, 20, |d| Ok((solver.log_weight(&x0, &y, d)? + c, ())), |_, _| {}).unwrap()
        };
        let (a, b) = (run(0.0), run(offset));
        let same = a.trace.iter().zip(&b.trace).all(|(p, q)| p.accepted == q.accepted);
        prop_assert!(same);
    }
}
