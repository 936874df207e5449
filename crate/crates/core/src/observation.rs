//! Linear observation operators and the lag-indexed quantities
//! `L_Δ = L S_Δ`, `R_Δ = L Q_Δ L*` used by the guiding drift.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, cholesky, cholesky_solve_in_place};
use crate::spectral::{least_squares_line, SpectralModel};
use crate::{Error, Result};

/// Relative Cholesky pivot tolerance, scaled by the largest diagonal entry of `R_Δ`.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// `P_k`: the first `k` spectral coordinates.
    SpectralProjection { k: usize },
    /// `x ↦ (⟨x, w_i⟩)_i`; `coeffs` is `k × J` row-major, row `i` holding the
    /// spectral coefficients of `w_i`.
    WeightedFunctionals { k: usize, coeffs: Vec<f64> },
}

impl Observation {
    pub fn projection(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("observation.k", "must be at least 1"));
        }
        Ok(Observation::SpectralProjection { k })
    }

    /// Weighted functionals from `rows`, each of length `J`.
    pub fn weights(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("observation.weights", "need at least one weight row"));
        }
        let j = rows[0].len();
        let mut coeffs = Vec::with_capacity(k * j);
        for row in rows {
            if row.len() != j {
                return Err(Error::mismatch("weight row", j, row.len()));
            }
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::invalid("observation.weights", "weight rows must be nonzero"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("observation.weights", "weights must be finite"));
            }
            coeffs.extend_from_slice(row);
        }
        if k > j {
            return Err(Error::invalid("observation.k", "cannot exceed the number of modes"));
        }
        Ok(Observation::WeightedFunctionals { k, coeffs })
    }

    pub fn dim(&self) -> usize {
        match self {
            Observation::SpectralProjection { k } | Observation::WeightedFunctionals { k, .. } => *k,
        }
    }

    /// Checks that the operator acts on `modes` spectral coordinates.
    pub fn check_modes(&self, modes: usize) -> Result<()> {
        match self {
            Observation::SpectralProjection { k } => {
                if *k > modes {
                    return Err(Error::invalid("observation.k", "cannot exceed the number of modes"));
                }
            }
            Observation::WeightedFunctionals { k, coeffs } => {
                if coeffs.len() != k * modes {
                    return Err(Error::mismatch("weight coefficients", k * modes, coeffs.len()));
                }
            }
        }
        Ok(())
    }

    /// Dense `k × J` matrix of the operator.
    pub fn canonical_matrix(&self, modes: usize) -> Result<Vec<f64>> {
        self.check_modes(modes)?;
        Ok(match self {
            Observation::SpectralProjection { k } => {
                let mut m = vec![0.0; k * modes];
                for i in 0..*k {
                    m[i * modes + i] = 1.0;
                }
                m
            }
            Observation::WeightedFunctionals { coeffs, .. } => coeffs.clone(),
        })
    }

    /// Equivalent `WeightedFunctionals` form.
    pub fn canonicalize(&self, modes: usize) -> Result<Observation> {
        Ok(Observation::WeightedFunctionals {
            k: self.dim(),
            coeffs: self.canonical_matrix(modes)?,
        })
    }

    pub fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_modes(x.len())?;
        Ok(match self {
            Observation::SpectralProjection { k } => x[..*k].to_vec(),
            Observation::WeightedFunctionals { k, coeffs } => {
                let mut y = vec![0.0; *k];
                linalg::matvec(coeffs, *k, x.len(), x, &mut y);
                y
            }
        })
    }

    /// `L_Δ`, `R_Δ` and, for `Δ > 0`, the Cholesky factor of `R_Δ`.
    pub fn at_lag(&self, model: &SpectralModel, lag: f64) -> Result<ObservationAtLag> {
        if !(lag >= 0.0 && lag.is_finite()) {
            return Err(Error::invalid("lag", "must be nonnegative and finite"));
        }
        let modes = model.modes();
        let base = self.canonical_matrix(modes)?;
        let k = self.dim();
        let decay = model.semigroup_factors(lag);
        let cov = model.covariance_eigs(lag);

        let mut l_lag = base.clone();
        for row in l_lag.chunks_exact_mut(modes) {
            for (v, d) in row.iter_mut().zip(&decay) {
                *v *= d;
            }
        }

        let mut r = vec![0.0; k * k];
        match self {
            Observation::SpectralProjection { .. } => {
                for i in 0..k {
                    r[i * k + i] = cov[i];
                }
            }
            Observation::WeightedFunctionals { .. } => {
                for i in 0..k {
                    for l in 0..=i {
                        let ri = &base[i * modes..(i + 1) * modes];
                        let rl = &base[l * modes..(l + 1) * modes];
                        let s: f64 = ri.iter().zip(rl).zip(&cov).map(|((a, b), c)| a * b * c).sum();
                        r[i * k + l] = s;
                        r[l * k + i] = s;
                    }
                }
            }
        }

        let (chol, log_det) = if lag > 0.0 {
            let l = cholesky(&r, k, PIVOT_TOLERANCE).map_err(|f| Error::FactorizationFailure {
                lag,
                pivot: f.pivot,
                tolerance: f.tolerance,
            })?;
            let ld = 2.0 * (0..k).map(|i| libm::log(l[i * k + i])).sum::<f64>();
            (Some(l), Some(ld))
        } else {
            (None, None)
        };

        Ok(ObservationAtLag {
            lag,
            k,
            modes,
            l_lag,
            r,
            chol,
            log_det,
        })
    }

    /// Scans `‖R_Δ⁻¹‖ = 1/λ_min(R_Δ)` over `lags` and fits
    /// `log ‖R_Δ⁻¹‖ ≈ -p log Δ + c`.
    ///
    /// The lags must be positive and span at least two decades.
    pub fn blowup_diagnostic(&self, model: &SpectralModel, lags: &[f64]) -> Result<BlowupReport> {
        if lags.len() < 2 {
            return Err(Error::invalid("lags", "need at least two lags"));
        }
        if lags.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("lags", "must be positive and finite"));
        }
        let lo = lags.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lags.iter().cloned().fold(0.0, f64::max);
        if hi / lo < 100.0 {
            return Err(Error::invalid("lags", "must span at least two decades"));
        }

        let mut norms = Vec::with_capacity(lags.len());
        for &lag in lags {
            let at = self.at_lag(model, lag)?;
            norms.push((lag, 1.0 / at.min_eigenvalue()));
        }
        let pts: Vec<(f64, f64)> = norms.iter().map(|&(d, n)| (libm::log(d), libm::log(n))).collect();
        let (slope, intercept) = least_squares_line(&pts).ok_or(Error::invalid("lags", "degenerate lag grid"))?;
        let scaled = norms.iter().map(|&(d, n)| d * n);
        let c_lower = scaled.clone().fold(f64::INFINITY, f64::min);
        let c_upper = scaled.fold(0.0, f64::max);
        Ok(BlowupReport {
            p_hat: -slope,
            intercept,
            c_lower,
            c_upper,
            norms,
        })
    }
}

/// Result of [`Observation::blowup_diagnostic`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    /// Fitted blow-up exponent; the guiding theory needs `p = 1`.
    pub p_hat: f64,
    pub intercept: f64,
    /// `min_Δ Δ ‖R_Δ⁻¹‖` over the scanned lags.
    pub c_lower: f64,
    /// `max_Δ Δ ‖R_Δ⁻¹‖` over the scanned lags.
    pub c_upper: f64,
    /// `(Δ, ‖R_Δ⁻¹‖)` pairs.
    pub norms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationAtLag {
    pub lag: f64,
    k: usize,
    modes: usize,
    l_lag: Vec<f64>,
    r: Vec<f64>,
    chol: Option<Vec<f64>>,
    log_det: Option<f64>,
}

impl ObservationAtLag {
    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `L_Δ` as a `k × J` row-major matrix.
    pub fn l_matrix(&self) -> &[f64] {
        &self.l_lag
    }

    /// `R_Δ` as a `k × k` row-major matrix.
    pub fn r_matrix(&self) -> &[f64] {
        &self.r
    }

    pub fn cholesky_factor(&self) -> Option<&[f64]> {
        self.chol.as_deref()
    }

    pub fn log_det(&self) -> Option<f64> {
        self.log_det
    }

    /// `out = L_Δ x`.
    pub fn apply_l(&self, x: &[f64], out: &mut [f64]) {
        linalg::matvec(&self.l_lag, self.k, self.modes, x, out);
    }

    /// `out = L_Δᵀ u`.
    pub fn apply_l_transposed(&self, u: &[f64], out: &mut [f64]) {
        linalg::matvec_transposed(&self.l_lag, self.k, self.modes, u, out);
    }

    fn factor(&self) -> Result<&[f64]> {
        self.chol.as_deref().ok_or(Error::FactorizationFailure {
            lag: self.lag,
            pivot: 0.0,
            tolerance: 0.0,
        })
    }

    /// Solves `R_Δ u = v` in place.
    pub fn r_inv_apply_in_place(&self, v: &mut [f64]) -> Result<()> {
        let l = self.factor()?;
        cholesky_solve_in_place(l, self.k, v);
        Ok(())
    }

    pub fn r_inv_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.k {
            return Err(Error::mismatch("observation vector", self.k, v.len()));
        }
        let mut u = v.to_vec();
        self.r_inv_apply_in_place(&mut u)?;
        Ok(u)
    }

    /// Smallest eigenvalue of `R_Δ`.
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::symmetric_eigenvalues(&self.r, self.k)[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        linalg::symmetric_eigenvalues(&self.r, self.k)[self.k - 1]
    }

    /// `log N(y; L_Δ x, R_Δ)`, the log transition density of `L Z_T` given
    /// `Z_{T-Δ} = x` for the linear (`F = 0`) equation.
    pub fn log_density(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.modes {
            return Err(Error::mismatch("spectral state", self.modes, x.len()));
        }
        if y.len() != self.k {
            return Err(Error::mismatch("observation vector", self.k, y.len()));
        }
        let mut resid = vec![0.0; self.k];
        self.apply_l(x, &mut resid);
        for (r, yi) in resid.iter_mut().zip(y) {
            *r = yi - *r;
        }
        let mut u = resid.clone();
        self.r_inv_apply_in_place(&mut u)?;
        let quad = linalg::dot(&resid, &u);
        let log_det = self.log_det.unwrap_or(0.0);
        Ok(-0.5 * (self.k as f64 * libm::log(2.0 * core::f64::consts::PI) + log_det + quad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dirichlet_laplacian;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn mm_model(modes: usize) -> SpectralModel {
        SpectralModel::new(dirichlet_laplacian(3e-3, modes).unwrap(), vec![1.0; modes], PI).unwrap()
    }

    #[test]
    fn observe_examples() {
        let x = [3.0, -1.0, 7.0, 2.0];
        assert_eq!(Observation::projection(2).unwrap().observe(&x).unwrap(), vec![3.0, -1.0]);
        let e1 = Observation::weights(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(e1.observe(&x).unwrap(), vec![3.0]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let w = Observation::weights(&[vec![s, s, 0.0, 0.0]]).unwrap();
        let got = w.observe(&[1.0, 1.0, 0.0, 0.0]).unwrap()[0];
        assert!((got - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(w.observe(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn observation_validation() {
        assert!(Observation::projection(0).is_err());
        assert!(Observation::weights(&[vec![0.0, 0.0]]).is_err());
        assert!(Observation::weights(&[vec![1.0, 0.0], vec![1.0]]).is_err());
        let p = Observation::projection(5).unwrap();
        assert!(p.at_lag(&mm_model(4), 0.1).is_err());
    }

    #[test]
    fn projection_gives_diagonal_covariance() {
        let model = mm_model(8);
        let at = Observation::projection(3).unwrap().at_lag(&model, 0.7).unwrap();
        let q = model.covariance_eigs(0.7);
        for i in 0..3 {
            for l in 0..3 {
                let expect = if i == l { q[i] } else { 0.0 };
                assert_eq!(at.r_matrix()[i * 3 + l], expect);
            }
        }
        assert_eq!(at.min_eigenvalue(), q[..3].iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(at.max_eigenvalue(), q[..3].iter().cloned().fold(0.0, f64::max));

        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        let at1 = Observation::weights(&[w]).unwrap().at_lag(&model, 0.7).unwrap();
        assert_eq!(at1.r_matrix(), &[q[0]]);
    }

    #[test]
    fn weighted_covariance_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let model = mm_model(8);
        let rows: Vec<Vec<f64>> = (0..2).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let at = Observation::weights(&rows).unwrap().at_lag(&model, 0.3).unwrap();
        let a = dirichlet_laplacian(3e-3, 8).unwrap();
        for i in 0..2 {
            for l in 0..2 {
                let mut s = 0.0;
                for j in 0..8 {
                    let qj = (1.0 - (-2.0 * a[j] * 0.3f64).exp()) / (2.0 * a[j]);
                    s += rows[i][j] * rows[l][j] * qj;
                }
                assert!((at.r_matrix()[i * 2 + l] - s).abs() < 1e-12);
            }
        }
        for i in 0..2 {
            for j in 0..8 {
                let expect = rows[i][j] * (-a[j] * 0.3f64).exp();
                assert!((at.l_matrix()[i * 8 + j] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn canonical_form_gives_identical_covariance() {
        let model = mm_model(10);
        let p = Observation::projection(4).unwrap();
        let w = p.canonicalize(10).unwrap();
        for lag in [1e-4, 0.01, 0.5, 1.0] {
            let a = p.at_lag(&model, lag).unwrap();
            let b = w.at_lag(&model, lag).unwrap();
            for (x, y) in a.r_matrix().iter().zip(b.r_matrix()) {
                assert!((x - y).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn r_inverse_examples() {
        // diag(2, 4) via a projection with q_j(Δ) arranged to be 2 and 4.
        let model = SpectralModel::new(vec![1e-9, 1e-9], vec![2.0, 4.0], PI).unwrap();
        let at = Observation::projection(2).unwrap().at_lag(&model, 1.0).unwrap();
        let u = at.r_inv_apply(&[2.0, 4.0]).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-8 && (u[1] - 1.0).abs() < 1e-8);

        let id = SpectralModel::new(vec![1e-12], vec![1.0], PI).unwrap();
        let at = Observation::projection(1).unwrap().at_lag(&id, 1.0).unwrap();
        assert!((at.r_inv_apply(&[3.5]).unwrap()[0] - 3.5).abs() < 1e-10);
        assert!(at.r_inv_apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_lag_has_no_factor() {
        let at = Observation::projection(2).unwrap().at_lag(&mm_model(4), 0.0).unwrap();
        assert!(at.cholesky_factor().is_none());
        assert!(matches!(at.r_inv_apply(&[1.0, 1.0]), Err(Error::FactorizationFailure { .. })));
    }

    #[test]
    fn rank_deficient_weights_fail_to_factorize() {
        let row = vec![1.0, 0.5, 0.0, 0.0];
        let obs = Observation::weights(&[row.clone(), row]).unwrap();
        assert!(matches!(obs.at_lag(&mm_model(4), 0.5), Err(Error::FactorizationFailure { .. })));
    }

    #[test]
    fn log_density_scalar_gaussian() {
        let model = SpectralModel::new(vec![1.0], vec![1.0], PI).unwrap();
        let at = Observation::projection(1).unwrap().at_lag(&model, 1.0).unwrap();
        let got = at.log_density(&[0.0], &[0.0]).unwrap();
        let q1 = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((got + 0.5 * (2.0 * PI * q1).ln()).abs() < 1e-14);
        assert!((got - (-0.499_667)).abs() < 1e-5);
    }

    #[test]
    fn diagnostic_on_unit_mode() {
        let model = SpectralModel::new(vec![1.0], vec![1.0], PI).unwrap();
        let lags: Vec<f64> = (0..=30).map(|i| 1e-4 * 10f64.powf(i as f64 / 10.0)).collect();
        let rep = Observation::projection(1).unwrap().blowup_diagnostic(&model, &lags).unwrap();
        assert!((0.99..=1.01).contains(&rep.p_hat), "{}", rep.p_hat);
        assert!(rep.c_lower > 0.0 && rep.c_lower <= rep.c_upper);
        assert!(Observation::projection(1).unwrap().blowup_diagnostic(&model, &[0.1]).is_err());
        assert!(Observation::projection(1)
            .unwrap()
            .blowup_diagnostic(&model, &[0.01, 0.02])
            .is_err());
    }

    #[test]
    fn diagnostic_on_mm_projection() {
        let model = mm_model(100);
        let lags: Vec<f64> = (0..=20).map(|i| 1e-4 * 10f64.powf(i as f64 * 0.15)).collect();
        let rep = Observation::projection(10).unwrap().blowup_diagnostic(&model, &lags).unwrap();
        assert!((rep.p_hat - 1.0).abs() < 0.1, "{}", rep.p_hat);
    }

    proptest! {
        #[test]
        fn quadratic_form_nondecreasing_in_lag(seed in 0u64..500, l1 in 1e-3f64..1.0, dl in 0.0f64..1.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let model = mm_model(6);
            let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let obs = Observation::weights(&rows).unwrap();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let quad = |lag: f64| {
                let r = obs.at_lag(&model, lag).unwrap().r_matrix().to_vec();
                (0..3).map(|i| (0..3).map(|l| v[i] * r[i * 3 + l] * v[l]).sum::<f64>()).sum::<f64>()
            };
            prop_assert!(quad(l1 + dl) >= quad(l1) - 1e-14);
        }
    }
}
