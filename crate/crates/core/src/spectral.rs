//! Diagonalisable drift/noise pairs and the sine eigenbasis.
//!
//! Spectral coordinates are taken with respect to the orthonormal basis
//! `e_j(ξ) = √(2/L) sin(jπξ/L)` of `L²([0, L])`, so `noise_eigs[j]` is the
//! variance rate of mode `j` and Euclidean inner products of coefficient
//! vectors are Hilbert-space inner products.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::dot;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    drift_eigs: Vec<f64>,
    noise_eigs: Vec<f64>,
    domain_length: f64,
}

/// Eigenvalue of `Q_t` for a single mode.
///
/// `q (1 - e^{-2at}) / (2a)`, with the `a → 0` limit `q t`.
#[inline]
pub fn covariance_eig(a: f64, q: f64, t: f64) -> f64 {
    if a == 0.0 {
        q * t
    } else {
        -q * libm::expm1(-2.0 * a * t) / (2.0 * a)
    }
}

impl SpectralModel {
    /// Builds a model from eigenvalue sequences `a_j > 0` and `q_j ≥ 0`.
    pub fn new(drift_eigs: Vec<f64>, noise_eigs: Vec<f64>, domain_length: f64) -> Result<Self> {
        if drift_eigs.is_empty() {
            return Err(Error::invalid("modes", "at least one mode is required"));
        }
        if drift_eigs.len() != noise_eigs.len() {
            return Err(Error::mismatch("noise eigenvalues", drift_eigs.len(), noise_eigs.len()));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::invalid("domain_length", "must be positive and finite"));
        }
        if drift_eigs.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("drift_eigs", "must be positive and finite"));
        }
        if noise_eigs.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
            return Err(Error::invalid("noise_eigs", "must be nonnegative and finite"));
        }
        Ok(SpectralModel {
            drift_eigs,
            noise_eigs,
            domain_length,
        })
    }

    pub fn modes(&self) -> usize {
        self.drift_eigs.len()
    }

    pub fn drift_eigs(&self) -> &[f64] {
        &self.drift_eigs
    }

    pub fn noise_eigs(&self) -> &[f64] {
        &self.noise_eigs
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    /// Eigenvalues `q_j(t)` of the time-integrated covariance `Q_t`.
    pub fn covariance_eigs(&self, t: f64) -> Vec<f64> {
        self.drift_eigs
            .iter()
            .zip(&self.noise_eigs)
            .map(|(&a, &q)| covariance_eig(a, q, t))
            .collect()
    }

    /// Semigroup factors `exp(-a_j t)`.
    pub fn semigroup_factors(&self, t: f64) -> Vec<f64> {
        self.drift_eigs.iter().map(|a| libm::exp(-a * t)).collect()
    }

    /// Partial sums of `q_j / a_j` and an estimate of their tail decay.
    pub fn trace_diagnostic(&self) -> TraceDiagnostic {
        let mut acc = 0.0;
        let partial_sums: Vec<f64> = self
            .drift_eigs
            .iter()
            .zip(&self.noise_eigs)
            .map(|(a, q)| {
                acc += q / a;
                acc
            })
            .collect();

        // Least-squares slope of log(q_j/a_j) against log j over the upper half.
        let j_count = self.modes();
        let decay_exponent = if j_count >= 4 {
            let pts: Vec<(f64, f64)> = (j_count / 2..j_count)
                .filter(|&i| self.noise_eigs[i] > 0.0)
                .map(|i| {
                    (
                        libm::log((i + 1) as f64),
                        libm::log(self.noise_eigs[i] / self.drift_eigs[i]),
                    )
                })
                .collect();
            least_squares_slope(&pts).map(|s| -s)
        } else {
            None
        };
        TraceDiagnostic {
            partial_sums,
            decay_exponent,
        }
    }
}

/// Finite-`J` view of the trace condition `Σ q_j / a_j < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDiagnostic {
    pub partial_sums: Vec<f64>,
    /// Estimated `s` in `q_j / a_j ~ j^{-s}`; summability needs `s > 1`.
    pub decay_exponent: Option<f64>,
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    least_squares_line(pts).map(|(slope, _)| slope)
}

/// Returns `(slope, intercept)` of the least-squares line through `pts`.
pub(crate) fn least_squares_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be nonnegative and finite"))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be positive and finite"))
    }
}

fn check_modes(modes: usize) -> Result<()> {
    if modes == 0 {
        Err(Error::invalid("modes", "at least one mode is required"))
    } else {
        Ok(())
    }
}

/// Dirichlet Laplacian on `[0, π]` scaled by `eta`: `a_j = η j²`.
pub fn dirichlet_laplacian(eta: f64, modes: usize) -> Result<Vec<f64>> {
    check_positive("eta", eta)?;
    check_modes(modes)?;
    Ok((1..=modes).map(|j| eta * (j * j) as f64).collect())
}

/// Linear damping `A = -Id`: `a_j = 1` for every mode.
pub fn damping(modes: usize) -> Result<Vec<f64>> {
    check_modes(modes)?;
    Ok(vec![1.0; modes])
}

/// Spatially white noise `Q = σ² Id`. `σ = 0` gives the deterministic PDE.
pub fn white_noise(sigma: f64, modes: usize) -> Result<Vec<f64>> {
    check_nonnegative("sigma", sigma)?;
    check_modes(modes)?;
    Ok(vec![sigma * sigma; modes])
}

/// Power-law spectrum `q_j = σ² j^{-r}`, `r ≥ 0`.
pub fn power_law_noise(sigma: f64, r: f64, modes: usize) -> Result<Vec<f64>> {
    check_nonnegative("sigma", sigma)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", "must be nonnegative and finite"));
    }
    check_modes(modes)?;
    Ok((1..=modes).map(|j| sigma * sigma * libm::pow(j as f64, -r)).collect())
}

/// Matérn spectrum `q_j = σ0² (ρ^{-2} + (2πj)²)^{-(1/2 + ν)}`.
pub fn matern_noise(sigma0: f64, rho: f64, nu: f64, modes: usize) -> Result<Vec<f64>> {
    check_positive("sigma0", sigma0)?;
    check_positive("rho", rho)?;
    check_positive("nu", nu)?;
    check_modes(modes)?;
    Ok((1..=modes)
        .map(|j| {
            let w = 2.0 * PI * j as f64;
            sigma0 * sigma0 * libm::pow(1.0 / (rho * rho) + w * w, -(0.5 + nu))
        })
        .collect())
}

/// Uniform interior grid `ξ_m = m L / (M + 1)`, `m = 1..M`, with dense
/// synthesis and analysis matrices for the orthonormal sine basis.
///
/// On this grid the discrete sine system is exactly orthogonal, so
/// `to_spectral` inverts `to_physical` whenever `M ≥ J`.
///
/// The matrices are stored folded: `e_j(L − ξ) = (−1)^{j+1} e_j(ξ)`, so odd
/// and even modes are synthesised separately on the left half of the grid
/// and mirrored, which halves the work of both transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalGrid {
    modes: usize,
    points: Vec<f64>,
    domain_length: f64,
    /// Number of mirrored pairs `(ξ_m, L − ξ_m)`.
    pairs: usize,
    /// Rows in the folded matrices: `pairs`, plus the midpoint when `M` is odd.
    rows: usize,
    /// `rows × ⌈J/2⌉`, `e_j(ξ_m)` for odd `j`.
    syn_odd: Vec<f64>,
    /// `rows × ⌊J/2⌋`, `e_j(ξ_m)` for even `j`.
    syn_even: Vec<f64>,
    /// `⌈J/2⌉ × rows`, `h e_j(ξ_m)` for odd `j`, `h = L / (M + 1)`.
    ana_odd: Vec<f64>,
    /// `⌊J/2⌋ × rows`, `h e_j(ξ_m)` for even `j`.
    ana_even: Vec<f64>,
}

impl PhysicalGrid {
    pub fn new(modes: usize, points: usize, domain_length: f64) -> Result<Self> {
        check_modes(modes)?;
        check_positive("domain_length", domain_length)?;
        if points < modes {
            return Err(Error::invalid("grid.M", "need at least as many grid points as modes"));
        }
        let h = domain_length / (points + 1) as f64;
        let norm = libm::sqrt(2.0 / domain_length);
        let xs: Vec<f64> = (1..=points).map(|m| m as f64 * h).collect();
        let pairs = points / 2;
        let rows = points - pairs;
        let (n_odd, n_even) = (modes - modes / 2, modes / 2);
        let mut syn_odd = vec![0.0; rows * n_odd];
        let mut syn_even = vec![0.0; rows * n_even];
        let mut ana_odd = vec![0.0; n_odd * rows];
        let mut ana_even = vec![0.0; n_even * rows];
        for r in 0..rows {
            for j in 0..modes {
                // Integer phase keeps sin(jπm/(M+1)) exact up to one rounding.
                let phase = ((j + 1) * (r + 1)) % (2 * (points + 1));
                let v = norm * libm::sin(PI * phase as f64 / (points + 1) as f64);
                let i = j / 2;
                if j % 2 == 0 {
                    syn_odd[r * n_odd + i] = v;
                    ana_odd[i * rows + r] = h * v;
                } else {
                    syn_even[r * n_even + i] = v;
                    ana_even[i * rows + r] = h * v;
                }
            }
        }
        Ok(PhysicalGrid {
            modes,
            points: xs,
            domain_length,
            pairs,
            rows,
            syn_odd,
            syn_even,
            ana_odd,
            ana_even,
        })
    }

    /// Grid with `M = 4J` points, the default resolution for Nemytskii terms.
    pub fn for_modes(modes: usize, domain_length: f64) -> Result<Self> {
        Self::new(modes, 4 * modes, domain_length)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    /// Quadrature weight `h = L / (M + 1)` of every interior node.
    pub fn spacing(&self) -> f64 {
        self.domain_length / (self.points.len() + 1) as f64
    }

    pub fn to_physical_into(&self, coeffs: &[f64], values: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.modes);
        debug_assert_eq!(values.len(), self.points.len());
        let odd: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
        let even: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
        let m = self.points.len();
        let rows_odd = self.syn_odd.chunks_exact(odd.len());
        let even_len = even.len().max(1);
        for (r, row_o) in rows_odd.enumerate() {
            let a = dot(row_o, &odd);
            let b = if even.is_empty() {
                0.0
            } else {
                dot(&self.syn_even[r * even_len..(r + 1) * even_len], &even)
            };
            values[r] = a + b;
            if r < self.pairs {
                values[m - 1 - r] = a - b;
            }
        }
    }

    pub fn to_spectral_into(&self, values: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.modes);
        debug_assert_eq!(values.len(), self.points.len());
        let m = self.points.len();
        let mut sum = vec![0.0; self.rows];
        let mut diff = vec![0.0; self.rows];
        for r in 0..self.pairs {
            let (u, w) = (values[r], values[m - 1 - r]);
            sum[r] = u + w;
            diff[r] = u - w;
        }
        if self.rows > self.pairs {
            sum[self.pairs] = values[self.pairs];
        }
        for (i, row) in self.ana_odd.chunks_exact(self.rows).enumerate() {
            coeffs[2 * i] = dot(row, &sum);
        }
        for (i, row) in self.ana_even.chunks_exact(self.rows).enumerate() {
            coeffs[2 * i + 1] = dot(row, &diff);
        }
    }

    pub fn to_physical(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.modes {
            return Err(Error::mismatch("spectral coefficients", self.modes, coeffs.len()));
        }
        let mut out = vec![0.0; self.points.len()];
        self.to_physical_into(coeffs, &mut out);
        Ok(out)
    }

    pub fn to_spectral(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.points.len() {
            return Err(Error::mismatch("grid values", self.points.len(), values.len()));
        }
        let mut out = vec![0.0; self.modes];
        self.to_spectral_into(values, &mut out);
        Ok(out)
    }

    /// Spectral coefficients of a field given pointwise.
    pub fn project<F: Fn(f64) -> f64>(&self, field: F) -> Vec<f64> {
        let values: Vec<f64> = self.points.iter().map(|&x| field(x)).collect();
        let mut out = vec![0.0; self.modes];
        self.to_spectral_into(&values, &mut out);
        out
    }
}
