//! Small dense linear algebra on row-major `f64` buffers.
//!
//! Observation dimensions stay small (k ≤ 32), so these routines favour
//! clarity over blocking. [`dot`] is the exception: it sits in the inner loop
//! of every spectral transform and is written to auto-vectorise.

use alloc::vec;
use alloc::vec::Vec;

/// Dot product with four independent accumulators.
///
/// The summation order is fixed, so results are reproducible across runs
/// for a given target.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `out = m * x` for an `rows × cols` row-major matrix.
pub fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// `out = mᵀ u` for an `rows × cols` row-major matrix.
pub fn matvec_transposed(m: &[f64], rows: usize, cols: usize, u: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    out[..cols].fill(0.0);
    for (ui, row) in u.iter().zip(m.chunks_exact(cols)) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += ui * r;
        }
    }
}

/// Outcome of a failed Cholesky factorisation: the offending pivot and the
/// tolerance it was compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub index: usize,
    pub pivot: f64,
    pub tolerance: f64,
}

/// Lower-triangular Cholesky factor of a symmetric `n × n` matrix.
///
/// A pivot is rejected when it is not above `rel_tol × max diagonal entry`.
pub fn cholesky(a: &[f64], n: usize, rel_tol: f64) -> Result<Vec<f64>, PivotFailure> {
    debug_assert_eq!(a.len(), n * n);
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    let tolerance = rel_tol * max_diag;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            if i == j {
                if !(s > tolerance) {
                    return Err(PivotFailure {
                        index: i,
                        pivot: s,
                        tolerance,
                    });
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ u = v` in place given the lower factor `l`.
pub fn cholesky_solve_in_place(l: &[f64], n: usize, v: &mut [f64]) {
    for i in 0..n {
        let s = v[i] - dot(&l[i * n..i * n + i], &v[..i]);
        v[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = v[i];
        for j in i + 1..n {
            s -= l[j * n + i] * v[j];
        }
        v[i] = s / l[i * n + i];
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Diagonal input is returned untouched, so diagonal covariance structure
/// is reproduced exactly.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}
