//! Drift nonlinearities in spectral coordinates.
//!
//! Nemytskii terms are evaluated pseudo-spectrally: synthesise the field on
//! the physical grid, apply the scalar map pointwise, project back. The Amari
//! integral operator additionally applies a precomputed trapezoid quadrature
//! of its connectivity kernel between the two transforms.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::dot;
use crate::spectral::PhysicalGrid;
use crate::{Error, Result};

/// Parameters of the difference-of-Gaussians Amari field
/// `F(X) = T_f s_θ(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmariParams {
    pub a1: f64,
    pub a2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub theta: f64,
    /// Slope `β` of the logistic activation `s(u) = 1 / (1 + e^{-βu})`.
    pub slope: f64,
}

impl AmariParams {
    pub const DEFAULT_SLOPE: f64 = 5.0;

    /// Connectivity kernel `A1 e^{-d²/2σ1²} − A2 e^{-d²/2σ2²}`.
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        let d2 = (x - y) * (x - y);
        self.a1 * libm::exp(-d2 / (2.0 * self.sigma1 * self.sigma1))
            - self.a2 * libm::exp(-d2 / (2.0 * self.sigma2 * self.sigma2))
    }

    pub fn activation(&self, u: f64) -> f64 {
        1.0 / (1.0 + libm::exp(-self.slope * (u - self.theta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearityKind {
    Zero,
    /// `f(x) = ζ1 x² / (1 + ζ2 x²)`.
    MichaelisMenten { zeta1: f64, zeta2: f64 },
    /// `f(x) = ζ (x − x³)`.
    AllenCahn { zeta: f64 },
    Amari(AmariParams),
}

impl NonlinearityKind {
    fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive and finite"))
            }
        };
        match *self {
            NonlinearityKind::Zero => Ok(()),
            NonlinearityKind::MichaelisMenten { zeta1, zeta2 } => {
                pos("nonlinearity.zeta1", zeta1)?;
                pos("nonlinearity.zeta2", zeta2)
            }
            NonlinearityKind::AllenCahn { zeta } => pos("nonlinearity.zeta", zeta),
            NonlinearityKind::Amari(p) => {
                pos("nonlinearity.A1", p.a1)?;
                pos("nonlinearity.A2", p.a2)?;
                pos("nonlinearity.sigma1", p.sigma1)?;
                pos("nonlinearity.sigma2", p.sigma2)?;
                pos("nonlinearity.s", p.slope)?;
                if p.theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("nonlinearity.theta", "must be finite"))
                }
            }
        }
    }
}

/// Scratch buffers for [`Nonlinearity::eval_into`].
#[derive(Debug, Clone)]
pub struct Workspace {
    field: Vec<f64>,
    image: Vec<f64>,
}

impl Workspace {
    pub fn new(grid_len: usize) -> Self {
        Workspace {
            field: vec![0.0; grid_len],
            image: vec![0.0; grid_len],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    grid: PhysicalGrid,
    /// Amari only: `M × M` quadrature matrix of `T_f` on the interior nodes.
    kernel: Vec<f64>,
    /// Amari only: boundary-node trapezoid contribution per interior node,
    /// where the field vanishes and `s_θ` takes the value `s(−θ)`.
    boundary: Vec<f64>,
}

impl Nonlinearity {
    pub fn new(kind: NonlinearityKind, grid: PhysicalGrid) -> Result<Self> {
        kind.validate()?;
        let (kernel, boundary) = match kind {
            NonlinearityKind::Amari(p) => {
                let m = grid.len();
                let h = grid.spacing();
                let len = grid.domain_length();
                let xs = grid.points();
                let mut kernel = vec![0.0; m * m];
                let mut boundary = vec![0.0; m];
                let s_edge = p.activation(0.0);
                for (i, &x) in xs.iter().enumerate() {
                    for (l, &y) in xs.iter().enumerate() {
                        kernel[i * m + l] = h * p.kernel(x, y);
                    }
                    boundary[i] = 0.5 * h * (p.kernel(x, 0.0) + p.kernel(x, len)) * s_edge;
                }
                (kernel, boundary)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Nonlinearity {
            kind,
            grid,
            kernel,
            boundary,
        })
    }

    pub fn zero(grid: PhysicalGrid) -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Zero,
            grid,
            kernel: Vec::new(),
            boundary: Vec::new(),
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn grid(&self) -> &PhysicalGrid {
        &self.grid
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    /// Whether the drift is globally bounded and Lipschitz, which the
    /// absolute-continuity theory for guided proposals assumes.
    pub fn covered_by_theory(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::AllenCahn { .. })
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.grid.len())
    }

    /// Writes `F(t, x)` in spectral coordinates into `out`.
    pub fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64], ws: &mut Workspace) {
        if self.is_zero() {
            out.fill(0.0);
            return;
        }
        self.grid.to_physical_into(x, &mut ws.field);
        self.map_field(ws);
        self.grid.to_spectral_into(&ws.image, out);
    }

    /// Applies the pointwise or integral map to `ws.field`, leaving the
    /// resulting field in `ws.image`.
    fn map_field(&self, ws: &mut Workspace) {
        let Workspace { field, image } = ws;
        match self.kind {
            NonlinearityKind::Zero => image.fill(0.0),
            NonlinearityKind::MichaelisMenten { zeta1, zeta2 } => {
                for (v, u) in image.iter_mut().zip(field.iter()) {
                    let u2 = u * u;
                    *v = zeta1 * u2 / (1.0 + zeta2 * u2);
                }
            }
            NonlinearityKind::AllenCahn { zeta } => {
                for (v, u) in image.iter_mut().zip(field.iter()) {
                    *v = zeta * (u - u * u * u);
                }
            }
            NonlinearityKind::Amari(p) => {
                for u in field.iter_mut() {
                    *u = p.activation(*u);
                }
                let m = self.grid.len();
                for ((img, row), b) in image.iter_mut().zip(self.kernel.chunks_exact(m)).zip(&self.boundary) {
                    *img = dot(row, field) + b;
                }
            }
        }
    }

    /// `F` applied to a field given by its values on the physical grid,
    /// returned in spectral coordinates.
    pub fn eval_field(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.grid.len() {
            return Err(Error::mismatch("grid values", self.grid.len(), values.len()));
        }
        let mut ws = self.workspace();
        ws.field.copy_from_slice(values);
        self.map_field(&mut ws);
        self.grid.to_spectral(&ws.image)
    }

    pub fn eval_spectral(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.grid.modes() {
            return Err(Error::mismatch("spectral state", self.grid.modes(), x.len()));
        }
        let mut out = vec![0.0; x.len()];
        let mut ws = self.workspace();
        self.eval_into(t, x, &mut out, &mut ws);
        Ok(out)
    }

    /// Supremum of `|F(x)(ξ)|` over states and positions, when finite.
    pub fn pointwise_bound(&self) -> Option<f64> {
        match self.kind {
            NonlinearityKind::Zero => Some(0.0),
            NonlinearityKind::MichaelisMenten { zeta1, zeta2 } => Some(zeta1 / zeta2),
            NonlinearityKind::AllenCahn { .. } => None,
            NonlinearityKind::Amari(p) => Some(p.a1.max(p.a2) * self.grid.domain_length()),
        }
    }

    /// Bound on `‖F(x)‖_H`: the pointwise bound times `√L`.
    pub fn hilbert_bound(&self) -> Option<f64> {
        self.pointwise_bound().map(|b| b * libm::sqrt(self.grid.domain_length()))
    }

    /// Global Lipschitz constant of `F` on `H`, when finite.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        match self.kind {
            NonlinearityKind::Zero => Some(0.0),
            // sup |f'| is attained at x² = 1/(3ζ2).
            NonlinearityKind::MichaelisMenten { zeta1, zeta2 } => Some(9.0 / 8.0 * zeta1 / libm::sqrt(3.0 * zeta2)),
            NonlinearityKind::AllenCahn { .. } => None,
            // ‖T_f‖ ≤ ‖f‖_∞ L, Lip(s) = β/4.
            NonlinearityKind::Amari(p) => Some(p.a1.max(p.a2) * self.grid.domain_length() * p.slope / 4.0),
        }
    }
}
