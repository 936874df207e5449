//! Diffusion bridges for diagonalisable semilinear SPDEs.
//!
//! The crate simulates the mild solution of
//!
//! ```text
//! dX_t = (A X_t + F(X_t)) dt + Q^{1/2} dW_t
//! ```
//!
//! in the shared eigenbasis of `A` and `Q`, and conditions it on a linear
//! observation `L X_T = y` through a guided process: the drift is augmented
//! with `Q G(t, x)`, where `G` is the score of the Gaussian (`F = 0`)
//! transition density of `L X_T`. The path weight `log Ψ` corrects the
//! guided law back to the bridge law, which the Metropolis-Hastings sampler
//! in [`samplers`] exploits. A correlated pseudo-marginal sampler for the
//! density of `L X_T` sits on top of the same machinery.
//!
//! Everything here is pure computation over `alloc` collections. File formats,
//! configuration and parallel orchestration live in the `spde-bridge` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod nonlinearity;
pub mod observation;
pub mod oracles;
pub mod rng;
pub mod samplers;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use nonlinearity::{AmariParams, Nonlinearity, NonlinearityKind};
pub use observation::{BlowupReport, Observation, ObservationAtLag};
pub use rng::{Role, StreamKey};
pub use samplers::{ChainReport, CpmConfig, MhConfig, Probe, TraceEntry};
pub use solver::{GuidedRun, GuidedSolver, NoiseDraft, Path, TimeGrid};
pub use spectral::{PhysicalGrid, SpectralModel, TraceDiagnostic};
