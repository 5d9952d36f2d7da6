//! Solvers for inverse problems constrained to the range of a generator network.
//!
//! The problem template is
//!
//! ```text
//! minimize  L(w) + R(w) + H(z)   subject to  w = G(z)
//! ```
//!
//! where `L` is smooth and convex, `R` and `H` are convex with cheap proximal
//! maps, and `G` is a small feedforward network. The crate provides:
//!
//! * [`generator`]: feedforward generators, Jacobians, vector-Jacobian
//!   products and sampling estimators of their geometric constants.
//! * [`prox`]: proximal maps and projections for the non-smooth terms.
//! * [`loss`]: smooth convex losses with their convexity/smoothness constants.
//! * [`admm`]: the augmented Lagrangian, linearized ADMM, the exact
//!   `w`-minimization variant and the multi-scale penalty driver.
//! * [`gd`]: gradient descent on `L(G(z))` and its one-step relation to ADMM.
//! * [`rate`]: empirical linear-rate and plateau fitting on run traces.
//! * [`instance`]: planted synthetic instances with a known solution.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and
//! parallel sweeps live in the `genprior` crate.

#![no_std]

extern crate alloc;

pub mod admm;
pub mod error;
pub mod gd;
pub mod generator;
pub mod instance;
pub mod loss;
pub mod prox;
pub mod rate;

mod linalg;

#[cfg(any(test, feature = "oracles"))]
pub mod oracle;

pub use admm::{
    AdmmConfig, AdmmState, IterRecord, Multiscale, Problem, RunFailure, RunTrace, StageInfo,
    WStep,
};
pub use error::Error;
pub use gd::GdConfig;
pub use generator::{Activation, FeedforwardGenerator, GeometryEstimate, Generator, Layer};
pub use instance::{InstanceSpec, PlantedInstance, ProblemKind};
pub use loss::{LossKind, SmoothLoss, SmoothObjective};
pub use prox::Regularizer;
pub use rate::RateFit;

/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Wall-clock source for trace timestamps.
///
/// The core has no access to a clock; callers that want timings pass one in.
pub trait Clock {
    /// Nanoseconds elapsed since some fixed origin.
    fn now_ns(&self) -> u64;
}

/// A clock that always reads zero, giving reproducible traces.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ns(&self) -> u64 {
        0
    }
}
