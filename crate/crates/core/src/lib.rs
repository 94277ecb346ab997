//! Interior-point path following for convex matrix-function objectives over
//! positive semidefinite matrices.
//!
//! The solver minimizes `Tr(C g(X))` (optionally composed with a linear map)
//! and the quantum relative entropy `Tr(Y₁ ln Y₁) - Tr(Y₁ ln Y₂)` of two
//! Kraus images of `X`, subject to affine trace constraints, by following
//! the central path of `β f + barrier` with damped Newton steps.

pub mod error;
pub mod kkt;
pub mod linmap;
pub mod matfun;
pub mod objectives;
pub mod oracle;
pub mod pathfollow;
pub mod probio;
pub mod qre;

pub use error::{Error, Result};
pub use kkt::{AffineConstraints, NewtonStep};
pub use linmap::{KrausMap, LinearMap, PartialTranspose};
pub use matfun::{Generator, SpectralDecomp, SymMatrix};
pub use objectives::{DerivativeBundle, TraceObjective};
pub use pathfollow::{solve, SolveReport, SolverConfig, Termination};
pub use probio::{Dims, Objective, ProblemKind, ProblemSpec};
pub use qre::QreObjective;
