//! Solver for the L2 optimal transport problem between 1-periodic
//! probability densities on the unit square.
//!
//! The convex potential of the optimal map is computed by a damped Newton
//! iteration on the Monge-Ampere equation written for the periodic
//! perturbation u of |x|^2/2. Each step linearizes the forward operator
//! and solves the resulting variable-coefficient elliptic equation with
//! one of two matrix-free backends:
//!
//! * [`ma::Backend::Fft`]: preconditioning by the constant-coefficient
//!   averaged operator, which is diagonal in Fourier space, with restarted
//!   GMRES on the preconditioned system;
//! * [`ma::Backend::Fd`]: assembled second-order stencils with the
//!   zero-mean rank fix, solved by BiCG.
//!
//! Everything is generic over the scalar type ([`Scalar`]); `f64` aliases
//! for the main types are exported at the crate root.

pub mod density;
pub mod error;
pub mod fd;
pub mod fft;
pub mod field;
pub mod grid;
pub mod imaging;
pub mod krylov;
pub mod ma;
pub mod scalar;
pub mod stencil;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 specializations of the core types.
pub type Grid = grid::PeriodicGrid;
pub type Field = field::ScalarField<f64>;
pub type Vector2Field = field::VectorField<f64>;
pub type Pair = density::DensityPair<f64>;
pub type Config = ma::NewtonConfig<f64>;
pub type Report = ma::SolveReport<f64>;
pub type Problem = synthetic::TrigProblem<f64>;
pub type Image = imaging::GrayImage<f64>;
