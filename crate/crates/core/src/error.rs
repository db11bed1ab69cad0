//! Error type shared across the crate.

use thiserror::Error;

use crate::krylov::KrylovReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {n} points is too small for an order-{order} stencil")]
    GridTooSmall { n: usize, order: usize },

    #[error("Simpson integration requires an even grid size, got n={0}")]
    OddGrid(usize),

    #[error("grids do not match: {0} vs {1} points per axis")]
    GridMismatch(usize, usize),

    #[error("the FFT backend requires a power-of-two grid, got n={0}")]
    NotPowerOfTwo(usize),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    #[error("inner linear solve failed after {} iterations (residual {:.3e})", report.total_inner, report.final_residual)]
    InnerSolve { report: KrylovReport },

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
