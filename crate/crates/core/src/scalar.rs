//! Scalar abstraction: the solver is generic over the floating-point type.

use std::fmt::Display;
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the solver.
///
/// `FftNum` brings `FromPrimitive + Signed + Send + Sync + 'static`, which the
/// spectral backend needs anyway; `f32` and `f64` both qualify.
pub trait Scalar: Float + FloatConst + NumAssign + Sum<Self> + Display + FftNum {
    /// Lossy conversion from `f64`, for literals and tolerances.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable in scalar type")
    }

    /// Exact conversion from a small grid size.
    fn from_grid(n: usize) -> Self {
        Self::from_usize(n).expect("grid size not representable in scalar type")
    }
}

impl<T> Scalar for T where T: Float + FloatConst + NumAssign + Sum<Self> + Display + FftNum {}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pi<T: Scalar>() -> T {
        T::TAU()
    }

    #[test]
    fn casts_roundtrip_for_both_widths() {
        assert_eq!(f64::cast(0.5), 0.5);
        assert_eq!(f32::cast(0.5), 0.5f32);
        assert!((two_pi::<f64>() - std::f64::consts::TAU).abs() < 1e-15);
    }
}
