//! The trigonometric benchmark: a known potential and target density with
//! the source density available in closed form, so solver output can be
//! compared against the exact solution.

use crate::density::TrigDensity;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::PeriodicGrid;
use crate::scalar::Scalar;

/// Benchmark family
///   u(x) = (1/k) cos(2 pi gamma x1) sin(2 pi gamma x2),
///   g(x) = 1 + alpha cos(2 pi rho x1) cos(2 pi rho x2),
/// with the source density f computed from u and g in closed form.
///
/// The Hessian of u has entry amplitude (2 pi gamma)^2 / k, so k must
/// exceed (2 pi gamma)^2 for |x|^2/2 + u to be uniformly convex and f to
/// be a positive density.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrigProblem<T> {
    pub k: T,
    pub gamma: T,
    pub alpha: T,
    pub rho: T,
}

impl<T: Scalar> Default for TrigProblem<T> {
    fn default() -> Self {
        Self {
            k: T::cast(100.0),
            gamma: T::one(),
            alpha: T::cast(0.5),
            rho: T::one(),
        }
    }
}

impl<T: Scalar> TrigProblem<T> {
    /// Amplitude of the Hessian entries of the exact potential.
    pub fn hessian_amplitude(&self) -> T {
        let w = T::TAU() * self.gamma;
        w * w / self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.k <= T::zero() {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if self.hessian_amplitude() >= T::one() {
            return Err(Error::InvalidConfig(format!(
                "k = {} makes I + D2u indefinite: need k > (2 pi gamma)^2 = {}",
                self.k,
                T::TAU() * T::TAU() * self.gamma * self.gamma
            )));
        }
        if self.alpha.abs() >= T::one() {
            return Err(Error::InvalidDensity(
                "|alpha| must be < 1 for a positive target density".into(),
            ));
        }
        Ok(())
    }

    pub fn density(&self) -> Result<TrigDensity<T>> {
        TrigDensity::new(self.alpha, self.rho)
    }

    /// The exact zero-mean potential perturbation on the grid.
    pub fn exact_potential(&self, grid: PeriodicGrid) -> ScalarField<T> {
        let w = T::TAU() * self.gamma;
        let inv_k = T::one() / self.k;
        ScalarField::from_fn(grid, |x1, x2| inv_k * (w * x1).cos() * (w * x2).sin())
    }

    /// Source density f = g(x + grad u) det(I + D2 u) with all derivatives
    /// of the exact potential evaluated analytically.
    pub fn exact_forward_density(&self, grid: PeriodicGrid) -> ScalarField<T> {
        let w = T::TAU() * self.gamma;
        let inv_k = T::one() / self.k;
        let amp = w * w * inv_k;
        let g = TrigDensity {
            alpha: self.alpha,
            rho: self.rho,
        };
        let one = T::one();
        ScalarField::from_fn(grid, |x1, x2| {
            let (sa, ca) = (w * x1).sin_cos();
            let (sb, cb) = (w * x2).sin_cos();
            let u1 = -(w * inv_k) * sa * sb;
            let u2 = (w * inv_k) * ca * cb;
            let u11 = -amp * ca * sb;
            let u22 = -amp * ca * sb;
            let u12 = -amp * sa * cb;
            let det = (one + u11) * (one + u22) - u12 * u12;
            use crate::density::DensitySource;
            g.value_at((x1 + u1, x2 + u2)) * det
        })
    }
}

/// log2 of the ratio of successive errors; the observed order of accuracy
/// for a grid-doubling sweep.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Geometric mean of the last `window` successive residual ratios, skipping
/// entries at or below `floor`. Returns None when fewer than two usable
/// residuals exist.
pub fn late_stage_ratio(residuals: &[f64], window: usize, floor: f64) -> Option<f64> {
    let usable: Vec<f64> = residuals.iter().copied().filter(|&r| r > floor).collect();
    if usable.len() < 2 {
        return None;
    }
    let ratios: Vec<f64> = usable.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(window)..];
    let log_sum: f64 = tail.iter().map(|r| r.ln()).sum();
    Some((log_sum / tail.len() as f64).exp())
}
