//! Target-density access for the composition terms g(x + grad u).
//!
//! When the target density is known in closed form the compositions are
//! evaluated directly; when it only exists as grid data they are read off
//! the grid by nearest-neighbour or bilinear interpolation, with the
//! gradient precomputed by fourth-order stencils.

use crate::error::{Error, Result};
use crate::field::{SampleMode, ScalarField};
use crate::scalar::Scalar;
use crate::stencil::{gradient, DiffOrder};

/// Pointwise access to a 1-periodic density and its gradient, at arbitrary
/// points of the plane.
pub trait DensitySource<T: Scalar>: Sync {
    fn value_at(&self, p: (T, T)) -> T;
    fn grad_at(&self, p: (T, T)) -> (T, T);
}

/// Grid-backed density; compositions are interpolated and the gradient
/// comes from fourth-order stencils sampled the same way.
pub struct SampledDensity<T> {
    field: ScalarField<T>,
    grad1: ScalarField<T>,
    grad2: ScalarField<T>,
    mode: SampleMode,
}

impl<T: Scalar> SampledDensity<T> {
    pub fn new(field: ScalarField<T>, mode: SampleMode) -> Result<Self> {
        let (grad1, grad2) = gradient(&field, DiffOrder::Four)?;
        Ok(Self {
            field,
            grad1,
            grad2,
            mode,
        })
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.field
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }
}

impl<T: Scalar> DensitySource<T> for SampledDensity<T> {
    fn value_at(&self, p: (T, T)) -> T {
        self.field.sample(p, self.mode)
    }

    fn grad_at(&self, p: (T, T)) -> (T, T) {
        (
            self.grad1.sample(p, self.mode),
            self.grad2.sample(p, self.mode),
        )
    }
}

/// Density given by closures for the value and the gradient.
pub struct FnDensity<V, G> {
    pub value: V,
    pub grad: G,
}

impl<T, V, G> DensitySource<T> for FnDensity<V, G>
where
    T: Scalar,
    V: Fn((T, T)) -> T + Sync,
    G: Fn((T, T)) -> (T, T) + Sync,
{
    fn value_at(&self, p: (T, T)) -> T {
        (self.value)(p)
    }

    fn grad_at(&self, p: (T, T)) -> (T, T) {
        (self.grad)(p)
    }
}

/// The trigonometric benchmark density 1 + alpha cos(2 pi rho x1) cos(2 pi rho x2).
#[derive(Debug, Clone, Copy)]
pub struct TrigDensity<T> {
    pub alpha: T,
    pub rho: T,
}

impl<T: Scalar> TrigDensity<T> {
    pub fn new(alpha: T, rho: T) -> Result<Self> {
        if alpha.abs() >= T::one() {
            return Err(Error::InvalidDensity(format!(
                "|alpha| must be < 1 for a positive density, got {alpha}"
            )));
        }
        Ok(Self { alpha, rho })
    }

    pub fn to_field(&self, grid: crate::grid::PeriodicGrid) -> ScalarField<T> {
        ScalarField::from_fn(grid, |x1, x2| self.value_at((x1, x2)))
    }
}

impl<T: Scalar> DensitySource<T> for TrigDensity<T> {
    fn value_at(&self, p: (T, T)) -> T {
        let w = T::TAU() * self.rho;
        T::one() + self.alpha * (w * p.0).cos() * (w * p.1).cos()
    }

    fn grad_at(&self, p: (T, T)) -> (T, T) {
        let w = T::TAU() * self.rho;
        let aw = self.alpha * w;
        (
            -aw * (w * p.0).sin() * (w * p.1).cos(),
            -aw * (w * p.0).cos() * (w * p.1).sin(),
        )
    }
}

/// Validated source/target pair: both positive (floored at construction)
/// with unit mean.
#[derive(Debug, Clone)]
pub struct DensityPair<T> {
    f: ScalarField<T>,
    g: ScalarField<T>,
}

impl<T: Scalar> DensityPair<T> {
    /// Checks positivity against `floor` and unit mean to 1e-12.
    pub fn new(f: ScalarField<T>, g: ScalarField<T>, floor: T) -> Result<Self> {
        if f.grid() != g.grid() {
            return Err(Error::GridMismatch(f.n(), g.n()));
        }
        if floor <= T::zero() {
            return Err(Error::InvalidDensity(
                "positivity floor must be strictly positive".into(),
            ));
        }
        for (name, d) in [("f", &f), ("g", &g)] {
            if !d.all_finite() {
                return Err(Error::NonFinite("density"));
            }
            if d.min_value() < floor {
                return Err(Error::InvalidDensity(format!(
                    "density {name} falls below the floor {floor} (min {})",
                    d.min_value()
                )));
            }
            let drift = (d.mean() - T::one()).abs();
            if drift > T::cast(1e-12) {
                return Err(Error::InvalidDensity(format!(
                    "density {name} has mean {} (must be 1 within 1e-12)",
                    d.mean()
                )));
            }
        }
        Ok(Self { f, g })
    }

    pub fn f(&self) -> &ScalarField<T> {
        &self.f
    }

    pub fn g(&self) -> &ScalarField<T> {
        &self.g
    }

    pub fn grid(&self) -> crate::grid::PeriodicGrid {
        self.f.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;

    #[test]
    fn pair_enforces_floor_and_mean() {
        let g = PeriodicGrid::new(8).unwrap();
        let ones = ScalarField::<f64>::constant(g, 1.0);
        assert!(DensityPair::new(ones.clone(), ones.clone(), 0.1).is_ok());

        let shifted = ScalarField::<f64>::constant(g, 1.5);
        assert!(DensityPair::new(shifted, ones.clone(), 0.1).is_err());

        let dips = ScalarField::<f64>::from_fn(g, |x1: f64, _| {
            1.0 + 0.99 * (std::f64::consts::TAU * x1).cos()
        });
        assert!(DensityPair::new(dips, ones, 0.1).is_err());
    }

    #[test]
    fn trig_density_gradient_matches_finite_difference() {
        let d = TrigDensity::<f64>::new(0.5, 1.0).unwrap();
        let p = (0.13, 0.57);
        let eps = 1e-6;
        let g = d.grad_at(p);
        let fd1 = (d.value_at((p.0 + eps, p.1)) - d.value_at((p.0 - eps, p.1))) / (2.0 * eps);
        let fd2 = (d.value_at((p.0, p.1 + eps)) - d.value_at((p.0, p.1 - eps))) / (2.0 * eps);
        assert!((g.0 - fd1).abs() < 1e-8);
        assert!((g.1 - fd2).abs() < 1e-8);
    }

    #[test]
    fn sampled_density_reads_grid_values_at_nodes() {
        let grid = PeriodicGrid::new(16).unwrap();
        let field = ScalarField::<f64>::from_fn(grid, |x1, x2| {
            1.0 + 0.3 * (std::f64::consts::TAU * x1).cos() * (std::f64::consts::TAU * x2).cos()
        });
        let d = SampledDensity::new(field.clone(), SampleMode::Bilinear).unwrap();
        for i in [0usize, 3, 9] {
            for j in [1usize, 8, 15] {
                let p = grid.point::<f64>(i, j);
                assert!((d.value_at(p) - field.get(i, j)).abs() < 1e-15);
            }
        }
    }
}
