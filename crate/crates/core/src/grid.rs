//! Uniform periodic grid on the unit square.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform n-by-n discretization of [0,1)^2 with wrap-around indexing.
///
/// Node (i, j) sits at (i*h, j*h) with h = 1/n; index arithmetic wraps
/// modulo n on both axes so the seam at x=1 is identified with x=0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points per axis, got {n}"
            )));
        }
        Ok(Self { n })
    }

    /// Points per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, n^2.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Space step h = 1/n.
    #[inline]
    pub fn h<T: Scalar>(&self) -> T {
        T::one() / T::from_grid(self.n)
    }

    /// Flat row-major index of node (i, j), already in range.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        i * self.n + j
    }

    /// Wraps a possibly out-of-range signed offset index onto the grid.
    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        let n = self.n as isize;
        i.rem_euclid(n) as usize
    }

    /// Coordinate of node index i along one axis.
    #[inline]
    pub fn coord<T: Scalar>(&self, i: usize) -> T {
        T::from_grid(i) * self.h::<T>()
    }

    /// (x1, x2) coordinates of node (i, j).
    #[inline]
    pub fn point<T: Scalar>(&self, i: usize, j: usize) -> (T, T) {
        (self.coord(i), self.coord(j))
    }

    pub fn require_even(&self) -> Result<()> {
        if !self.n.is_multiple_of(2) {
            return Err(Error::OddGrid(self.n));
        }
        Ok(())
    }

    pub fn require_power_of_two(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.n));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_times_n_is_one() {
        for n in [2usize, 8, 16, 100, 256] {
            let g = PeriodicGrid::new(n).unwrap();
            assert_eq!(g.h::<f64>() * n as f64, 1.0);
        }
    }

    #[test]
    fn wrap_is_modular_on_both_sides() {
        let g = PeriodicGrid::new(8).unwrap();
        assert_eq!(g.wrap(-1), 7);
        assert_eq!(g.wrap(8), 0);
        assert_eq!(g.wrap(-9), 7);
        assert_eq!(g.wrap(17), 1);
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(PeriodicGrid::new(1).is_err());
        assert!(PeriodicGrid::new(0).is_err());
    }
}
