//! Grid-sampled scalar and vector fields with periodic sampling.

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::scalar::Scalar;

/// Interpolation rule used when a field is read off the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Closest node, ties broken toward the lower index.
    Nearest,
    /// Bilinear blend of the four surrounding nodes, periodic wrap.
    Bilinear,
}

impl std::fmt::Display for SampleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleMode::Nearest => write!(f, "nearest"),
            SampleMode::Bilinear => write!(f, "bilinear"),
        }
    }
}

impl std::str::FromStr for SampleMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(SampleMode::Nearest),
            "bilinear" => Ok(SampleMode::Bilinear),
            other => Err(format!(
                "unknown sample mode '{other}' (expected nearest or bilinear)"
            )),
        }
    }
}

/// Real-valued function sampled on a [`PeriodicGrid`], row-major by (i, j).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: PeriodicGrid,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    /// Field with every node equal to `c`.
    pub fn constant(grid: PeriodicGrid, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn from_fn(grid: PeriodicGrid, mut f: impl FnMut(T, T) -> T) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = grid.point(i, j);
                values.push(f(x1, x2));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: PeriodicGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "field length {} does not match grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("field construction"));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let idx = self.grid.idx(i, j);
        self.values[idx] = v;
    }

    /// Value at (i + di, j + dj) with periodic wrap.
    #[inline]
    pub fn at_offset(&self, i: usize, j: usize, di: isize, dj: isize) -> T {
        let iw = self.grid.wrap(i as isize + di);
        let jw = self.grid.wrap(j as isize + dj);
        self.values[self.grid.idx(iw, jw)]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Arithmetic mean of all node values.
    pub fn mean(&self) -> T {
        let sum: T = self.values.iter().copied().sum();
        sum / T::from_grid(self.grid.len())
    }

    /// Discrete L2 norm on the unit square: sqrt(h^2 * sum v^2).
    pub fn l2_norm(&self) -> T {
        let sum: T = self.values.iter().map(|&v| v * v).sum();
        (sum / T::from_grid(self.grid.len())).sqrt()
    }

    pub fn linf_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Tensor-product composite Simpson approximation of the integral over
    /// the unit square, the wrapped endpoint counted as the first point.
    /// Requires an even grid.
    pub fn simpson_average(&self) -> Result<T> {
        self.grid.require_even()?;
        let n = self.grid.n();
        let weight = |i: usize| -> T {
            if i == 0 {
                T::cast(2.0)
            } else if i % 2 == 1 {
                T::cast(4.0)
            } else {
                T::cast(2.0)
            }
        };
        let mut sum = T::zero();
        for i in 0..n {
            let wi = weight(i);
            let mut row = T::zero();
            for j in 0..n {
                row += weight(j) * self.values[self.grid.idx(i, j)];
            }
            sum += wi * row;
        }
        // (h/3)^2 per axis; h = 1/n.
        Ok(sum / (T::cast(9.0) * T::from_grid(n * n)))
    }

    /// Reads the field at an arbitrary point of the plane, wrapped into
    /// [0,1)^2 by periodicity before lookup.
    pub fn sample(&self, point: (T, T), mode: SampleMode) -> T {
        let n = self.grid.n();
        let nf = T::from_grid(n);
        let wrap01 = |x: T| x - x.floor();
        // Fractional node coordinates in [0, n).
        let s1 = (wrap01(point.0) * nf).min(nf - T::cast(0.5) * T::epsilon() * nf);
        let s2 = (wrap01(point.1) * nf).min(nf - T::cast(0.5) * T::epsilon() * nf);
        let i0 = s1.floor().to_usize().unwrap_or(0).min(n - 1);
        let j0 = s2.floor().to_usize().unwrap_or(0).min(n - 1);
        let f1 = s1 - T::from_grid(i0);
        let f2 = s2 - T::from_grid(j0);
        match mode {
            SampleMode::Nearest => {
                let half = T::cast(0.5);
                let i = if f1 > half { (i0 + 1) % n } else { i0 };
                let j = if f2 > half { (j0 + 1) % n } else { j0 };
                self.values[self.grid.idx(i, j)]
            }
            SampleMode::Bilinear => {
                let i1 = (i0 + 1) % n;
                let j1 = (j0 + 1) % n;
                let v00 = self.values[self.grid.idx(i0, j0)];
                let v01 = self.values[self.grid.idx(i0, j1)];
                let v10 = self.values[self.grid.idx(i1, j0)];
                let v11 = self.values[self.grid.idx(i1, j1)];
                let one = T::one();
                (one - f1) * ((one - f2) * v00 + f2 * v01) + f1 * ((one - f2) * v10 + f2 * v11)
            }
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Returns the field translated to zero mean.
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Cyclic shift of the index lattice by (di, dj).
    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        let n = self.grid.n();
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..n {
            for j in 0..n {
                values.push(self.at_offset(i, j, di, dj));
            }
        }
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Two-component vector field; both components share the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub x1: ScalarField<T>,
    pub x2: ScalarField<T>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(x1: ScalarField<T>, x2: ScalarField<T>) -> Result<Self> {
        if x1.grid() != x2.grid() {
            return Err(Error::GridMismatch(x1.n(), x2.n()));
        }
        Ok(Self { x1, x2 })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.x1.grid()
    }

    /// Pointwise squared magnitude |v|^2.
    pub fn norm_sq(&self) -> ScalarField<T> {
        self.x1.zip_map(&self.x2, |a, b| a * a + b * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn mean_of_small_grid() {
        let f = ScalarField::<f64>::from_values(grid(2), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.mean(), 1.5);
    }

    #[test]
    fn mean_of_constant() {
        let f = ScalarField::<f64>::constant(grid(8), 3.0);
        assert_eq!(f.mean(), 3.0);
    }

    #[test]
    fn grid_sum_of_oscillation_cancels() {
        // 1 + a*cos(2pi x1)*cos(2pi x2) averages to exactly 1 on any grid
        // resolving the wave; verified by direct summation.
        let g = grid(16);
        let f = ScalarField::<f64>::from_fn(g, |x1, x2| {
            1.0 + 0.7 * (std::f64::consts::TAU * x1).cos() * (std::f64::consts::TAU * x2).cos()
        });
        let brute: f64 = f.values().iter().sum::<f64>() / 256.0;
        assert!((brute - 1.0).abs() < 1e-14);
        assert!((f.mean() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_of_one_is_one() {
        let f = ScalarField::<f64>::constant(grid(16), 1.0);
        assert!((f.simpson_average().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_of_sine_vanishes() {
        let f =
            ScalarField::<f64>::from_fn(grid(16), |x1: f64, _| (std::f64::consts::TAU * x1).sin());
        assert!(f.simpson_average().unwrap().abs() < 1e-14);
    }

    #[test]
    fn simpson_of_sine_squared_is_half() {
        let f = ScalarField::<f64>::from_fn(grid(16), |x1: f64, _| {
            (std::f64::consts::TAU * x1).sin().powi(2)
        });
        assert!((f.simpson_average().unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn simpson_rejects_odd_grid() {
        let f = ScalarField::<f64>::constant(grid(9), 1.0);
        assert!(matches!(f.simpson_average(), Err(Error::OddGrid(9))));
    }

    #[test]
    fn sample_at_node_matches_stored_value_in_both_modes() {
        let g = grid(8);
        let f = ScalarField::<f64>::from_fn(g, |x1, x2| x1 + 10.0 * x2);
        for i in 0..8 {
            for j in 0..8 {
                let p = g.point::<f64>(i, j);
                assert_eq!(f.sample(p, SampleMode::Nearest), f.get(i, j));
                assert!((f.sample(p, SampleMode::Bilinear) - f.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sample_wraps_periodically() {
        let g = grid(4);
        let f = ScalarField::<f64>::from_fn(g, |x1, x2| x1 + 10.0 * x2);
        let inside = f.sample((0.25, 0.0), SampleMode::Nearest);
        assert_eq!(f.sample((1.25, 0.0), SampleMode::Nearest), inside);
        assert_eq!(f.sample((-0.75, 0.0), SampleMode::Nearest), inside);
        assert_eq!(f.sample((1.25, 2.0), SampleMode::Bilinear), inside);
    }

    #[test]
    fn bilinear_cell_center_averages_corners() {
        let g = grid(2);
        // Corners of the cell starting at node (0,0) hold 0,0,0,4.
        let f = ScalarField::<f64>::from_values(g, vec![0.0, 0.0, 0.0, 4.0]).unwrap();
        let v = f.sample((0.25, 0.25), SampleMode::Bilinear);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_tie_breaks_toward_lower_index() {
        let g = grid(4);
        let f = ScalarField::<f64>::from_fn(g, |x1, _| x1);
        // Halfway between nodes 0 and 1 -> lower index wins.
        assert_eq!(f.sample((0.125, 0.0), SampleMode::Nearest), 0.0);
    }

    #[test]
    fn vector_field_requires_matching_grids() {
        let a = ScalarField::<f64>::zeros(grid(4));
        let b = ScalarField::<f64>::zeros(grid(8));
        assert!(VectorField::new(a.clone(), b).is_err());
        let v = VectorField::new(a.clone(), a).unwrap();
        assert_eq!(v.norm_sq().linf_norm(), 0.0);
    }

    #[test]
    fn rejects_nonfinite_values() {
        let r = ScalarField::<f64>::from_values(grid(2), vec![0.0, f64::NAN, 0.0, 0.0]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
