//! Assembled second-order discretization of the linearized operator, rank
//! repair of the singular periodic system, and BiCG solution.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::PeriodicGrid;
use crate::krylov::{bicg, KrylovReport, LinearOperator};
use crate::ma::{InnerSolverConfig, LinearizedCoefficients};
use crate::scalar::Scalar;

/// Sparse periodic system in coordinate format. The raw assembled matrix
/// has the constant vector in its kernel; `fix_rank` adds the zero-mean
/// constraint row to every equation, realized matrix-free as a rank-one
/// update A x + (sum x) 1 so the stored triplets keep their sparsity.
#[derive(Debug, Clone)]
pub struct SparseSystem<T> {
    dim: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    rhs: Vec<T>,
    rank_fixed: bool,
}

impl<T: Scalar> SparseSystem<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank_fixed(&self) -> bool {
        self.rank_fixed
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.vals)
            .map(|((&r, &c), &v)| (r, c, v))
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn set_rhs(&mut self, rhs: Vec<T>) -> Result<()> {
        if rhs.len() != self.dim {
            return Err(Error::InvalidConfig(format!(
                "rhs length {} does not match system dimension {}",
                rhs.len(),
                self.dim
            )));
        }
        self.rhs = rhs;
        Ok(())
    }

    /// y = A x (plus the rank-one shift once the system is rank-fixed).
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        y.fill(T::zero());
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            y[r] += v * x[c];
        }
        if self.rank_fixed {
            let s: T = x.iter().copied().sum();
            for yi in y.iter_mut() {
                *yi += s;
            }
        }
    }

    /// y = A^T x; the rank-one term 1 1^T is symmetric.
    pub fn matvec_transpose(&self, x: &[T], y: &mut [T]) {
        y.fill(T::zero());
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            y[c] += v * x[r];
        }
        if self.rank_fixed {
            let s: T = x.iter().copied().sum();
            for yi in y.iter_mut() {
                *yi += s;
            }
        }
    }

    /// Dense materialization for small oracles and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut a = vec![vec![T::zero(); self.dim]; self.dim];
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            a[r][c] += v;
        }
        if self.rank_fixed {
            for row in &mut a {
                for entry in row.iter_mut() {
                    *entry += T::one();
                }
            }
        }
        a
    }
}

impl<T: Scalar> LinearOperator<T> for SparseSystem<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y);
    }
}

/// Transpose view over an assembled system.
pub struct TransposeView<'a, T>(pub &'a SparseSystem<T>);

impl<T: Scalar> LinearOperator<T> for TransposeView<'_, T> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.0.matvec_transpose(x, y);
    }
}

/// Assembles the 9-point-per-row periodic stencil of the linearized
/// operator at second order: pure second derivatives (1, -2, 1)/h^2, the
/// mixed derivative as the composed centered cross of four corners over
/// 4 h^2, and first derivatives (+-1)/2h, weighted by the nodal
/// coefficients. The right-hand side starts at zero.
pub fn assemble<T: Scalar>(
    coeffs: &LinearizedCoefficients<T>,
    grid: PeriodicGrid,
) -> Result<SparseSystem<T>> {
    if coeffs.grid() != grid {
        return Err(Error::GridMismatch(coeffs.grid().n(), grid.n()));
    }
    let n = grid.n();
    if n < 3 {
        return Err(Error::GridTooSmall { n, order: 2 });
    }
    let dim = grid.len();
    let h: T = grid.h();
    let inv_h2 = T::one() / (h * h);
    let inv_2h = T::one() / (T::cast(2.0) * h);
    let inv_4h2 = T::one() / (T::cast(4.0) * h * h);
    let two = T::cast(2.0);

    let mut rows = Vec::with_capacity(9 * dim);
    let mut cols = Vec::with_capacity(9 * dim);
    let mut vals = Vec::with_capacity(9 * dim);
    let mut push = |r: usize, c: usize, v: T| {
        rows.push(r);
        cols.push(c);
        vals.push(v);
    };

    for i in 0..n {
        let ip = (i + 1) % n;
        let im = (i + n - 1) % n;
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            let r = grid.idx(i, j);
            let a11 = coeffs.a11.get(i, j);
            let a12 = coeffs.a12.get(i, j);
            let a22 = coeffs.a22.get(i, j);
            let b1 = coeffs.b1.get(i, j);
            let b2 = coeffs.b2.get(i, j);

            push(r, r, -two * (a11 + a22) * inv_h2);
            push(r, grid.idx(ip, j), a11 * inv_h2 + b1 * inv_2h);
            push(r, grid.idx(im, j), a11 * inv_h2 - b1 * inv_2h);
            push(r, grid.idx(i, jp), a22 * inv_h2 + b2 * inv_2h);
            push(r, grid.idx(i, jm), a22 * inv_h2 - b2 * inv_2h);
            // 2 a12 * mixed stencil.
            let cross = two * a12 * inv_4h2;
            push(r, grid.idx(ip, jp), cross);
            push(r, grid.idx(ip, jm), -cross);
            push(r, grid.idx(im, jp), -cross);
            push(r, grid.idx(im, jm), cross);
        }
    }

    Ok(SparseSystem {
        dim,
        rows,
        cols,
        vals,
        rhs: vec![T::zero(); dim],
        rank_fixed: false,
    })
}

/// Adds the zero-mean constraint row (all ones, zero right-hand side) to
/// every equation, turning the rank-deficient periodic system into an
/// invertible square one. The product is realized as A x + (sum x) 1.
pub fn fix_rank<T: Scalar>(mut system: SparseSystem<T>) -> SparseSystem<T> {
    system.rank_fixed = true;
    system
}

/// Assembles at second order, rank-fixes, solves by BiCG from a zero
/// initial guess, and re-gauges the solution to exact zero mean.
pub fn solve_linearized_fd<T: Scalar>(
    coeffs: &LinearizedCoefficients<T>,
    rhs: &ScalarField<T>,
    inner: &InnerSolverConfig<T>,
) -> Result<(ScalarField<T>, KrylovReport)> {
    let grid = coeffs.grid();
    if rhs.grid() != grid {
        return Err(Error::GridMismatch(grid.n(), rhs.n()));
    }
    let mean_gate = T::cast(1e-10).max(T::epsilon() * T::cast(100.0));
    if rhs.mean().abs() > mean_gate * (T::one() + rhs.linf_norm()) {
        return Err(Error::InvalidConfig(format!(
            "linearized solve needs a mean-zero right-hand side (mean {})",
            rhs.mean()
        )));
    }

    let mut system = fix_rank(assemble(coeffs, grid)?);
    system.set_rhs(rhs.values().to_vec())?;
    let x0 = vec![T::zero(); system.dim()];
    let transpose = TransposeView(&system);
    let (x, report) = bicg(
        &system,
        &transpose,
        system.rhs(),
        inner.tol,
        inner.max_iter,
        &x0,
    );
    let theta = ScalarField::from_values(grid, x)?.zero_mean();
    Ok((theta, report))
}
