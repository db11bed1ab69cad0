//! Matrix-free Krylov solvers: restarted GMRES, BiCG, and a power-iteration
//! probe for the dominant eigenvalue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// A linear map referenced only through its action on a vector.
pub trait LinearOperator<T>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Reason a Krylov recurrence stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Breakdown {
    /// Arnoldi produced a (numerically) zero vector.
    Arnoldi,
    /// No residual reduction across a full restart cycle.
    Stagnation,
    /// BiCG rho = <r_hat, r> vanished.
    Rho,
    /// BiCG alpha denominator <p_hat, A p> vanished.
    Alpha,
}

/// Outcome of an iterative solve. `final_residual` is always the true
/// relative residual ||b - Ax|| / ||b|| recomputed at exit, never the
/// recurrence estimate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KrylovReport {
    pub converged: bool,
    /// Outer (restart) cycles for GMRES(m); total iterations for BiCG.
    pub iterations: usize,
    /// Total inner steps: Arnoldi steps for GMRES, equal to `iterations`
    /// for BiCG.
    pub total_inner: usize,
    pub final_residual: f64,
    pub breakdown: Option<Breakdown>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn residual_norm<T: Scalar>(map: &dyn LinearOperator<T>, x: &[T], b: &[T], scratch: &mut [T]) -> T {
    map.apply(x, scratch);
    let sum: T = b
        .iter()
        .zip(scratch.iter())
        .map(|(&bi, &ai)| (bi - ai) * (bi - ai))
        .sum();
    sum.sqrt()
}

/// Residual scale: relative to ||b||, with an absolute fallback when the
/// right-hand side is essentially zero.
fn rhs_scale<T: Scalar>(bnorm: T) -> T {
    let tiny = T::cast(1e-300);
    if bnorm <= tiny {
        T::one()
    } else {
        bnorm
    }
}

/// Restarted GMRES(m) with modified Gram-Schmidt and Givens rotations.
///
/// Stops when the relative residual drops below `tol`, when `max_outer`
/// restart cycles are exhausted, or when a full cycle fails to reduce the
/// residual at all (stagnation).
pub fn gmres_restarted<T: Scalar>(
    map: &dyn LinearOperator<T>,
    rhs: &[T],
    m: usize,
    tol: T,
    max_outer: usize,
    x0: &[T],
) -> (Vec<T>, KrylovReport) {
    let n = map.dim();
    assert_eq!(rhs.len(), n, "rhs dimension mismatch");
    assert!(m >= 1, "restart threshold must be at least 1");
    let m = m.min(n);

    let scale = rhs_scale(norm(rhs));
    let mut x = x0.to_vec();
    let mut scratch = vec![T::zero(); n];
    let mut total_inner = 0usize;
    let mut outer = 0usize;
    let mut breakdown = None;
    let mut prev_cycle_res: Option<T> = None;

    'outer: while outer < max_outer {
        outer += 1;
        // r = b - A x
        map.apply(&x, &mut scratch);
        let mut r: Vec<T> = rhs
            .iter()
            .zip(scratch.iter())
            .map(|(&bi, &ai)| bi - ai)
            .collect();
        let beta = norm(&r);
        if beta / scale <= tol {
            break;
        }
        if let Some(prev) = prev_cycle_res {
            if prev - beta < T::cast(1e-14) * prev {
                breakdown = Some(Breakdown::Stagnation);
                break;
            }
        }
        prev_cycle_res = Some(beta);

        // Arnoldi basis and the rotated Hessenberg columns.
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        let inv_beta = T::one() / beta;
        basis.push(r.iter_mut().map(|v| *v * inv_beta).collect());
        let mut h_cols: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;

        let mut k = 0;
        while k < m {
            total_inner += 1;
            let mut w = vec![T::zero(); n];
            map.apply(&basis[k], &mut w);

            let mut h = vec![T::zero(); k + 2];
            for (j, vj) in basis.iter().enumerate().take(k + 1) {
                let hjk = dot(vj, &w);
                h[j] = hjk;
                for (wi, &vji) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vji;
                }
            }
            let wnorm = norm(&w);
            h[k + 1] = wnorm;

            let lucky = wnorm <= T::cast(1e-14) * beta.max(T::one());
            if !lucky {
                let inv = T::one() / wnorm;
                basis.push(w.iter().map(|&v| v * inv).collect());
            }

            // Apply the accumulated rotations, then zero the subdiagonal.
            for j in 0..k {
                let t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            let (c, s) = givens(h[k], h[k + 1]);
            cs[k] = c;
            sn[k] = s;
            h[k] = c * h[k] + s * h[k + 1];
            h[k + 1] = T::zero();
            let t = c * g[k] + s * g[k + 1];
            g[k + 1] = -s * g[k] + c * g[k + 1];
            g[k] = t;
            h_cols.push(h);

            k += 1;
            if lucky {
                breakdown = Some(Breakdown::Arnoldi);
                update_solution(&mut x, &h_cols, &g, &basis, k);
                break 'outer;
            }
            if g[k].abs() / scale <= tol {
                break;
            }
        }

        update_solution(&mut x, &h_cols, &g, &basis, k);
        if g[k].abs() / scale <= tol {
            break;
        }
    }

    let true_res = residual_norm(map, &x, rhs, &mut scratch) / scale;
    let converged = true_res <= tol && breakdown != Some(Breakdown::Stagnation);
    let report = KrylovReport {
        converged,
        iterations: outer,
        total_inner,
        final_residual: true_res.to_f64().unwrap_or(f64::NAN),
        breakdown,
    };
    (x, report)
}

/// Back-substitution of the rotated least-squares system and basis update.
fn update_solution<T: Scalar>(x: &mut [T], h_cols: &[Vec<T>], g: &[T], basis: &[Vec<T>], k: usize) {
    if k == 0 {
        return;
    }
    let mut y = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut sum = g[i];
        for (j, yj) in y.iter().enumerate().take(k).skip(i + 1) {
            sum -= h_cols[j][i] * *yj;
        }
        let hii = h_cols[i][i];
        y[i] = if hii.abs() > T::cast(1e-300) {
            sum / hii
        } else {
            T::zero()
        };
    }
    for (i, yi) in y.iter().enumerate() {
        for (xj, &vj) in x.iter_mut().zip(&basis[i]) {
            *xj += *yi * vj;
        }
    }
}

fn givens<T: Scalar>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = (a * a + b * b).sqrt();
        (a / r, b / r)
    }
}

/// Classical biconjugate gradients for a general square system; needs the
/// action of the transpose as well.
pub fn bicg<T: Scalar>(
    map: &dyn LinearOperator<T>,
    transpose_map: &dyn LinearOperator<T>,
    rhs: &[T],
    tol: T,
    max_iter: usize,
    x0: &[T],
) -> (Vec<T>, KrylovReport) {
    let n = map.dim();
    assert_eq!(rhs.len(), n, "rhs dimension mismatch");
    debug_assert!(
        adjoint_consistent(map, transpose_map),
        "transpose_map is not the adjoint of map"
    );

    let scale = rhs_scale(norm(rhs));
    let mut x = x0.to_vec();
    let mut scratch = vec![T::zero(); n];

    map.apply(&x, &mut scratch);
    let mut r: Vec<T> = rhs
        .iter()
        .zip(scratch.iter())
        .map(|(&bi, &ai)| bi - ai)
        .collect();
    let mut r_hat = r.clone();
    let mut p = r.clone();
    let mut p_hat = r_hat.clone();
    let mut q = vec![T::zero(); n];
    let mut q_hat = vec![T::zero(); n];

    let mut iterations = 0usize;
    let mut breakdown = None;
    let tiny = T::cast(1e-300);

    if norm(&r) / scale > tol {
        let mut rho = dot(&r_hat, &r);
        loop {
            if iterations >= max_iter {
                break;
            }
            if rho.abs() <= tiny {
                breakdown = Some(Breakdown::Rho);
                break;
            }
            iterations += 1;
            map.apply(&p, &mut q);
            transpose_map.apply(&p_hat, &mut q_hat);
            let denom = dot(&p_hat, &q);
            if denom.abs() <= tiny {
                breakdown = Some(Breakdown::Alpha);
                break;
            }
            let alpha = rho / denom;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
                r_hat[i] -= alpha * q_hat[i];
            }
            if norm(&r) / scale <= tol {
                break;
            }
            let rho_next = dot(&r_hat, &r);
            let beta = rho_next / rho;
            rho = rho_next;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
                p_hat[i] = r_hat[i] + beta * p_hat[i];
            }
        }
    }

    let true_res = residual_norm(map, &x, rhs, &mut scratch) / scale;
    let report = KrylovReport {
        converged: true_res <= tol,
        iterations,
        total_inner: iterations,
        final_residual: true_res.to_f64().unwrap_or(f64::NAN),
        breakdown,
    };
    (x, report)
}

/// Probabilistic adjoint check: |<Ax, y> - <x, A^T y>| small on one random
/// probe pair. Only compiled into debug builds.
fn adjoint_consistent<T: Scalar>(
    map: &dyn LinearOperator<T>,
    transpose_map: &dyn LinearOperator<T>,
) -> bool {
    let n = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let x: Vec<T> = (0..n).map(|_| T::cast(rng.random::<f64>() - 0.5)).collect();
    let y: Vec<T> = (0..n).map(|_| T::cast(rng.random::<f64>() - 0.5)).collect();
    let mut ax = vec![T::zero(); n];
    let mut aty = vec![T::zero(); n];
    map.apply(&x, &mut ax);
    transpose_map.apply(&y, &mut aty);
    let lhs = dot(&ax, &y);
    let rhs = dot(&x, &aty);
    let scale = T::one() + lhs.abs().max(rhs.abs());
    (lhs - rhs).abs() <= T::cast(1e-8) * scale
}

/// Result of the power-iteration spectral-radius probe.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PowerReport {
    /// Limiting ||A b_k|| ratio: the dominant-eigenvalue magnitude estimate.
    pub radius: f64,
    /// Number of operator applications performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration b_{k+1} = A b_k / ||A b_k||, started from a seeded
/// pseudo-random vector with components in [0, 1]. Converges when two
/// successive magnitude estimates differ by at most `tol`.
pub fn power_iteration<T: Scalar>(
    map: &dyn LinearOperator<T>,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> PowerReport {
    let n = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b: Vec<T> = (0..n).map(|_| T::cast(rng.random::<f64>())).collect();
    let bnorm = norm(&b);
    for v in &mut b {
        *v /= bnorm;
    }

    let mut c = vec![T::zero(); n];
    let mut prev: Option<T> = None;
    for k in 1..=max_iter {
        map.apply(&b, &mut c);
        let cnorm = norm(&c);
        if cnorm == T::zero() {
            return PowerReport {
                radius: 0.0,
                iterations: k,
                converged: true,
            };
        }
        if let Some(p) = prev {
            if (cnorm - p).abs() <= tol {
                return PowerReport {
                    radius: cnorm.to_f64().unwrap_or(f64::NAN),
                    iterations: k,
                    converged: true,
                };
            }
        }
        prev = Some(cnorm);
        for (bi, &ci) in b.iter_mut().zip(&c) {
            *bi = ci / cnorm;
        }
    }
    PowerReport {
        radius: prev
            .map(|p| p.to_f64().unwrap_or(f64::NAN))
            .unwrap_or(f64::NAN),
        iterations: max_iter,
        converged: false,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub struct DenseOp {
        pub a: Vec<Vec<f64>>,
    }

    impl LinearOperator<f64> for DenseOp {
        fn dim(&self) -> usize {
            self.a.len()
        }

        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for (yi, row) in y.iter_mut().zip(&self.a) {
                *yi = row.iter().zip(x).map(|(&aij, &xj)| aij * xj).sum();
            }
        }
    }

    pub struct DiagOp {
        pub d: Vec<f64>,
    }

    impl LinearOperator<f64> for DiagOp {
        fn dim(&self) -> usize {
            self.d.len()
        }

        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..x.len() {
                y[i] = self.d[i] * x[i];
            }
        }
    }

    #[test]
    fn gmres_identity_converges_in_one_step() {
        let op = DiagOp { d: vec![1.0; 6] };
        let rhs = vec![3.0, -1.0, 2.0, 0.5, 4.0, -2.0];
        let (x, rep) = gmres_restarted(&op, &rhs, 10, 1e-12, 20, &[0.0; 6]);
        assert!(rep.converged);
        assert!(rep.total_inner <= 1);
        for (xi, bi) in x.iter().zip(&rhs) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_diagonal_matches_direct_division() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let op = DiagOp { d: d.clone() };
        let rhs = vec![1.0; 10];
        let (x, rep) = gmres_restarted(&op, &rhs, 10, 1e-12, 50, &[0.0; 10]);
        assert!(rep.converged, "report: {rep:?}");
        assert!(rep.total_inner <= 10);
        for (xi, di) in x.iter().zip(&d) {
            assert!((xi - 1.0 / di).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_final_residual_is_true_residual() {
        let d: Vec<f64> = (1..=20).map(|i| (i as f64).sqrt()).collect();
        let op = DiagOp { d };
        let rhs: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let (x, rep) = gmres_restarted(&op, &rhs, 5, 1e-10, 100, &[0.0; 20]);
        assert!(rep.converged);
        let mut ax = vec![0.0; 20];
        op.apply(&x, &mut ax);
        let rn = rhs
            .iter()
            .zip(&ax)
            .map(|(b, a)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
            / rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!((rn - rep.final_residual).abs() <= 1e-10 * (1.0 + rn.abs()));
    }

    #[test]
    fn gmres_flags_stagnation_on_singular_system() {
        // Rank-deficient map with rhs outside the range cannot converge.
        let op = DenseOp {
            a: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
        };
        let rhs = vec![0.0, 1.0];
        let (_, rep) = gmres_restarted(&op, &rhs, 2, 1e-12, 50, &[0.0; 2]);
        assert!(!rep.converged);
    }

    #[test]
    fn bicg_identity_converges_immediately() {
        let op = DiagOp { d: vec![1.0; 5] };
        let rhs = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let (x, rep) = bicg(&op, &op, &rhs, 1e-12, 100, &[0.0; 5]);
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        for (xi, bi) in x.iter().zip(&rhs) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn bicg_spd_tridiagonal_matches_direct_solve() {
        // 1D Laplacian + identity, small enough for a by-hand elimination.
        let n = 16;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 3.0;
            if i > 0 {
                a[i][i - 1] = -1.0;
            }
            if i + 1 < n {
                a[i][i + 1] = -1.0;
            }
        }
        let op = DenseOp { a: a.clone() };
        let rhs: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let (x, rep) = bicg(&op, &op, &rhs, 1e-12, 200, &vec![0.0; n]);
        assert!(rep.converged, "{rep:?}");
        let xd = gauss_solve(a, rhs);
        for (xi, di) in x.iter().zip(&xd) {
            assert!((xi - di).abs() < 1e-9);
        }
    }

    #[test]
    fn bicg_reports_breakdown_on_skew_system() {
        // Skew-symmetric map: <r_hat, r> collapses immediately when r_hat = r.
        let op = DenseOp {
            a: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
        };
        let op_t = DenseOp {
            a: vec![vec![0.0, -1.0], vec![1.0, 0.0]],
        };
        let rhs = vec![1.0, 1.0];
        let (_, rep) = bicg(&op, &op_t, &rhs, 1e-14, 50, &[0.0; 2]);
        assert!(!rep.converged);
        assert!(rep.breakdown.is_some());
    }

    #[test]
    fn power_iteration_on_scaled_identity() {
        let op = DiagOp { d: vec![2.0; 8] };
        let rep = power_iteration(&op, 1e-10, 50, 7);
        assert!(rep.converged);
        assert!(rep.iterations <= 2);
        assert!((rep.radius - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_finds_dominant_diagonal_entry() {
        let op = DiagOp {
            d: vec![0.1, 0.5, 3.0],
        };
        let rep = power_iteration(&op, 1e-9, 500, 42);
        assert!(rep.converged);
        assert!((rep.radius - 3.0).abs() < 1e-6, "radius {}", rep.radius);
    }

    /// Dense Gaussian elimination with partial pivoting; the independent
    /// oracle for the Krylov solvers.
    #[allow(clippy::needless_range_loop)]
    pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            assert!(d.abs() > 1e-300, "singular oracle system");
            for row in col + 1..n {
                let factor = a[row][col] / d;
                if factor != 0.0 {
                    for k in col..n {
                        a[row][k] -= factor * a[col][k];
                    }
                    b[row] -= factor * b[col];
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut sum = b[row];
            for col in row + 1..n {
                sum -= a[row][col] * x[col];
            }
            x[row] = sum / a[row][row];
        }
        x
    }
}
