//! The Monge-Ampere forward operator, its linearization, and the damped
//! Newton driver.
//!
//! The equation solved is g(x + grad u) det(I + D2 u) = f for a 1-periodic,
//! zero-mean potential perturbation u. Each Newton step computes the current
//! pushforward density, renormalizes its mass, solves the linearized
//! elliptic equation for a zero-mean update theta, and applies the damped
//! update u <- u + theta.

use std::time::Instant;

use crate::density::{DensityPair, DensitySource, SampledDensity};
use crate::error::{Error, Result};
use crate::field::{SampleMode, ScalarField};
use crate::krylov::{power_iteration, KrylovReport, LinearOperator, PowerReport};
use crate::scalar::Scalar;
use crate::stencil::{diff_first, diff_mixed, diff_second, Axis, DiffOrder};
use crate::{fd, fft};

/// Derivative order for the nonlinear right-hand side terms.
pub const FORWARD_ORDER: DiffOrder = DiffOrder::Four;
/// Derivative order of the assembled finite-difference backend.
pub const FD_ORDER: DiffOrder = DiffOrder::Two;

/// Inner linear solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Strain-style spectral solve preconditioned by the averaged operator,
    /// driven by restarted GMRES.
    Fft,
    /// Assembled second-order stencils with the rank-fixed system, driven
    /// by BiCG.
    Fd,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Fft => write!(f, "fft"),
            Backend::Fd => write!(f, "fd"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fft" => Ok(Backend::Fft),
            "fd" => Ok(Backend::Fd),
            other => Err(format!("unknown backend '{other}' (expected fft or fd)")),
        }
    }
}

/// The fields a_ij(x), b_i(x) of the linearized operator
/// L theta = sum a_ij d_ij theta + sum b_i d_i theta.
#[derive(Debug, Clone)]
pub struct LinearizedCoefficients<T> {
    pub a11: ScalarField<T>,
    pub a12: ScalarField<T>,
    pub a22: ScalarField<T>,
    pub b1: ScalarField<T>,
    pub b2: ScalarField<T>,
}

impl<T: Scalar> LinearizedCoefficients<T> {
    pub fn grid(&self) -> crate::grid::PeriodicGrid {
        self.a11.grid()
    }

    /// Zeroes the first-order terms; the simplified update equation that
    /// drops the advection part.
    pub fn drop_advection(&mut self) {
        self.b1 = ScalarField::zeros(self.grid());
        self.b2 = ScalarField::zeros(self.grid());
    }
}

/// Pushforward density f_u = g(x + grad u) det(I + D2 u), with all
/// derivatives of u from fourth-order centered stencils.
pub fn evaluate_forward<T: Scalar>(
    u: &ScalarField<T>,
    g: &dyn DensitySource<T>,
) -> Result<ScalarField<T>> {
    let grid = u.grid();
    let n = grid.n();
    let u1 = diff_first(u, Axis::X1, FORWARD_ORDER)?;
    let u2 = diff_first(u, Axis::X2, FORWARD_ORDER)?;
    let u11 = diff_second(u, Axis::X1, FORWARD_ORDER)?;
    let u22 = diff_second(u, Axis::X2, FORWARD_ORDER)?;
    let u12 = diff_mixed(u, FORWARD_ORDER)?;

    let mut out = ScalarField::zeros(grid);
    let one = T::one();
    for i in 0..n {
        for j in 0..n {
            let det = (one + u11.get(i, j)) * (one + u22.get(i, j)) - u12.get(i, j) * u12.get(i, j);
            let (x1, x2) = grid.point::<T>(i, j);
            let p = (x1 + u1.get(i, j), x2 + u2.get(i, j));
            out.set(i, j, g.value_at(p) * det);
        }
    }
    if !out.all_finite() {
        return Err(Error::NonFinite("forward operator"));
    }
    Ok(out)
}

/// Coefficients of the derivative of the forward operator at u:
/// a is g(x+grad u) times the adjugate of I + D2 u, b is
/// det(I + D2 u) times grad g evaluated at x + grad u.
pub fn build_linearization<T: Scalar>(
    u: &ScalarField<T>,
    g: &dyn DensitySource<T>,
) -> Result<LinearizedCoefficients<T>> {
    let grid = u.grid();
    let n = grid.n();
    let u1 = diff_first(u, Axis::X1, FORWARD_ORDER)?;
    let u2 = diff_first(u, Axis::X2, FORWARD_ORDER)?;
    let u11 = diff_second(u, Axis::X1, FORWARD_ORDER)?;
    let u22 = diff_second(u, Axis::X2, FORWARD_ORDER)?;
    let u12 = diff_mixed(u, FORWARD_ORDER)?;

    let mut a11 = ScalarField::zeros(grid);
    let mut a12 = ScalarField::zeros(grid);
    let mut a22 = ScalarField::zeros(grid);
    let mut b1 = ScalarField::zeros(grid);
    let mut b2 = ScalarField::zeros(grid);
    let one = T::one();
    for i in 0..n {
        for j in 0..n {
            let (x1, x2) = grid.point::<T>(i, j);
            let p = (x1 + u1.get(i, j), x2 + u2.get(i, j));
            let gval = g.value_at(p);
            let (g1, g2) = g.grad_at(p);
            let det = (one + u11.get(i, j)) * (one + u22.get(i, j)) - u12.get(i, j) * u12.get(i, j);
            a11.set(i, j, gval * (one + u22.get(i, j)));
            a22.set(i, j, gval * (one + u11.get(i, j)));
            a12.set(i, j, -gval * u12.get(i, j));
            b1.set(i, j, det * g1);
            b2.set(i, j, det * g2);
        }
    }
    Ok(LinearizedCoefficients {
        a11,
        a12,
        a22,
        b1,
        b2,
    })
}

/// Matrix-free action of the linearized operator at the given stencil order:
/// a11 t11 + 2 a12 t12 + a22 t22 + b1 t1 + b2 t2.
pub fn apply_linearized<T: Scalar>(
    coeffs: &LinearizedCoefficients<T>,
    theta: &ScalarField<T>,
    order: DiffOrder,
) -> Result<ScalarField<T>> {
    if coeffs.grid() != theta.grid() {
        return Err(Error::GridMismatch(coeffs.grid().n(), theta.n()));
    }
    let t11 = diff_second(theta, Axis::X1, order)?;
    let t22 = diff_second(theta, Axis::X2, order)?;
    let t12 = diff_mixed(theta, order)?;
    let t1 = diff_first(theta, Axis::X1, order)?;
    let t2 = diff_first(theta, Axis::X2, order)?;

    let n = theta.n();
    let two = T::cast(2.0);
    let mut out = ScalarField::zeros(theta.grid());
    for i in 0..n {
        for j in 0..n {
            let v = coeffs.a11.get(i, j) * t11.get(i, j)
                + two * coeffs.a12.get(i, j) * t12.get(i, j)
                + coeffs.a22.get(i, j) * t22.get(i, j)
                + coeffs.b1.get(i, j) * t1.get(i, j)
                + coeffs.b2.get(i, j) * t2.get(i, j);
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Mass renormalization: translate so the grid mean is exactly 1.
pub fn normalize_density<T: Scalar>(f_n: &ScalarField<T>) -> ScalarField<T> {
    let shift = T::one() - f_n.mean();
    f_n.map(|v| v + shift)
}

/// Evaluates I + D2 u at every node; positive definite iff trace and
/// determinant are positive. Also returns the smallest eigenvalue seen.
pub fn check_convexity<T: Scalar>(u: &ScalarField<T>) -> Result<(bool, T)> {
    let u11 = diff_second(u, Axis::X1, FORWARD_ORDER)?;
    let u22 = diff_second(u, Axis::X2, FORWARD_ORDER)?;
    let u12 = diff_mixed(u, FORWARD_ORDER)?;
    let one = T::one();
    let half = T::cast(0.5);
    let mut ok = true;
    let mut min_eig = T::infinity();
    for ((&m11, &m22), &m12) in u11.values().iter().zip(u22.values()).zip(u12.values()) {
        let a = one + m11;
        let c = one + m22;
        let trace = a + c;
        let det = a * c - m12 * m12;
        if trace <= T::zero() || det <= T::zero() {
            ok = false;
        }
        let gap = (half * (a - c)) * (half * (a - c)) + m12 * m12;
        let eig = half * trace - gap.sqrt();
        min_eig = min_eig.min(eig);
    }
    Ok((ok, min_eig))
}

/// Parameters handed to the inner linear solver.
#[derive(Debug, Clone, Copy)]
pub struct InnerSolverConfig<T> {
    /// Relative residual tolerance.
    pub tol: T,
    /// Total inner-iteration budget.
    pub max_iter: usize,
    /// GMRES restart threshold m.
    pub restart: usize,
}

/// Solves the linearized equation with the selected backend.
pub fn solve_linearized<T: Scalar>(
    backend: Backend,
    coeffs: &LinearizedCoefficients<T>,
    rhs: &ScalarField<T>,
    inner: &InnerSolverConfig<T>,
) -> Result<(ScalarField<T>, KrylovReport)> {
    match backend {
        Backend::Fft => fft::solve_linearized_fft(coeffs, rhs, inner),
        Backend::Fd => fd::solve_linearized_fd(coeffs, rhs, inner),
    }
}

/// Newton driver configuration.
#[derive(Debug, Clone)]
pub struct NewtonConfig<T> {
    /// Damping parameter; the step is scaled by 1/tau. Must be >= 1.
    pub tau: T,
    /// Stop once the l2 residual ||f - f_n~|| drops below this.
    pub tol: T,
    pub max_iter: usize,
    pub backend: Backend,
    pub inner_tol: T,
    pub inner_max: usize,
    pub gmres_restart: usize,
    /// Interpolation used when the target density is grid data.
    pub sample_mode: SampleMode,
    /// Solve the simplified update equation without the b . grad theta term.
    pub drop_advection: bool,
    /// Keep per-iteration potential and density snapshots in the report.
    pub retain_history: bool,
    /// Run the power-iteration probe on the inverse linearized solve at
    /// every Newton step.
    pub probe_spectral_radius: bool,
    pub probe_tol: T,
    pub probe_max_iter: usize,
    pub probe_seed: u64,
}

impl<T: Scalar> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self {
            tau: T::one(),
            tol: T::cast(1e-8),
            max_iter: 20,
            backend: Backend::Fft,
            inner_tol: T::cast(1e-4),
            inner_max: 1000,
            gmres_restart: 10,
            sample_mode: SampleMode::Nearest,
            drop_advection: false,
            retain_history: false,
            probe_spectral_radius: false,
            probe_tol: T::cast(1e-3),
            probe_max_iter: 30,
            probe_seed: 1,
        }
    }
}

impl<T: Scalar> NewtonConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.tau < T::one() {
            return Err(Error::InvalidConfig(format!(
                "tau must be >= 1, got {}",
                self.tau
            )));
        }
        if self.tol <= T::zero() || self.inner_tol <= T::zero() {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.inner_max == 0 || self.gmres_restart == 0 {
            return Err(Error::InvalidConfig(
                "iteration budgets must be positive".into(),
            ));
        }
        Ok(())
    }

    fn inner(&self) -> InnerSolverConfig<T> {
        InnerSolverConfig {
            tol: self.inner_tol,
            max_iter: self.inner_max,
            restart: self.gmres_restart,
        }
    }
}

/// Current Newton iterate: the potential perturbation, its pushforward
/// density, and the residual history.
#[derive(Debug, Clone)]
pub struct NewtonState<T> {
    pub u: ScalarField<T>,
    /// Pushforward density at u, before mass renormalization.
    pub f_n: ScalarField<T>,
    pub iter: usize,
    pub residual_history: Vec<T>,
}

impl<T: Scalar> NewtonState<T> {
    /// Constant (zero) initial guess; the first pushforward equals g.
    pub fn initial(grid: crate::grid::PeriodicGrid, g: &dyn DensitySource<T>) -> Result<Self> {
        let u = ScalarField::zeros(grid);
        let f_n = evaluate_forward(&u, g)?;
        Ok(Self {
            u,
            f_n,
            iter: 0,
            residual_history: Vec::new(),
        })
    }
}

/// Everything a single Newton step produced.
pub struct StepOutcome<T> {
    pub state: NewtonState<T>,
    pub theta: ScalarField<T>,
    /// Mass-renormalized density the step worked against.
    pub normalized_density: ScalarField<T>,
    /// l2 residual ||f - f_n~|| before the step.
    pub residual: T,
    pub inner: KrylovReport,
    /// Convexity of the accepted iterate u_{n+1}.
    pub convexity_ok: bool,
    pub min_eigenvalue: T,
    pub probe: Option<PowerReport>,
}

/// One damped Newton step: renormalize the pushforward, solve the
/// linearized equation for theta, update u and re-gauge it to zero mean.
///
/// Inner-solver non-convergence is an error carrying the report; a loss of
/// convexity is flagged on the outcome and left to the caller.
pub fn newton_step<T: Scalar>(
    state: &NewtonState<T>,
    f: &ScalarField<T>,
    g: &dyn DensitySource<T>,
    cfg: &NewtonConfig<T>,
) -> Result<StepOutcome<T>> {
    let f_tilde = normalize_density(&state.f_n);
    let diff = f.sub(&f_tilde);
    let residual = diff.l2_norm();

    let mut coeffs = build_linearization(&state.u, g)?;
    if cfg.drop_advection {
        coeffs.drop_advection();
    }

    let probe = if cfg.probe_spectral_radius {
        Some(probe_inverse_radius(
            cfg.backend,
            &coeffs,
            &cfg.inner(),
            cfg.probe_tol,
            cfg.probe_max_iter,
            cfg.probe_seed,
        )?)
    } else {
        None
    };

    let rhs = diff.scaled(T::one() / cfg.tau);
    let (theta, inner) = solve_linearized(cfg.backend, &coeffs, &rhs, &cfg.inner())?;
    if !inner.converged {
        return Err(Error::InnerSolve { report: inner });
    }

    let u_next = state.u.add(&theta).zero_mean();
    let f_next = evaluate_forward(&u_next, g)?;
    let (convexity_ok, min_eigenvalue) = check_convexity(&u_next)?;

    let mut history = state.residual_history.clone();
    history.push(residual);
    Ok(StepOutcome {
        state: NewtonState {
            u: u_next,
            f_n: f_next,
            iter: state.iter + 1,
            residual_history: history,
        },
        theta,
        normalized_density: f_tilde,
        residual,
        inner,
        convexity_ok,
        min_eigenvalue,
        probe,
    })
}

/// Power iteration on the inverse of the linearized solve: each application
/// projects the probe vector to zero mean and solves L theta = b.
pub fn probe_inverse_radius<T: Scalar>(
    backend: Backend,
    coeffs: &LinearizedCoefficients<T>,
    inner: &InnerSolverConfig<T>,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<PowerReport> {
    // Validate once before handing the solve to the probe loop.
    let zero_rhs = ScalarField::zeros(coeffs.grid());
    solve_linearized(backend, coeffs, &zero_rhs, inner)?;

    struct InverseMap<'a, T> {
        backend: Backend,
        coeffs: &'a LinearizedCoefficients<T>,
        inner: InnerSolverConfig<T>,
    }

    impl<T: Scalar> LinearOperator<T> for InverseMap<'_, T> {
        fn dim(&self) -> usize {
            self.coeffs.grid().len()
        }

        fn apply(&self, x: &[T], y: &mut [T]) {
            let field = ScalarField::from_values(self.coeffs.grid(), x.to_vec())
                .expect("probe vector length")
                .zero_mean();
            let (theta, _) = solve_linearized(self.backend, self.coeffs, &field, &self.inner)
                .expect("probe solve validated up front");
            y.copy_from_slice(theta.values());
        }
    }

    let map = InverseMap {
        backend,
        coeffs,
        inner: *inner,
    };
    Ok(power_iteration(&map, tol, max_iter, seed))
}

/// Per-iteration record of the Newton driver. The residual is evaluated
/// before the step; the final record of a run carries no inner solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual_l2: f64,
    pub inner_outer: usize,
    pub inner_total: usize,
    pub inner_converged: bool,
    pub inner_final_residual: f64,
    pub wall_seconds: f64,
    pub convexity_ok: bool,
    pub min_eigenvalue: f64,
    pub spectral_radius: Option<f64>,
    pub spectral_radius_iterations: Option<usize>,
}

/// Full account of a Newton run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport<T> {
    pub converged: bool,
    /// Newton steps actually performed (linear solves).
    pub steps: usize,
    pub final_residual: f64,
    pub total_seconds: f64,
    pub records: Vec<IterationRecord>,
    pub diagnostics: Vec<String>,
    /// Potential iterates u_0..u_last, kept when history retention is on.
    #[serde(skip)]
    pub potential_history: Vec<ScalarField<T>>,
    /// Renormalized pushforward densities, kept when history retention is on.
    #[serde(skip)]
    pub density_history: Vec<ScalarField<T>>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn residual_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual_l2).collect()
    }

    /// Mean total inner iterations over the records that ran a solve.
    pub fn mean_inner_per_step(&self) -> f64 {
        let solves: Vec<&IterationRecord> =
            self.records.iter().filter(|r| r.inner_total > 0).collect();
        if solves.is_empty() {
            return 0.0;
        }
        solves.iter().map(|r| r.inner_total as f64).sum::<f64>() / solves.len() as f64
    }
}

/// Damped Newton iteration from the constant initial guess u_0 = 0 until
/// the residual tolerance or the iteration budget is reached.
pub fn run_newton<T: Scalar>(
    f: &ScalarField<T>,
    g: &dyn DensitySource<T>,
    cfg: &NewtonConfig<T>,
) -> Result<(ScalarField<T>, SolveReport<T>)> {
    cfg.validate()?;
    let grid = f.grid();
    grid.require_even()?;
    if grid.n() < 8 {
        return Err(Error::InvalidConfig(format!(
            "solver grids need n >= 8, got {}",
            grid.n()
        )));
    }
    if cfg.backend == Backend::Fft {
        grid.require_power_of_two()?;
    }

    let run_start = Instant::now();
    let mut state = NewtonState::initial(grid, g)?;
    let mut report = SolveReport {
        converged: false,
        steps: 0,
        final_residual: f64::NAN,
        total_seconds: 0.0,
        records: Vec::new(),
        diagnostics: Vec::new(),
        potential_history: Vec::new(),
        density_history: Vec::new(),
    };

    loop {
        let iter_start = Instant::now();
        let f_tilde = normalize_density(&state.f_n);
        let residual = f.sub(&f_tilde).l2_norm();
        if cfg.retain_history {
            report.potential_history.push(state.u.clone());
            report.density_history.push(f_tilde.clone());
        }
        if let Some(prev) = report.records.last() {
            if residual.to_f64().unwrap_or(f64::NAN) > prev.residual_l2 {
                report.diagnostics.push(format!(
                    "residual increased at iteration {} ({:.3e} -> {:.3e}); consider a larger tau",
                    state.iter,
                    prev.residual_l2,
                    residual.to_f64().unwrap_or(f64::NAN)
                ));
            }
        }

        if residual <= cfg.tol || state.iter >= cfg.max_iter {
            let (ok, eig) = check_convexity(&state.u)?;
            report.records.push(evaluation_record(
                state.iter,
                residual,
                iter_start.elapsed().as_secs_f64(),
                ok,
                eig,
            ));
            if residual <= cfg.tol {
                report.converged = true;
            } else {
                report
                    .diagnostics
                    .push(format!("iteration budget of {} reached", cfg.max_iter));
            }
            break;
        }

        match newton_step(&state, f, g, cfg) {
            Ok(outcome) => {
                if !outcome.convexity_ok {
                    report.diagnostics.push(format!(
                        "I + D2u lost positive definiteness at iteration {} \
                         (min eigenvalue {:.3e}); consider a larger tau",
                        outcome.state.iter,
                        outcome.min_eigenvalue.to_f64().unwrap_or(f64::NAN)
                    ));
                }
                report.records.push(IterationRecord {
                    iter: state.iter,
                    residual_l2: residual.to_f64().unwrap_or(f64::NAN),
                    inner_outer: outcome.inner.iterations,
                    inner_total: outcome.inner.total_inner,
                    inner_converged: outcome.inner.converged,
                    inner_final_residual: outcome.inner.final_residual,
                    wall_seconds: iter_start.elapsed().as_secs_f64(),
                    convexity_ok: outcome.convexity_ok,
                    min_eigenvalue: outcome.min_eigenvalue.to_f64().unwrap_or(f64::NAN),
                    spectral_radius: outcome.probe.map(|p| p.radius),
                    spectral_radius_iterations: outcome.probe.map(|p| p.iterations),
                });
                report.steps += 1;
                state = outcome.state;
            }
            Err(Error::InnerSolve { report: inner }) => {
                let (ok, eig) = check_convexity(&state.u)?;
                report.records.push(IterationRecord {
                    iter: state.iter,
                    residual_l2: residual.to_f64().unwrap_or(f64::NAN),
                    inner_outer: inner.iterations,
                    inner_total: inner.total_inner,
                    inner_converged: false,
                    inner_final_residual: inner.final_residual,
                    wall_seconds: iter_start.elapsed().as_secs_f64(),
                    convexity_ok: ok,
                    min_eigenvalue: eig.to_f64().unwrap_or(f64::NAN),
                    spectral_radius: None,
                    spectral_radius_iterations: None,
                });
                report.diagnostics.push(format!(
                    "inner solver failed to converge at iteration {} \
                     (residual {:.3e} after {} inner iterations)",
                    state.iter, inner.final_residual, inner.total_inner
                ));
                break;
            }
            Err(other) => return Err(other),
        }
    }

    report.final_residual = report
        .records
        .last()
        .map(|r| r.residual_l2)
        .unwrap_or(f64::NAN);
    report.total_seconds = run_start.elapsed().as_secs_f64();
    Ok((state.u, report))
}

fn evaluation_record<T: Scalar>(
    iter: usize,
    residual: T,
    wall: f64,
    convexity_ok: bool,
    min_eigenvalue: T,
) -> IterationRecord {
    IterationRecord {
        iter,
        residual_l2: residual.to_f64().unwrap_or(f64::NAN),
        inner_outer: 0,
        inner_total: 0,
        inner_converged: true,
        inner_final_residual: 0.0,
        wall_seconds: wall,
        convexity_ok,
        min_eigenvalue: min_eigenvalue.to_f64().unwrap_or(f64::NAN),
        spectral_radius: None,
        spectral_radius_iterations: None,
    }
}

/// Convenience entry point for a grid-sampled density pair.
pub fn run_newton_pair<T: Scalar>(
    pair: &DensityPair<T>,
    cfg: &NewtonConfig<T>,
) -> Result<(ScalarField<T>, SolveReport<T>)> {
    let g = SampledDensity::new(pair.g().clone(), cfg.sample_mode)?;
    run_newton(pair.f(), &g, cfg)
}
