//! Property tests for the structural invariants: translation equivariance,
//! telescoping reductions, periodic sampling, operator linearity, and the
//! zero-mean/unit-mass gauges.

use std::f64::consts::TAU;

use maot_core::density::TrigDensity;
use maot_core::field::{SampleMode, ScalarField};
use maot_core::grid::PeriodicGrid;
use maot_core::krylov::{power_iteration, LinearOperator};
use maot_core::ma::{build_linearization, normalize_density};
use maot_core::stencil::{diff_first, diff_mixed, diff_second, Axis, DiffOrder};
use proptest::collection::vec;
use proptest::prelude::*;

const N: usize = 8;

fn grid() -> PeriodicGrid {
    PeriodicGrid::new(N).unwrap()
}

fn field_values() -> impl Strategy<Value = Vec<f64>> {
    vec(-10.0..10.0f64, N * N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Cyclically shifting the input shifts every stencil output the same
    /// way, for arbitrary node data.
    #[test]
    fn stencils_commute_with_translation(
        values in field_values(),
        di in -8isize..8,
        dj in -8isize..8,
    ) {
        let f = ScalarField::from_values(grid(), values).unwrap();
        for order in [DiffOrder::Two, DiffOrder::Four] {
            let a = diff_first(&f, Axis::X1, order).unwrap().shifted(di, dj);
            let b = diff_first(&f.shifted(di, dj), Axis::X1, order).unwrap();
            prop_assert!(a.sub(&b).linf_norm() < 1e-11);
            let a = diff_mixed(&f, order).unwrap().shifted(di, dj);
            let b = diff_mixed(&f.shifted(di, dj), order).unwrap();
            prop_assert!(a.sub(&b).linf_norm() < 1e-9);
        }
    }

    /// Periodic centered differences telescope: the grid mean of any first
    /// derivative vanishes for arbitrary data.
    #[test]
    fn first_derivatives_have_zero_mean(values in field_values()) {
        let f = ScalarField::from_values(grid(), values).unwrap();
        for order in [DiffOrder::Two, DiffOrder::Four] {
            for axis in [Axis::X1, Axis::X2] {
                prop_assert!(diff_first(&f, axis, order).unwrap().mean().abs() < 1e-12);
            }
            prop_assert!(diff_second(&f, Axis::X1, order).unwrap().mean().abs() < 5e-11);
        }
    }

    /// Both interpolation modes reproduce stored values at the nodes, and
    /// sampling is 1-periodic in both coordinates.
    #[test]
    fn sampling_is_nodal_and_periodic(
        values in field_values(),
        i in 0usize..N,
        j in 0usize..N,
        shift1 in -3i32..4,
        shift2 in -3i32..4,
        off in 0.0..1.0f64,
    ) {
        let f = ScalarField::from_values(grid(), values).unwrap();
        let p = grid().point::<f64>(i, j);
        prop_assert_eq!(f.sample(p, SampleMode::Nearest), f.get(i, j));
        prop_assert!((f.sample(p, SampleMode::Bilinear) - f.get(i, j)).abs() < 1e-12);

        let q = (off * 0.83, off * 0.31);
        let q_shifted = (q.0 + shift1 as f64, q.1 + shift2 as f64);
        for mode in [SampleMode::Nearest, SampleMode::Bilinear] {
            prop_assert!((f.sample(q, mode) - f.sample(q_shifted, mode)).abs() < 1e-9);
        }
    }

    /// Mass renormalization always lands on unit mean and only translates.
    #[test]
    fn normalization_translates_to_unit_mass(values in field_values()) {
        let f = ScalarField::from_values(grid(), values).unwrap();
        let out = normalize_density(&f);
        prop_assert!((out.mean() - 1.0).abs() < 1e-13);
        let delta = out.sub(&f);
        prop_assert!((delta.max_value() - delta.min_value()).abs() < 1e-12);
    }

    /// The matrix-free operators are linear to roundoff:
    /// ||A(ax + by) - a Ax - b Ay|| <= 1e-10 (||x|| + ||y||).
    #[test]
    fn operators_are_linear(
        x in field_values(),
        y in field_values(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let g = grid();
        let u = ScalarField::from_fn(g, |x1: f64, x2: f64| {
            0.003 * (TAU * x1).cos() * (TAU * x2).sin()
        });
        let dens = TrigDensity::new(0.4, 1.0).unwrap();
        let coeffs = build_linearization(&u, &dens).unwrap();

        // Assembled operator.
        let sys = maot_core::fd::assemble(&coeffs, g).unwrap();
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(&xi, &yi)| a * xi + b * yi).collect();
        let mut axy = vec![0.0; N * N];
        let mut ax = vec![0.0; N * N];
        let mut ay = vec![0.0; N * N];
        sys.matvec(&combo, &mut axy);
        sys.matvec(&x, &mut ax);
        sys.matvec(&y, &mut ay);
        let defect: Vec<f64> = axy
            .iter()
            .zip(ax.iter().zip(&ay))
            .map(|(&t, (&u1, &u2))| t - a * u1 - b * u2)
            .collect();
        prop_assert!(norm(&defect) <= 1e-10 * (norm(&x) + norm(&y)));

        // Spectral preconditioned operator.
        let avg = maot_core::fft::average_coefficients(&coeffs).unwrap();
        let sym = maot_core::fft::build_symbol(&avg, g);
        let fx = ScalarField::from_values(g, x.clone()).unwrap();
        let fy = ScalarField::from_values(g, y.clone()).unwrap();
        let fc = ScalarField::from_values(g, combo).unwrap();
        let px = maot_core::fft::apply_preconditioned(&coeffs, &sym, &fx).unwrap();
        let py = maot_core::fft::apply_preconditioned(&coeffs, &sym, &fy).unwrap();
        let pc = maot_core::fft::apply_preconditioned(&coeffs, &sym, &fc).unwrap();
        let defect = pc.sub(&px.scaled(a)).sub(&py.scaled(b));
        let scale: f64 = norm(fx.values()) + norm(fy.values());
        prop_assert!(norm(defect.values()) <= 1e-10 * scale.max(1.0));
    }

    /// Power iteration on a symmetric (diagonal) map recovers the spectral
    /// radius within tolerance.
    #[test]
    fn power_iteration_matches_known_spectrum(
        mut d in vec(0.1..5.0f64, 12),
        seed in 0u64..1000,
    ) {
        // Make the dominant entry strictly dominant so convergence is fast.
        let imax = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        d[imax] *= 2.0;
        let radius = d[imax];

        struct Diag(Vec<f64>);
        impl LinearOperator<f64> for Diag {
            fn dim(&self) -> usize {
                self.0.len()
            }
            fn apply(&self, x: &[f64], y: &mut [f64]) {
                for i in 0..x.len() {
                    y[i] = self.0[i] * x[i];
                }
            }
        }
        let rep = power_iteration(&Diag(d), 1e-9, 5000, seed);
        prop_assert!(rep.converged);
        prop_assert!((rep.radius - radius).abs() < 1e-5 * radius);
    }
}

/// The whole pipeline also runs in single precision.
#[test]
fn newton_solves_in_f32() {
    let g = PeriodicGrid::new(16).unwrap();
    let prob = maot_core::synthetic::TrigProblem::<f32> {
        k: 100.0,
        gamma: 1.0,
        alpha: 0.5,
        rho: 1.0,
    };
    let f = prob.exact_forward_density(g);
    let dens = prob.density().unwrap();
    let cfg = maot_core::ma::NewtonConfig::<f32> {
        tol: 1e-4,
        inner_tol: 1e-3,
        max_iter: 20,
        ..Default::default()
    };
    let (u, report) = maot_core::ma::run_newton(&f, &dens, &cfg).unwrap();
    assert!(report.converged, "diagnostics: {:?}", report.diagnostics);
    let err = u.sub(&prob.exact_potential(g).zero_mean()).linf_norm();
    assert!(err < 5e-4, "err {err}");
}

/// Transport distance ignores constant shifts of the potential.
#[test]
fn transport_distance_shift_invariance() {
    let g = PeriodicGrid::new(16).unwrap();
    let u = ScalarField::from_fn(g, |x1: f64, x2| 0.01 * (TAU * x1).cos() * (TAU * x2).sin());
    let f = ScalarField::from_fn(g, |x1: f64, _| 1.0 + 0.4 * (TAU * x1).cos());
    let d0 = maot_core::imaging::transport_distance(&u, &f).unwrap();
    let d1 = maot_core::imaging::transport_distance(&u.map(|v| v + 123.0), &f).unwrap();
    assert!((d0 - d1).abs() < 1e-12);
}
