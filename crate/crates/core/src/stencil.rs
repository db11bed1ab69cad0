//! Centered periodic finite-difference stencils of second and fourth order.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scalar::Scalar;

/// Coordinate axis of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    #[inline]
    fn offset(self, d: isize) -> (isize, isize) {
        match self {
            Axis::X1 => (d, 0),
            Axis::X2 => (0, d),
        }
    }
}

/// Accuracy order of a centered stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DiffOrder {
    Two,
    Four,
}

impl DiffOrder {
    fn support(self) -> usize {
        match self {
            DiffOrder::Two => 3,
            DiffOrder::Four => 5,
        }
    }
}

fn check_support<T: Scalar>(field: &ScalarField<T>, order: DiffOrder) -> Result<()> {
    let n = field.n();
    if n < order.support() {
        return Err(Error::GridTooSmall {
            n,
            order: match order {
                DiffOrder::Two => 2,
                DiffOrder::Four => 4,
            },
        });
    }
    Ok(())
}

/// First derivative along `axis`.
///
/// Order 2: (f_{+1} - f_{-1}) / 2h.
/// Order 4: (-f_{+2} + 8 f_{+1} - 8 f_{-1} + f_{-2}) / 12h.
pub fn diff_first<T: Scalar>(
    field: &ScalarField<T>,
    axis: Axis,
    order: DiffOrder,
) -> Result<ScalarField<T>> {
    check_support(field, order)?;
    let grid = field.grid();
    let n = grid.n();
    let h: T = grid.h();
    let mut out = ScalarField::zeros(grid);
    match order {
        DiffOrder::Two => {
            let scale = T::one() / (T::cast(2.0) * h);
            let (pi, pj) = axis.offset(1);
            let (mi, mj) = axis.offset(-1);
            for i in 0..n {
                for j in 0..n {
                    let v = field.at_offset(i, j, pi, pj) - field.at_offset(i, j, mi, mj);
                    out.set(i, j, v * scale);
                }
            }
        }
        DiffOrder::Four => {
            let scale = T::one() / (T::cast(12.0) * h);
            let eight = T::cast(8.0);
            let (p2i, p2j) = axis.offset(2);
            let (pi, pj) = axis.offset(1);
            let (mi, mj) = axis.offset(-1);
            let (m2i, m2j) = axis.offset(-2);
            for i in 0..n {
                for j in 0..n {
                    let v = -field.at_offset(i, j, p2i, p2j)
                        + eight * field.at_offset(i, j, pi, pj)
                        - eight * field.at_offset(i, j, mi, mj)
                        + field.at_offset(i, j, m2i, m2j);
                    out.set(i, j, v * scale);
                }
            }
        }
    }
    Ok(out)
}

/// Pure second derivative along `axis`.
///
/// Order 2: (f_{+1} - 2 f_0 + f_{-1}) / h^2.
/// Order 4: (-f_{+2} + 16 f_{+1} - 30 f_0 + 16 f_{-1} - f_{-2}) / 12h^2.
pub fn diff_second<T: Scalar>(
    field: &ScalarField<T>,
    axis: Axis,
    order: DiffOrder,
) -> Result<ScalarField<T>> {
    check_support(field, order)?;
    let grid = field.grid();
    let n = grid.n();
    let h: T = grid.h();
    let mut out = ScalarField::zeros(grid);
    match order {
        DiffOrder::Two => {
            let scale = T::one() / (h * h);
            let two = T::cast(2.0);
            let (pi, pj) = axis.offset(1);
            let (mi, mj) = axis.offset(-1);
            for i in 0..n {
                for j in 0..n {
                    let v = field.at_offset(i, j, pi, pj) - two * field.get(i, j)
                        + field.at_offset(i, j, mi, mj);
                    out.set(i, j, v * scale);
                }
            }
        }
        DiffOrder::Four => {
            let scale = T::one() / (T::cast(12.0) * h * h);
            let sixteen = T::cast(16.0);
            let thirty = T::cast(30.0);
            let (p2i, p2j) = axis.offset(2);
            let (pi, pj) = axis.offset(1);
            let (mi, mj) = axis.offset(-1);
            let (m2i, m2j) = axis.offset(-2);
            for i in 0..n {
                for j in 0..n {
                    let v = -field.at_offset(i, j, p2i, p2j)
                        + sixteen * field.at_offset(i, j, pi, pj)
                        - thirty * field.get(i, j)
                        + sixteen * field.at_offset(i, j, mi, mj)
                        - field.at_offset(i, j, m2i, m2j);
                    out.set(i, j, v * scale);
                }
            }
        }
    }
    Ok(out)
}

/// Mixed second derivative d^2/dx1 dx2, built as the composition of two
/// first-derivative stencils of the same order. This keeps the accuracy
/// order and the periodic symmetry of the one-dimensional stencils.
pub fn diff_mixed<T: Scalar>(field: &ScalarField<T>, order: DiffOrder) -> Result<ScalarField<T>> {
    let d1 = diff_first(field, Axis::X1, order)?;
    diff_first(&d1, Axis::X2, order)
}

/// Laplacian using pure second-derivative stencils of the given order.
pub fn laplacian<T: Scalar>(field: &ScalarField<T>, order: DiffOrder) -> Result<ScalarField<T>> {
    let d11 = diff_second(field, Axis::X1, order)?;
    let d22 = diff_second(field, Axis::X2, order)?;
    Ok(d11.add(&d22))
}

/// Gradient (both first derivatives) at the given order.
pub fn gradient<T: Scalar>(
    field: &ScalarField<T>,
    order: DiffOrder,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    Ok((
        diff_first(field, Axis::X1, order)?,
        diff_first(field, Axis::X2, order)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::TAU;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn max_err(a: &ScalarField<f64>, b: &ScalarField<f64>) -> f64 {
        a.sub(b).linf_norm()
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let f = ScalarField::<f64>::constant(grid(16), 4.2);
        for order in [DiffOrder::Two, DiffOrder::Four] {
            for axis in [Axis::X1, Axis::X2] {
                assert!(diff_first(&f, axis, order).unwrap().linf_norm() < 1e-12);
                assert!(diff_second(&f, axis, order).unwrap().linf_norm() < 1e-10);
            }
            assert!(diff_mixed(&f, order).unwrap().linf_norm() < 1e-12);
        }
    }

    #[test]
    fn first_derivative_of_sine_fourth_order() {
        let g = grid(32);
        let f = ScalarField::<f64>::from_fn(g, |x1, _| (TAU * x1).sin());
        let d = diff_first(&f, Axis::X1, DiffOrder::Four).unwrap();
        let exact = ScalarField::<f64>::from_fn(g, |x1, _| TAU * (TAU * x1).cos());
        // Fourth-order error constant for sin(2 pi x): (2 pi)^5 h^4 / 30.
        let h: f64 = 1.0 / 32.0;
        let bound = TAU.powi(5) * h.powi(4) / 30.0 * 1.5;
        assert!(max_err(&d, &exact) < bound, "err {}", max_err(&d, &exact));
    }

    #[test]
    fn no_dependence_on_other_axis() {
        let g = grid(16);
        let f = ScalarField::<f64>::from_fn(g, |x1, _| (TAU * x1).sin());
        let d = diff_first(&f, Axis::X2, DiffOrder::Four).unwrap();
        assert!(d.linf_norm() < 1e-12);
        // Replicated noise along axis 1 has zero pure second derivative there.
        let noise = ScalarField::<f64>::from_fn(g, |_, x2| (37.0 * x2).sin().fract());
        let d11 = diff_second(&noise, Axis::X1, DiffOrder::Two).unwrap();
        assert!(d11.linf_norm() < 1e-10);
    }

    #[test]
    fn mixed_fourth_order_matches_closed_form() {
        let g = grid(32);
        let f = ScalarField::<f64>::from_fn(g, |x1, x2| (TAU * x1).cos() * (TAU * x2).sin());
        let d = diff_mixed(&f, DiffOrder::Four).unwrap();
        let exact = ScalarField::<f64>::from_fn(g, |x1, x2| {
            -TAU * TAU * (TAU * x1).sin() * (TAU * x2).cos()
        });
        let h: f64 = 1.0 / 32.0;
        // Two composed fourth-order stencils; generous constant.
        let bound = 2.0 * TAU.powi(6) * h.powi(4) / 30.0 * 1.5;
        assert!(max_err(&d, &exact) < bound, "err {}", max_err(&d, &exact));
    }

    #[test]
    fn observed_order_matches_stencil_order() {
        // log-log slope over n in {16,32,64,128} for sin(2 pi x1).
        for (order, expected) in [(DiffOrder::Two, 2.0), (DiffOrder::Four, 4.0)] {
            let mut errs = Vec::new();
            for n in [16usize, 32, 64, 128] {
                let g = grid(n);
                let f =
                    ScalarField::<f64>::from_fn(g, |x1, x2| (TAU * x1).sin() * (TAU * x2).cos());
                let d = diff_first(&f, Axis::X1, order).unwrap();
                let exact = ScalarField::<f64>::from_fn(g, |x1, x2| {
                    TAU * (TAU * x1).cos() * (TAU * x2).cos()
                });
                errs.push(max_err(&d, &exact));
            }
            for w in errs.windows(2) {
                let slope = (w[0] / w[1]).log2();
                assert!(
                    (slope - expected).abs() < 0.2,
                    "order {:?}: slope {}",
                    order,
                    slope
                );
            }
        }
    }

    #[test]
    fn mean_of_first_derivative_telescopes_to_zero() {
        let g = grid(16);
        let f = ScalarField::<f64>::from_fn(g, |x1, x2| (x1 * 7.3).sin() + (x2 * 3.1).cos() * x1);
        for order in [DiffOrder::Two, DiffOrder::Four] {
            let d = diff_first(&f, Axis::X1, order).unwrap();
            assert!(d.mean().abs() < 1e-13);
        }
    }

    #[test]
    fn stencils_commute_with_translation() {
        let g = grid(16);
        let f =
            ScalarField::<f64>::from_fn(g, |x1, x2| (TAU * x1).cos() + (TAU * 2.0 * x2).sin() * x1);
        for order in [DiffOrder::Two, DiffOrder::Four] {
            let d_then_shift = diff_first(&f, Axis::X1, order).unwrap().shifted(3, -2);
            let shift_then_d = diff_first(&f.shifted(3, -2), Axis::X1, order).unwrap();
            assert!(max_err(&d_then_shift, &shift_then_d) < 1e-14);
            let m_then_shift = diff_mixed(&f, order).unwrap().shifted(-1, 5);
            let shift_then_m = diff_mixed(&f.shifted(-1, 5), order).unwrap();
            assert!(max_err(&m_then_shift, &shift_then_m) < 1e-12);
        }
    }

    #[test]
    fn grid_too_small_for_stencil_errors() {
        let f = ScalarField::<f64>::constant(grid(4), 1.0);
        assert!(matches!(
            diff_first(&f, Axis::X1, DiffOrder::Four),
            Err(Error::GridTooSmall { .. })
        ));
        let tiny = ScalarField::<f64>::constant(grid(2), 1.0);
        assert!(matches!(
            diff_first(&tiny, Axis::X1, DiffOrder::Two),
            Err(Error::GridTooSmall { .. })
        ));
    }
}
