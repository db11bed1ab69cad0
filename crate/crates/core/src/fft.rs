//! Spectral solution of the linearized equation: precondition by the
//! constant-coefficient averaged operator, solve for sigma with restarted
//! GMRES, recover theta with one inverse transform.
//!
//! The averaged operator is diagonal in Fourier space; its reciprocal
//! symbol annihilates the k = 0 mode, which implements the zero-mean gauge.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::PeriodicGrid;
use crate::krylov::{gmres_restarted, KrylovReport, LinearOperator};
use crate::ma::{InnerSolverConfig, LinearizedCoefficients};
use crate::scalar::Scalar;

/// Planned complex 2D transforms on an n-by-n grid. Forward is
/// unnormalized; the inverse carries the 1/n^2 factor.
pub struct Fft2<T: Scalar> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Fft2<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn transpose(&self, data: &mut [Complex<T>]) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    fn process_2d(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        plan.process(data); // all rows at once
        self.transpose(data);
        plan.process(data); // former columns
        self.transpose(data);
    }

    pub fn forward(&self, real: &[T]) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = real.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.process_2d(&mut data, &self.fwd);
        data
    }

    pub fn inverse(&self, mut spectrum: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.process_2d(&mut spectrum, &self.inv);
        let scale = T::one() / T::from_grid(self.n * self.n);
        for v in &mut spectrum {
            *v = Complex::new(v.re * scale, v.im * scale);
        }
        spectrum
    }

    pub fn inverse_to_real(&self, spectrum: Vec<Complex<T>>) -> Vec<T> {
        self.inverse(spectrum).into_iter().map(|c| c.re).collect()
    }
}

/// Signed wavenumber for transform index m on an n-point axis:
/// 0..n/2-1, then -n/2..-1.
#[inline]
fn wavenumber(m: usize, n: usize) -> i64 {
    if m <= (n - 1) / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// First-derivative multiplier 2 pi i k, with the unpaired Nyquist mode
/// zeroed so real fields map to real fields.
#[inline]
fn d1<T: Scalar>(m: usize, n: usize) -> Complex<T> {
    if n.is_multiple_of(2) && m == n / 2 {
        return Complex::new(T::zero(), T::zero());
    }
    let k = T::cast(wavenumber(m, n) as f64);
    Complex::new(T::zero(), T::TAU() * k)
}

/// Pure second-derivative multiplier -(2 pi k)^2; the Nyquist mode is kept
/// (the multiplier is real and even).
#[inline]
fn d2<T: Scalar>(m: usize, n: usize) -> T {
    let k = T::cast(wavenumber(m, n) as f64);
    -(T::TAU() * k) * (T::TAU() * k)
}

/// Simpson averages of the linearized coefficients over the unit square.
#[derive(Debug, Clone, Copy)]
pub struct AveragedOperator<T> {
    pub a11: T,
    pub a12: T,
    pub a22: T,
    pub b1: T,
    pub b2: T,
}

pub fn average_coefficients<T: Scalar>(
    coeffs: &LinearizedCoefficients<T>,
) -> Result<AveragedOperator<T>> {
    Ok(AveragedOperator {
        a11: coeffs.a11.simpson_average()?,
        a12: coeffs.a12.simpson_average()?,
        a22: coeffs.a22.simpson_average()?,
        b1: coeffs.b1.simpson_average()?,
        b2: coeffs.b2.simpson_average()?,
    })
}

/// Reciprocal Fourier symbol of the averaged operator, zero where the
/// denominator vanishes (in particular at k = 0).
pub struct FourierSymbol<T> {
    n: usize,
    rho: Vec<Complex<T>>,
}

impl<T: Scalar> FourierSymbol<T> {
    #[inline]
    pub fn rho(&self, idx: usize) -> Complex<T> {
        self.rho[idx]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn build_symbol<T: Scalar>(op: &AveragedOperator<T>, grid: PeriodicGrid) -> FourierSymbol<T> {
    let n = grid.n();
    let two = T::cast(2.0);
    let mut rho = Vec::with_capacity(n * n);
    for m1 in 0..n {
        let d2_1 = d2::<T>(m1, n);
        let d1_1 = d1::<T>(m1, n);
        for m2 in 0..n {
            let d2_2 = d2::<T>(m2, n);
            let d1_2 = d1::<T>(m2, n);
            // Mixed product of two imaginary multipliers is real.
            let mixed = -(d1_1.im * d1_2.im);
            let re = op.a11 * d2_1 + op.a22 * d2_2 + two * op.a12 * mixed;
            let im = op.b1 * d1_1.im + op.b2 * d1_2.im;
            let denom = Complex::new(re, im);
            rho.push(if denom.norm_sqr() == T::zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                denom.inv()
            });
        }
    }
    FourierSymbol { n, rho }
}

/// Action of L applied to the averaged-operator inverse of sigma:
/// one forward transform, the d(d+1) spectral derivative products through
/// the symbol, the inverse transforms, and the pointwise combination with
/// the variable coefficients.
pub fn apply_preconditioned<T: Scalar>(
    coeffs: &LinearizedCoefficients<T>,
    symbol: &FourierSymbol<T>,
    sigma: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    let fft = Fft2::new(sigma.n());
    apply_preconditioned_with(&fft, coeffs, symbol, sigma)
}

pub fn apply_preconditioned_with<T: Scalar>(
    fft: &Fft2<T>,
    coeffs: &LinearizedCoefficients<T>,
    symbol: &FourierSymbol<T>,
    sigma: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    let grid = sigma.grid();
    let n = grid.n();
    if symbol.n != n || coeffs.grid() != grid {
        return Err(Error::GridMismatch(symbol.n, n));
    }

    let s_hat = fft.forward(sigma.values());
    let len = n * n;
    let zero = Complex::new(T::zero(), T::zero());
    let mut spec11 = vec![zero; len];
    let mut spec12 = vec![zero; len];
    let mut spec22 = vec![zero; len];
    let mut spec_b1 = vec![zero; len];
    let mut spec_b2 = vec![zero; len];
    for m1 in 0..n {
        let d2_1 = d2::<T>(m1, n);
        let d1_1 = d1::<T>(m1, n);
        for m2 in 0..n {
            let idx = m1 * n + m2;
            let base = symbol.rho(idx) * s_hat[idx];
            let d2_2 = d2::<T>(m2, n);
            let d1_2 = d1::<T>(m2, n);
            let mixed = -(d1_1.im * d1_2.im);
            spec11[idx] = base * d2_1;
            spec22[idx] = base * d2_2;
            spec12[idx] = base * mixed;
            spec_b1[idx] = base * d1_1;
            spec_b2[idx] = base * d1_2;
        }
    }

    let alpha11 = fft.inverse_to_real(spec11);
    let alpha12 = fft.inverse_to_real(spec12);
    let alpha22 = fft.inverse_to_real(spec22);
    let beta1 = fft.inverse_to_real(spec_b1);
    let beta2 = fft.inverse_to_real(spec_b2);

    let two = T::cast(2.0);
    let mut out = ScalarField::zeros(grid);
    let values = out.values_mut();
    for idx in 0..len {
        values[idx] = coeffs.a11.values()[idx] * alpha11[idx]
            + two * coeffs.a12.values()[idx] * alpha12[idx]
            + coeffs.a22.values()[idx] * alpha22[idx]
            + coeffs.b1.values()[idx] * beta1[idx]
            + coeffs.b2.values()[idx] * beta2[idx];
    }
    Ok(out)
}

fn project_zero_mean<T: Scalar>(values: &mut [T]) {
    let mean = values.iter().copied().sum::<T>() / T::from_grid(values.len());
    for v in values {
        *v -= mean;
    }
}

struct PreconditionedOperator<'a, T: Scalar> {
    coeffs: &'a LinearizedCoefficients<T>,
    symbol: &'a FourierSymbol<T>,
    fft: &'a Fft2<T>,
}

impl<T: Scalar> LinearOperator<T> for PreconditionedOperator<'_, T> {
    fn dim(&self) -> usize {
        self.coeffs.grid().len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        // The system lives on the mean-zero subspace: project on the way
        // in and out of every application.
        let mut input = x.to_vec();
        project_zero_mean(&mut input);
        let sigma = ScalarField::from_values(self.coeffs.grid(), input)
            .expect("operator input length fixed by dim");
        let out = apply_preconditioned_with(self.fft, self.coeffs, self.symbol, &sigma)
            .expect("grids validated at solver entry");
        y.copy_from_slice(out.values());
        project_zero_mean(y);
    }
}

/// Solves L theta = rhs by GMRES on the preconditioned system
/// L Lbar^{-1} sigma = rhs, then recovers theta with one inverse transform.
/// The right-hand side must have (numerically) zero mean.
pub fn solve_linearized_fft<T: Scalar>(
    coeffs: &LinearizedCoefficients<T>,
    rhs: &ScalarField<T>,
    inner: &InnerSolverConfig<T>,
) -> Result<(ScalarField<T>, KrylovReport)> {
    let grid = coeffs.grid();
    if rhs.grid() != grid {
        return Err(Error::GridMismatch(grid.n(), rhs.n()));
    }
    grid.require_power_of_two()?;
    let mean_gate = T::cast(1e-10).max(T::epsilon() * T::cast(100.0));
    if rhs.mean().abs() > mean_gate * (T::one() + rhs.linf_norm()) {
        return Err(Error::InvalidConfig(format!(
            "linearized solve needs a mean-zero right-hand side (mean {})",
            rhs.mean()
        )));
    }

    let averaged = average_coefficients(coeffs)?;
    let symbol = build_symbol(&averaged, grid);
    let fft = Fft2::new(grid.n());
    let op = PreconditionedOperator {
        coeffs,
        symbol: &symbol,
        fft: &fft,
    };

    let mut b = rhs.values().to_vec();
    project_zero_mean(&mut b);
    let x0 = vec![T::zero(); b.len()];
    let max_outer = inner.max_iter.div_ceil(inner.restart).max(1);
    let (sigma, report) = gmres_restarted(&op, &b, inner.restart, inner.tol, max_outer, &x0);

    // theta = sum_{k != 0} rho(k) sigma_hat(k) e^{2 pi i k x}
    let s_hat = fft.forward(&sigma);
    let theta_hat: Vec<Complex<T>> = s_hat
        .iter()
        .enumerate()
        .map(|(idx, &v)| symbol.rho(idx) * v)
        .collect();
    let theta_values = fft.inverse_to_real(theta_hat);
    let theta = ScalarField::from_values(grid, theta_values)?.zero_mean();
    Ok((theta, report))
}
