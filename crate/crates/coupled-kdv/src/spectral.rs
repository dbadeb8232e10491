//! Periodic grid, Fourier transforms, spectral multipliers and dealiasing.
//!
//! Normalization: coefficients are stored so that `u_hat_k` of `e^{i xi_k x}`
//! is 1, i.e. `u_hat_k = (1/L) \int u e^{-i xi_k x} dx`. Parseval then reads
//! `\int |u|^2 dx = L \sum_k |u_hat_k|^2`.
//!
//! Coefficients are kept in FFT storage order: index `i` holds wavenumber
//! `k = i` for `i <= n/2` and `k = i - n` otherwise.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Hard guard on `sigma * max|xi|` for the exponential weight.
pub const EXP_OVERFLOW_LIMIT: f64 = 700.0;

/// Relative tolerance for the Hermitian-symmetry check.
const HERMITIAN_TOL: f64 = 1e-12;

/// Fixed periodic grid of collocation points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    n_points: usize,
    length: T,
    wavenumbers: Vec<T>,
}

impl<T: Scalar> GridSpec<T> {
    /// `n_points` must be a power of two, at least 16; `length` the period L.
    pub fn new(n_points: usize, length: T) -> Result<Arc<Self>> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "n_points must be a power of two >= 16, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > T::zero()) {
            return Err(Error::InvalidParameter("length must be positive".into()));
        }
        let base = T::TAU() / length;
        let wavenumbers = (0..n_points)
            .map(|i| {
                let k = signed_index(i, n_points);
                base * T::from_i64(k).unwrap()
            })
            .collect();
        Ok(Arc::new(Self {
            n_points,
            length,
            wavenumbers,
        }))
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> T {
        self.length
    }

    /// Wavenumbers in FFT storage order.
    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    pub fn max_wavenumber(&self) -> T {
        let n = self.n_points as i64;
        T::TAU() / self.length * T::from_i64(n / 2).unwrap()
    }

    /// Collocation points `x_j = j L / n`.
    pub fn nodes(&self) -> Vec<T> {
        let h = self.length / real::<T>(self.n_points as f64);
        (0..self.n_points)
            .map(|j| h * real::<T>(j as f64))
            .collect()
    }

    /// Storage index of integer wavenumber `k`.
    pub fn index_of(&self, k: i64) -> usize {
        let n = self.n_points as i64;
        (k.rem_euclid(n)) as usize
    }
}

/// Signed integer wavenumber held at storage index `i`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Fourier coefficients of a (usually real-valued) periodic field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    grid: Arc<GridSpec<T>>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zero(grid: Arc<GridSpec<T>>) -> Self {
        let n = grid.n_points();
        Self {
            grid,
            coeffs: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_coeffs(grid: Arc<GridSpec<T>>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Arc<GridSpec<T>> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient of integer wavenumber `k`.
    pub fn coeff(&self, k: i64) -> Complex<T> {
        self.coeffs[self.grid.index_of(k)]
    }

    pub fn set_coeff(&mut self, k: i64, value: Complex<T>) {
        let i = self.grid.index_of(k);
        self.coeffs[i] = value;
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max)
    }

    /// `sqrt(L * sum |u_hat_k|^2)`, the physical L2 norm by Parseval.
    pub fn l2_norm(&self) -> T {
        let sum: T = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.length() * sum).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_zero() && c.im.is_zero())
    }

    /// Relative deviation from Hermitian symmetry `u_hat_{-k} = conj(u_hat_k)`.
    pub fn hermitian_residual(&self) -> T {
        let n = self.grid.n_points();
        let scale = self.max_abs_coeff();
        if scale.is_zero() {
            return T::zero();
        }
        let mut worst = self.coeffs[n / 2].im.abs(); // Nyquist must be real
        worst = worst.max(self.coeffs[0].im.abs());
        for i in 1..n / 2 {
            let a = self.coeffs[i];
            let b = self.coeffs[n - i];
            let d = a - b.conj();
            worst = worst.max(d.norm());
        }
        worst / scale
    }

    /// Project onto the Hermitian-symmetric subspace.
    ///
    /// Used by the steppers to stop rounding drift from accumulating.
    pub fn hermitize(&mut self) {
        let n = self.grid.n_points();
        let half = real::<T>(0.5);
        self.coeffs[0].im = T::zero();
        // See `Transform::forward`: |k| = n/2 is outside the resolved band.
        self.coeffs[n / 2] = Complex::new(T::zero(), T::zero());
        for i in 1..n / 2 {
            let a = self.coeffs[i];
            let b = self.coeffs[n - i];
            let avg = (a + b.conj()) * half;
            self.coeffs[i] = avg;
            self.coeffs[n - i] = avg.conj();
        }
    }

    /// Coefficient-wise product with the multiplier `m(xi)`.
    ///
    /// Fails if `m` is not finite on some grid wavenumber.
    pub fn apply_multiplier<F>(&self, m: F) -> Result<Self>
    where
        F: Fn(T) -> Complex<T>,
    {
        let mut out = self.clone();
        for (c, &xi) in out.coeffs.iter_mut().zip(self.grid.wavenumbers()) {
            let factor = m(xi);
            if !(factor.re.is_finite() && factor.im.is_finite()) {
                return Err(Error::MultiplierOverflow {
                    exponent: f64::INFINITY,
                    limit: EXP_OVERFLOW_LIMIT,
                });
            }
            *c = *c * factor;
        }
        Ok(out)
    }

    /// Zero all modes with `|k| > n/3` (2/3 rule for quadratic products).
    pub fn dealias(&self) -> Self {
        let n = self.grid.n_points();
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let k = signed_index(i, n).unsigned_abs() as usize;
            if 3 * k > n {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
        out
    }
}

/// Multiplier `i xi` (spatial derivative).
pub fn derivative<T: Scalar>() -> impl Fn(T) -> Complex<T> {
    |xi| Complex::new(T::zero(), xi)
}

/// Multiplier `e^{sigma |xi|}`. Guarded against overflow at construction.
pub fn gevrey_weight<T: Scalar>(sigma: T, grid: &GridSpec<T>) -> Result<impl Fn(T) -> Complex<T>> {
    let exponent = (sigma * grid.max_wavenumber()).to_f64().unwrap_or(f64::NAN);
    if !(exponent.abs() <= EXP_OVERFLOW_LIMIT) {
        return Err(Error::MultiplierOverflow {
            exponent,
            limit: EXP_OVERFLOW_LIMIT,
        });
    }
    Ok(move |xi: T| Complex::new((sigma * xi.abs()).exp(), T::zero()))
}

/// Multiplier `(1 + |xi|)^s`.
pub fn sobolev_weight<T: Scalar>(s: T) -> impl Fn(T) -> Complex<T> {
    move |xi: T| Complex::new((T::one() + xi.abs()).powf(s), T::zero())
}

/// Multiplier `e^{i a xi^3 t}`: the free flow `e^{-t a d_x^3}` on the Fourier
/// side.
pub fn dispersion_phase<T: Scalar>(a: T, t: T) -> impl Fn(T) -> Complex<T> {
    move |xi: T| {
        let phase = a * xi * xi * xi * t;
        Complex::new(phase.cos(), phase.sin())
    }
}

/// FFT plans plus scratch for one grid. Confine a value to one thread;
/// distinct threads use distinct transforms.
pub struct Transform<T: Scalar> {
    grid: Arc<GridSpec<T>>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    imag_discards: u64,
}

impl<T: Scalar> Transform<T> {
    pub fn new(grid: Arc<GridSpec<T>>) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n_points());
        let inv = planner.plan_fft_inverse(grid.n_points());
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let n = grid.n_points();
        Self {
            grid,
            fwd,
            inv,
            buf: vec![Complex::new(T::zero(), T::zero()); n],
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
            imag_discards: 0,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec<T>> {
        &self.grid
    }

    /// Number of inverse transforms that discarded a nonzero imaginary part.
    pub fn imag_discards(&self) -> u64 {
        self.imag_discards
    }

    /// Physical samples -> Fourier coefficients.
    pub fn forward(&mut self, values: &[T]) -> Result<SpectralField<T>> {
        let n = self.grid.n_points();
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: values.len(),
            });
        }
        for (b, &v) in self.buf.iter_mut().zip(values) {
            *b = Complex::new(v, T::zero());
        }
        self.fwd
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = T::one() / real::<T>(n as f64);
        let mut coeffs: Vec<Complex<T>> = self.buf.iter().map(|c| *c * scale).collect();
        // The unpaired |k| = n/2 cosine mode is projected out: odd
        // multipliers (derivatives) and dispersion phases have no Hermitian
        // action on it, so the resolved band is |k| < n/2.
        coeffs[n / 2] = Complex::new(T::zero(), T::zero());
        SpectralField::from_coeffs(self.grid.clone(), coeffs)
    }

    /// Fourier coefficients -> physical samples. Requires Hermitian symmetry.
    pub fn inverse(&mut self, field: &SpectralField<T>) -> Result<Vec<T>> {
        if !Arc::ptr_eq(field.grid(), &self.grid) && field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let residual = field.hermitian_residual();
        let tol = real::<T>(HERMITIAN_TOL).max(T::epsilon() * real(1e4));
        if residual > tol {
            return Err(Error::SymmetryViolation {
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.buf.copy_from_slice(field.coeffs());
        self.inv
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let max_re = self
            .buf
            .iter()
            .map(|c| c.re.abs())
            .fold(T::zero(), T::max)
            .max(T::one());
        let max_im = self.buf.iter().map(|c| c.im.abs()).fold(T::zero(), T::max);
        if max_im > T::zero() {
            self.imag_discards += 1;
            // The Hermitian gate bounds this; anything larger is a bug.
            let imag_tol = real::<T>(1e-9).max(T::epsilon() * real(1e7));
            if max_im / max_re > imag_tol {
                return Err(Error::SymmetryViolation {
                    residual: (max_im / max_re).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(self.buf.iter().map(|c| c.re).collect())
    }

    /// Pointwise physical-space product of two spectra, back in spectral
    /// space. Applies the 2/3 rule when `dealias` is set.
    pub fn product(
        &mut self,
        a: &SpectralField<T>,
        b: &SpectralField<T>,
        dealias: bool,
    ) -> Result<SpectralField<T>> {
        let pa = self.inverse(a)?;
        let pb = self.inverse(b)?;
        let prod: Vec<T> = pa.iter().zip(&pb).map(|(&x, &y)| x * y).collect();
        let out = self.forward(&prod)?;
        Ok(if dealias { out.dealias() } else { out })
    }
}

/// A pair of spectra at a common time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState<T> {
    pub u_hat: SpectralField<T>,
    pub v_hat: SpectralField<T>,
    pub time: T,
}

impl<T: Scalar> SpectralState<T> {
    pub fn new(u_hat: SpectralField<T>, v_hat: SpectralField<T>, time: T) -> Result<Self> {
        if u_hat.grid() != v_hat.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u_hat, v_hat, time })
    }

    pub fn zero(grid: Arc<GridSpec<T>>) -> Self {
        Self {
            u_hat: SpectralField::zero(grid.clone()),
            v_hat: SpectralField::zero(grid),
            time: T::zero(),
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec<T>> {
        self.u_hat.grid()
    }
}
