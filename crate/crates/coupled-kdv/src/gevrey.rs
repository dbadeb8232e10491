//! Gevrey norms and radius-of-analyticity estimation from coefficient decay.
//!
//! The norm is `sqrt(L * sum_k e^{2 sigma |xi_k|} (1+|xi_k|)^{2s} |u_hat_k|^2)`
//! under the crate's Parseval convention. Two independent radius estimators
//! are provided: a log-linear decay-rate fit and a norm-bisection proxy.

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::scalar::{real, Scalar};
use crate::spectral::{signed_index, SpectralField, SpectralState};
use serde::{Deserialize, Serialize};

/// Switch to log-space summation above this value of `sigma * max|xi|`.
const LOG_SPACE_THRESHOLD: f64 = 300.0;

/// Final norms larger than `e^{700}` are reported as overflow.
const LOG_CAPACITY: f64 = 700.0;

/// Default relative noise floor for the decay fit (double-precision
/// transform floor).
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-13;

/// Minimum usable modes for a decay fit.
const MIN_FIT_MODES: usize = 8;

/// Default search cap for the norm-bisection radius proxy.
pub const DEFAULT_SIGMA_CAP: f64 = 10.0;

/// Strip half-width `sigma` and Sobolev index `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams<T> {
    pub sigma: T,
    pub s: T,
}

impl<T: Scalar> GevreyParams<T> {
    pub fn new(sigma: T, s: T) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= T::zero() && s.is_finite()) {
            return Err(Error::InvalidParameter(
                "sigma must be finite and nonnegative, s finite".into(),
            ));
        }
        Ok(Self { sigma, s })
    }
}

/// Fitted analyticity radius with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate<T> {
    pub sigma_hat: T,
    /// Integer wavenumber band `(k_lo, k_hi)` the fit used.
    pub window: (usize, usize),
    pub slope_stderr: T,
    pub residual: T,
    /// True when the noise floor truncated the window before Nyquist.
    pub floor_hit: bool,
}

/// `||e^{sigma|D|} <D>^s f||_{L^2}` on the grid.
pub fn gevrey_norm<T: Scalar>(field: &SpectralField<T>, params: &GevreyParams<T>) -> Result<T> {
    let grid = field.grid();
    let two = real::<T>(2.0);
    let sigma2 = two * params.sigma;
    let s2 = two * params.s;
    let guard = (params.sigma * grid.max_wavenumber())
        .to_f64()
        .unwrap_or(f64::NAN);

    if guard <= LOG_SPACE_THRESHOLD {
        let mut sum = T::zero();
        for (&xi, c) in grid.wavenumbers().iter().zip(field.coeffs()) {
            let w = (sigma2 * xi.abs()).exp() * (T::one() + xi.abs()).powf(s2);
            sum = sum + w * c.norm_sqr();
        }
        return Ok((grid.length() * sum).sqrt());
    }

    // Log-space evaluation: logsumexp over nonzero coefficients.
    let mut logs: Vec<T> = Vec::with_capacity(grid.n_points());
    for (&xi, c) in grid.wavenumbers().iter().zip(field.coeffs()) {
        let a = c.norm_sqr();
        if a.is_zero() {
            continue;
        }
        logs.push(sigma2 * xi.abs() + s2 * (T::one() + xi.abs()).ln() + a.ln());
    }
    if logs.is_empty() {
        return Ok(T::zero());
    }
    let peak = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let rest: T = logs.iter().map(|&l| (l - peak).exp()).sum();
    let log_norm = (grid.length().ln() + peak + rest.ln()) / two;
    if log_norm.to_f64().unwrap_or(f64::INFINITY) > LOG_CAPACITY {
        return Err(Error::NormOverflow {
            log_norm: log_norm.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(log_norm.exp())
}

/// `max{||u||, ||v||}` in the Gevrey norm.
pub fn pair_norm<T: Scalar>(state: &SpectralState<T>, params: &GevreyParams<T>) -> Result<T> {
    let nu = gevrey_norm(&state.u_hat, params)?;
    let nv = gevrey_norm(&state.v_hat, params)?;
    Ok(nu.max(nv))
}

/// Decay-rate radius estimate with the default noise floor and low-frequency
/// exclusion `k_min = n/16`.
pub fn estimate_radius<T: Scalar>(
    field: &SpectralField<T>,
    noise_floor: T,
) -> Result<RadiusEstimate<T>> {
    let k_min = field.grid().n_points() / 16;
    estimate_radius_with(field, noise_floor, k_min)
}

/// Decay-rate radius estimate over the largest contiguous band of modes
/// `k >= k_min` with `|u_hat_k| > noise_floor * max|u_hat|`.
pub fn estimate_radius_with<T: Scalar>(
    field: &SpectralField<T>,
    noise_floor: T,
    k_min: usize,
) -> Result<RadiusEstimate<T>> {
    let grid = field.grid();
    let n = grid.n_points();
    let max_amp = field.max_abs_coeff();
    if max_amp.is_zero() {
        return Err(Error::InsufficientDecay {
            usable: 0,
            needed: MIN_FIT_MODES,
        });
    }
    let floor = noise_floor * max_amp;

    // Largest contiguous above-floor run over the positive wavenumbers.
    let usable: Vec<bool> = (k_min..=n / 2)
        .map(|k| field.coeff(k as i64).norm() > floor)
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for (off, &ok) in usable.iter().chain(std::iter::once(&false)).enumerate() {
        match (ok, run_start) {
            (true, None) => run_start = Some(off),
            (false, Some(start)) => {
                let len = off - start;
                if best.is_none_or(|(s, e)| len > e - s + 1) {
                    best = Some((k_min + start, k_min + off - 1));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let (k_lo, k_hi) = best.ok_or(Error::InsufficientDecay {
        usable: 0,
        needed: MIN_FIT_MODES,
    })?;
    let count = k_hi - k_lo + 1;
    if count < MIN_FIT_MODES {
        return Err(Error::InsufficientDecay {
            usable: count,
            needed: MIN_FIT_MODES,
        });
    }

    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for k in k_lo..=k_hi {
        let amp = field.coeff(k as i64).norm();
        if amp.is_zero() {
            continue; // skipped, never log of zero
        }
        xs.push(grid.wavenumbers()[grid.index_of(k as i64)].abs());
        ys.push(amp.ln());
    }
    let fit = fit_line(&xs, &ys).ok_or(Error::InsufficientDecay {
        usable: xs.len(),
        needed: MIN_FIT_MODES,
    })?;

    Ok(RadiusEstimate {
        sigma_hat: (-fit.slope).max(T::zero()),
        window: (k_lo, k_hi),
        slope_stderr: fit.slope_stderr,
        residual: fit.residual_rms,
        floor_hit: k_hi < n / 2,
    })
}

/// Norm-bisection radius proxy with the default search cap.
pub fn sup_finite_sigma<T: Scalar>(field: &SpectralField<T>, threshold: T) -> Result<T> {
    sup_finite_sigma_with_cap(field, threshold, real(DEFAULT_SIGMA_CAP))
}

/// Largest `sigma <= cap` with `||f||_{G^{sigma,0}} <= threshold`, to 1e-4
/// in sigma. Monotonicity of the norm in sigma justifies bisection.
pub fn sup_finite_sigma_with_cap<T: Scalar>(
    field: &SpectralField<T>,
    threshold: T,
    cap: T,
) -> Result<T> {
    let zero_params = GevreyParams::new(T::zero(), T::zero())?;
    let base = gevrey_norm(field, &zero_params)?;
    if threshold <= base {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold:e} must exceed the sigma=0 norm {base:e}"
        )));
    }
    let below = |sigma: T| -> bool {
        match GevreyParams::new(sigma, T::zero()).and_then(|p| gevrey_norm(field, &p)) {
            Ok(norm) => norm <= threshold,
            Err(_) => false, // overflow counts as exceeding the threshold
        }
    };
    if below(cap) {
        return Ok(cap);
    }
    let mut lo = T::zero();
    let mut hi = cap;
    let tol = real::<T>(1e-4);
    while hi - lo > tol {
        let mid = (lo + hi) * real::<T>(0.5);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// True iff index `i` of an `n`-point grid is within the fit band `[lo, hi]`.
#[allow(dead_code)]
fn in_band(i: usize, n: usize, lo: usize, hi: usize) -> bool {
    let k = signed_index(i, n).unsigned_abs() as usize;
    (lo..=hi).contains(&k)
}
