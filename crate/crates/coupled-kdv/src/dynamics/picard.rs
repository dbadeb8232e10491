//! The Duhamel fixed-point iteration
//!
//! ```text
//! u^{(n)}(t) = e^{-t a1 d_x^3} u0 + \int_0^t e^{-(t-tau) a1 d_x^3} N1(u^{(n-1)}, v^{(n-1)})(tau) dtau
//! ```
//!
//! (and likewise for v), iterated directly rather than through the stepper,
//! so the geometric contraction of the fixed-point map itself is measurable.
//!
//! Iterates are stored at Chebyshev-Lobatto time samples on [0, delta]; the
//! Duhamel integral is evaluated per output time by Gauss-Legendre quadrature,
//! with the previous iterate's nonlinearity interpolated barycentrically in
//! time between the samples.

use crate::coeffs::SystemCoefficients;
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::spectral::{dispersion_phase, SpectralField, SpectralState, Transform};
use num_complex::Complex;

use super::nonlinear_rhs;

/// Number of Chebyshev-Lobatto time samples per trajectory.
pub const TIME_SAMPLES: usize = 33;

const MIN_QUADRATURE_NODES: usize = 8;

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre recurrence in `f64`
/// and cast afterwards, which is ample for the quadrature orders in play.
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and P_n'(x) by three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (
        nodes.into_iter().map(real).collect(),
        weights.into_iter().map(real).collect(),
    )
}

/// Chebyshev-Lobatto samples of [0, delta], increasing, endpoints included.
fn lobatto_times<T: Scalar>(delta: T, m: usize) -> Vec<T> {
    let half = delta * real::<T>(0.5);
    (0..m)
        .map(|i| {
            let theta = T::PI() * real::<T>(i as f64) / real::<T>((m - 1) as f64);
            half * (T::one() - theta.cos())
        })
        .collect()
}

/// Barycentric weights for the Lobatto samples: (-1)^i, halved at endpoints.
fn barycentric_weights<T: Scalar>(m: usize) -> Vec<T> {
    (0..m)
        .map(|i| {
            let sign = if i % 2 == 0 { T::one() } else { -T::one() };
            if i == 0 || i == m - 1 {
                sign * real::<T>(0.5)
            } else {
                sign
            }
        })
        .collect()
}

/// Coefficient-wise barycentric interpolation of a sampled spectral pair.
fn interpolate_pair<T: Scalar>(
    times: &[T],
    bary: &[T],
    samples_u: &[SpectralField<T>],
    samples_v: &[SpectralField<T>],
    t: T,
) -> (SpectralField<T>, SpectralField<T>) {
    for (i, &ti) in times.iter().enumerate() {
        if t == ti {
            return (samples_u[i].clone(), samples_v[i].clone());
        }
    }
    let mut num_u = vec![Complex::new(T::zero(), T::zero()); samples_u[0].coeffs().len()];
    let mut num_v = num_u.clone();
    let mut den = T::zero();
    for i in 0..times.len() {
        let w = bary[i] / (t - times[i]);
        den = den + w;
        for (acc, c) in num_u.iter_mut().zip(samples_u[i].coeffs()) {
            *acc = *acc + *c * w;
        }
        for (acc, c) in num_v.iter_mut().zip(samples_v[i].coeffs()) {
            *acc = *acc + *c * w;
        }
    }
    let grid = samples_u[0].grid().clone();
    let inv = T::one() / den;
    for c in num_u.iter_mut().chain(num_v.iter_mut()) {
        *c = *c * inv;
    }
    (
        SpectralField::from_coeffs(grid.clone(), num_u).expect("length preserved"),
        SpectralField::from_coeffs(grid, num_v).expect("length preserved"),
    )
}

/// Outcome of [`picard_iterate`]: every iterate's trajectory at the shared
/// time samples, plus the successive sup-in-time L2 difference norms
/// `d_n = max_t max(||u^(n) - u^(n-1)||, ||v^(n) - v^(n-1)||)`.
#[derive(Debug, Clone)]
pub struct PicardResult<T: Scalar> {
    pub times: Vec<T>,
    /// `trajectories[n][i]` is the n-th iterate at `times[i]`;
    /// `trajectories[0]` is the free linear flow.
    pub trajectories: Vec<Vec<SpectralState<T>>>,
    /// `diffs[n-1] = d_n` for n = 1..=n_iters.
    pub diffs: Vec<T>,
}

impl<T: Scalar> PicardResult<T> {
    /// Ratios `d_{n+1}/d_n` (skipping zero denominators).
    pub fn contraction_ratios(&self) -> Vec<T> {
        self.diffs
            .windows(2)
            .filter(|w| !w[0].is_zero())
            .map(|w| w[1] / w[0])
            .collect()
    }
}

pub fn picard_iterate<T: Scalar>(
    initial: &SpectralState<T>,
    coeffs: &SystemCoefficients<T>,
    delta: T,
    n_iters: usize,
    quadrature_nodes: usize,
) -> Result<PicardResult<T>> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    if quadrature_nodes < MIN_QUADRATURE_NODES {
        return Err(Error::InvalidParameter(format!(
            "quadrature_nodes must be >= {MIN_QUADRATURE_NODES}"
        )));
    }
    let grid = initial.grid().clone();
    let mut xf = Transform::new(grid.clone());
    let times = lobatto_times(delta, TIME_SAMPLES);
    let bary = barycentric_weights::<T>(TIME_SAMPLES);
    let (gl_nodes, gl_weights) = gauss_legendre::<T>(quadrature_nodes);

    let flow_u = |t: T| dispersion_phase(coeffs.a1, t);
    let flow_v = |t: T| dispersion_phase(coeffs.a2, t);

    // Iterate 0: the free flow.
    let free: Vec<SpectralState<T>> = times
        .iter()
        .map(|&t| {
            Ok(SpectralState {
                u_hat: initial.u_hat.apply_multiplier(flow_u(t))?,
                v_hat: initial.v_hat.apply_multiplier(flow_v(t))?,
                time: initial.time + t,
            })
        })
        .collect::<Result<_>>()?;
    let mut trajectories = vec![free];
    let mut diffs: Vec<T> = Vec::with_capacity(n_iters);
    let mut rising = 0usize;

    for _ in 1..=n_iters {
        let prev = trajectories.last().unwrap();

        // Nonlinearity of the previous iterate at the time samples; the
        // quadrature interpolates these rather than re-evaluating FFTs at
        // every Gauss node.
        let mut rhs_u_samples = Vec::with_capacity(TIME_SAMPLES);
        let mut rhs_v_samples = Vec::with_capacity(TIME_SAMPLES);
        for state in prev {
            let terms = nonlinear_rhs(state, coeffs, &mut xf, true)?;
            rhs_u_samples.push(terms.rhs_u);
            rhs_v_samples.push(terms.rhs_v);
        }

        let mut next = Vec::with_capacity(TIME_SAMPLES);
        let mut d_n = T::zero();
        for (i, &t_i) in times.iter().enumerate() {
            let mut u = initial.u_hat.apply_multiplier(flow_u(t_i))?;
            let mut v = initial.v_hat.apply_multiplier(flow_v(t_i))?;
            if !t_i.is_zero() {
                let half = t_i * real::<T>(0.5);
                for (&x, &w) in gl_nodes.iter().zip(&gl_weights) {
                    let tau = half * (x + T::one());
                    let (nu, nv) =
                        interpolate_pair(&times, &bary, &rhs_u_samples, &rhs_v_samples, tau);
                    let scale = half * w;
                    let pu = nu.apply_multiplier(flow_u(t_i - tau))?;
                    let pv = nv.apply_multiplier(flow_v(t_i - tau))?;
                    for (c, p) in u.coeffs_mut().iter_mut().zip(pu.coeffs()) {
                        *c = *c + *p * scale;
                    }
                    for (c, p) in v.coeffs_mut().iter_mut().zip(pv.coeffs()) {
                        *c = *c + *p * scale;
                    }
                }
            }
            let du = l2_diff(&u, &prev[i].u_hat);
            let dv = l2_diff(&v, &prev[i].v_hat);
            d_n = d_n.max(du.max(dv));
            next.push(SpectralState {
                u_hat: u,
                v_hat: v,
                time: initial.time + t_i,
            });
        }

        if let Some(&last) = diffs.last() {
            if d_n > last {
                rising += 1;
            } else {
                rising = 0;
            }
            if rising >= 3 {
                return Err(Error::ContractionFailure {
                    delta: delta.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        diffs.push(d_n);
        trajectories.push(next);
    }

    Ok(PicardResult {
        times,
        trajectories,
        diffs,
    })
}

fn l2_diff<T: Scalar>(a: &SpectralField<T>, b: &SpectralField<T>) -> T {
    let sum: T = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    (a.grid().length() * sum).sqrt()
}
