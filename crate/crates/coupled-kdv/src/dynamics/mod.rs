//! Right-hand sides, nonlinear commutators, stiff time stepping and the
//! Picard/Duhamel fixed-point iteration for the coupled system
//!
//! ```text
//! u_t + a1 u_xxx = c11 u u_x + c12 v v_x
//! v_t + a2 v_xxx = c21 u_x v + c22 u v_x
//! ```

mod picard;
mod stepper;

pub use picard::{gauss_legendre, picard_iterate, PicardResult};
pub use stepper::{
    default_dt, evolve, step, ObserverSpec, RhsMode, Scheme, Stepper, StepperConfig,
};

use crate::coeffs::{is_divergence_form, SystemCoefficients};
use crate::error::{Error, Result};
use crate::record::RunRecord;
use crate::scalar::{real, Scalar};
use crate::spectral::{derivative, gevrey_weight, SpectralField, SpectralState, Transform};
use serde::{Deserialize, Serialize};

/// Lifespan surrogate prefactor `c0` (engineering choice; see
/// [`lifespan_delta`]).
pub const DEFAULT_LIFESPAN_C0: f64 = 0.1;
/// Lifespan surrogate exponent `a` (the theory requires only `a > 2`).
pub const DEFAULT_LIFESPAN_EXPONENT: f64 = 4.0;

/// Relative tolerance for the tail-dominance guard in the commutators.
const TAIL_FRACTION: f64 = 1e-8;

/// Local-existence time surrogate `delta = c0 (1 + norm_sum)^{-a}`,
/// with `norm_sum = ||u0|| + ||v0||`.
pub fn lifespan_delta<T: Scalar>(norm_sum: T, c0: T, a: T) -> T {
    c0 * (T::one() + norm_sum).powf(-a)
}

/// Spectra of the quadratic nonlinearities of both equations.
#[derive(Debug, Clone)]
pub struct NonlinearTerms<T> {
    pub rhs_u: SpectralField<T>,
    pub rhs_v: SpectralField<T>,
    /// Largest physical |u| or |v| seen while forming the products;
    /// feeds the blow-up detector.
    pub max_abs: T,
}

/// The Gevrey-conjugation defects `f1`, `f2`.
#[derive(Debug, Clone)]
pub struct CommutatorTerms<T> {
    pub f1: SpectralField<T>,
    pub f2: SpectralField<T>,
    pub sigma: T,
}

/// `rhs_u = F[c11 u u_x + c12 v v_x]`, `rhs_v = F[c21 u_x v + c22 u v_x]`,
/// products formed pseudospectrally.
pub fn nonlinear_rhs<T: Scalar>(
    state: &SpectralState<T>,
    coeffs: &SystemCoefficients<T>,
    xf: &mut Transform<T>,
    dealias: bool,
) -> Result<NonlinearTerms<T>> {
    if state.grid() != xf.grid() {
        return Err(Error::GridMismatch);
    }
    let d = derivative::<T>();
    let u = xf.inverse(&state.u_hat)?;
    let v = xf.inverse(&state.v_hat)?;
    let ux = xf.inverse(&state.u_hat.apply_multiplier(&d)?)?;
    let vx = xf.inverse(&state.v_hat.apply_multiplier(&d)?)?;

    let max_abs = u.iter().chain(&v).map(|x| x.abs()).fold(T::zero(), T::max);

    let ru: Vec<T> = u
        .iter()
        .zip(&ux)
        .zip(v.iter().zip(&vx))
        .map(|((&u, &ux), (&v, &vx))| coeffs.c11 * u * ux + coeffs.c12 * v * vx)
        .collect();
    let rv: Vec<T> = u
        .iter()
        .zip(&ux)
        .zip(v.iter().zip(&vx))
        .map(|((&u, &ux), (&v, &vx))| coeffs.c21 * ux * v + coeffs.c22 * u * vx)
        .collect();

    let mut rhs_u = xf.forward(&ru)?;
    let mut rhs_v = xf.forward(&rv)?;
    if dealias {
        rhs_u = rhs_u.dealias();
        rhs_v = rhs_v.dealias();
    }
    Ok(NonlinearTerms {
        rhs_u,
        rhs_v,
        max_abs,
    })
}

fn tail_dominance_check<T: Scalar>(weighted: &SpectralField<T>) -> Result<()> {
    let n = weighted.grid().n_points();
    let peak = weighted.max_abs_coeff();
    if peak.is_zero() {
        return Ok(());
    }
    let mut tail_max = T::zero();
    for (i, c) in weighted.coeffs().iter().enumerate() {
        let k = crate::spectral::signed_index(i, n).unsigned_abs() as usize;
        if 3 * k > n {
            tail_max = tail_max.max(c.norm());
        }
    }
    if tail_max > real::<T>(TAIL_FRACTION) * peak {
        return Err(Error::TailDominance);
    }
    Ok(())
}

/// The commutators
///
/// ```text
/// f1 = (c11/2) d_x (W(u^2) - (W u)^2) + (c12/2) d_x (W(v^2) - (W v)^2)
/// f2 = c21 (W(u_x v) - (W u_x)(W v)) + c22 (W(u v_x) - (W u)(W v_x))
/// ```
///
/// with `W = e^{sigma |d_x|}`, computed term by term. For divergence-form
/// systems (`c21 = c22`) the two f2 terms combine into
/// `c21 d_x (W(uv) - (W u)(W v))`, which is what is returned; a debug
/// assertion cross-checks the two-term form.
///
/// Products are formed pseudospectrally without dealiasing, so the result
/// equals the exact convolution sum whenever the inputs are band-limited to
/// |k| <= n/4.
pub fn commutator_terms<T: Scalar>(
    state: &SpectralState<T>,
    coeffs: &SystemCoefficients<T>,
    sigma: T,
    xf: &mut Transform<T>,
) -> Result<CommutatorTerms<T>> {
    if state.grid() != xf.grid() {
        return Err(Error::GridMismatch);
    }
    if sigma < T::zero() || !sigma.is_finite() {
        return Err(Error::InvalidParameter("sigma must be >= 0".into()));
    }
    let grid = state.grid().clone();
    if sigma.is_zero() {
        return Ok(CommutatorTerms {
            f1: SpectralField::zero(grid.clone()),
            f2: SpectralField::zero(grid),
            sigma,
        });
    }

    let w = gevrey_weight(sigma, &grid)?;
    let d = derivative::<T>();

    let wu = state.u_hat.apply_multiplier(&w)?;
    let wv = state.v_hat.apply_multiplier(&w)?;
    tail_dominance_check(&wu)?;
    tail_dominance_check(&wv)?;

    let half = real::<T>(0.5);

    // f1: weight-then-square minus square-then-weight, per component.
    let f1 = {
        let uu = xf.product(&state.u_hat, &state.u_hat, false)?;
        let vv = xf.product(&state.v_hat, &state.v_hat, false)?;
        let wuu = uu.apply_multiplier(&w)?;
        let wvv = vv.apply_multiplier(&w)?;
        let uu_w = xf.product(&wu, &wu, false)?;
        let vv_w = xf.product(&wv, &wv, false)?;
        let mut out = SpectralField::zero(grid.clone());
        for i in 0..grid.n_points() {
            let cu = wuu.coeffs()[i] - uu_w.coeffs()[i];
            let cv = wvv.coeffs()[i] - vv_w.coeffs()[i];
            out.coeffs_mut()[i] = (cu * coeffs.c11 + cv * coeffs.c12) * half;
        }
        out.apply_multiplier(&d)?
    };

    let f2 = if is_divergence_form(coeffs) {
        let combined = f2_divergence_form(state, coeffs, &wu, &wv, &w, xf)?;
        #[cfg(debug_assertions)]
        {
            let two_term = f2_two_term(state, coeffs, &wu, &wv, &w, xf)?;
            // The two forms can cancel to pure roundoff (e.g. single-mode
            // data), so allow an absolute slack at roundoff level of the
            // weighted inputs on top of the relative tolerance.
            let input_scale =
                wu.max_abs_coeff() * wv.max_abs_coeff() * grid.max_wavenumber() * coeffs.c21.abs();
            let scale = combined.max_abs_coeff().max(two_term.max_abs_coeff());
            let diff = combined
                .coeffs()
                .iter()
                .zip(two_term.coeffs())
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max);
            debug_assert!(
                diff <= scale * real(1e-10) + input_scale * real(1e-12),
                "divergence-form f2 disagrees with the two-term form"
            );
        }
        combined
    } else {
        f2_two_term(state, coeffs, &wu, &wv, &w, xf)?
    };

    Ok(CommutatorTerms { f1, f2, sigma })
}

/// Two-term form of f2. Public so the divergence-form agreement can be
/// checked independently.
pub fn commutator_f2_two_term<T: Scalar>(
    state: &SpectralState<T>,
    coeffs: &SystemCoefficients<T>,
    sigma: T,
    xf: &mut Transform<T>,
) -> Result<SpectralField<T>> {
    if sigma.is_zero() {
        return Ok(SpectralField::zero(state.grid().clone()));
    }
    let grid = state.grid().clone();
    let w = gevrey_weight(sigma, &grid)?;
    let wu = state.u_hat.apply_multiplier(&w)?;
    let wv = state.v_hat.apply_multiplier(&w)?;
    f2_two_term(state, coeffs, &wu, &wv, &w, xf)
}

fn f2_two_term<T: Scalar>(
    state: &SpectralState<T>,
    coeffs: &SystemCoefficients<T>,
    wu: &SpectralField<T>,
    wv: &SpectralField<T>,
    w: impl Fn(T) -> num_complex::Complex<T>,
    xf: &mut Transform<T>,
) -> Result<SpectralField<T>> {
    let d = derivative::<T>();
    let ux_hat = state.u_hat.apply_multiplier(&d)?;
    let vx_hat = state.v_hat.apply_multiplier(&d)?;
    let wux = wu.apply_multiplier(&d)?;
    let wvx = wv.apply_multiplier(&d)?;

    let t1 = {
        let uxv = xf
            .product(&ux_hat, &state.v_hat, false)?
            .apply_multiplier(&w)?;
        let wuxwv = xf.product(&wux, wv, false)?;
        sub(&uxv, &wuxwv)
    };
    let t2 = {
        let uvx = xf
            .product(&state.u_hat, &vx_hat, false)?
            .apply_multiplier(&w)?;
        let wuwvx = xf.product(wu, &wvx, false)?;
        sub(&uvx, &wuwvx)
    };
    let mut out = SpectralField::zero(state.grid().clone());
    for i in 0..out.grid().n_points() {
        out.coeffs_mut()[i] = t1.coeffs()[i] * coeffs.c21 + t2.coeffs()[i] * coeffs.c22;
    }
    Ok(out)
}

fn f2_divergence_form<T: Scalar>(
    state: &SpectralState<T>,
    coeffs: &SystemCoefficients<T>,
    wu: &SpectralField<T>,
    wv: &SpectralField<T>,
    w: impl Fn(T) -> num_complex::Complex<T>,
    xf: &mut Transform<T>,
) -> Result<SpectralField<T>> {
    let d = derivative::<T>();
    let uv = xf
        .product(&state.u_hat, &state.v_hat, false)?
        .apply_multiplier(&w)?;
    let wuwv = xf.product(wu, wv, false)?;
    let mut out = sub(&uv, &wuwv).apply_multiplier(&d)?;
    for c in out.coeffs_mut() {
        *c = *c * coeffs.c21;
    }
    Ok(out)
}

fn sub<T: Scalar>(a: &SpectralField<T>, b: &SpectralField<T>) -> SpectralField<T> {
    let mut out = a.clone();
    for (c, d) in out.coeffs_mut().iter_mut().zip(b.coeffs()) {
        *c = *c - *d;
    }
    out
}

/// Drift of `Q = \int (u^2 + eta v^2) dx` over a recorded run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantDrift<T> {
    pub max_drift: T,
    /// True when the drift is relative to `|Q(0)|`; absolute when `Q(0) = 0`.
    pub relative: bool,
    pub q0: T,
}

/// Maximum drift of the weighted quadratic invariant over the record.
///
/// This is the oracle that resolves the sign of the invariant weight: the
/// correct `eta` exhibits drift at the integrator tolerance, the opposite
/// sign a drift orders of magnitude larger.
pub fn check_quadratic_invariant<T: Scalar>(record: &RunRecord<T>, eta: T) -> InvariantDrift<T> {
    let q = |row: &crate::record::RecordRow<T>| row.q_u + eta * row.q_v;
    let q0 = record.rows.first().map(&q).unwrap_or_else(T::zero);
    let relative = !q0.is_zero();
    let mut max_drift = T::zero();
    for row in &record.rows {
        let mut d = (q(row) - q0).abs();
        if relative {
            d = d / q0.abs();
        }
        max_drift = max_drift.max(d);
    }
    InvariantDrift {
        max_drift,
        relative,
        q0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_hirota_satsuma, make_majda_biello};
    use crate::spectral::GridSpec;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid64() -> Arc<GridSpec<f64>> {
        GridSpec::new(64, 2.0 * PI).unwrap()
    }

    fn state_from(
        g: &Arc<GridSpec<f64>>,
        xf: &mut Transform<f64>,
        u: impl Fn(f64) -> f64,
        v: impl Fn(f64) -> f64,
    ) -> SpectralState<f64> {
        let uu: Vec<f64> = g.nodes().iter().map(|&x| u(x)).collect();
        let vv: Vec<f64> = g.nodes().iter().map(|&x| v(x)).collect();
        SpectralState::new(xf.forward(&uu).unwrap(), xf.forward(&vv).unwrap(), 0.0).unwrap()
    }

    /// Dense convolution-sum oracle for the nonlinear right sides.
    fn rhs_oracle(
        state: &SpectralState<f64>,
        coeffs: &SystemCoefficients<f64>,
    ) -> (SpectralField<f64>, SpectralField<f64>) {
        let g = state.grid().clone();
        let n = g.n_points() as i64;
        let half = n / 2;
        let xi = |k: i64| g.wavenumbers()[g.index_of(k)];
        let mut ru = SpectralField::zero(g.clone());
        let mut rv = SpectralField::zero(g.clone());
        for k in -half + 1..=half {
            let mut su = Complex::new(0.0, 0.0);
            let mut sv = Complex::new(0.0, 0.0);
            for k1 in -half + 1..=half {
                let k2 = k - k1;
                if k2 <= -half || k2 > half {
                    continue;
                }
                let u1 = state.u_hat.coeff(k1);
                let u2 = state.u_hat.coeff(k2);
                let v1 = state.v_hat.coeff(k1);
                let v2 = state.v_hat.coeff(k2);
                let i_xi1 = Complex::new(0.0, xi(k1));
                let i_xi2 = Complex::new(0.0, xi(k2));
                su += u1 * (i_xi2 * u2) * coeffs.c11 + v1 * (i_xi2 * v2) * coeffs.c12;
                sv += (i_xi1 * u1) * v2 * coeffs.c21 + u1 * (i_xi2 * v2) * coeffs.c22;
            }
            ru.set_coeff(k, su);
            rv.set_coeff(k, sv);
        }
        (ru, rv)
    }

    #[test]
    fn rhs_zero_state() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_majda_biello(1.0).unwrap();
        let state = SpectralState::zero(g);
        let terms = nonlinear_rhs(&state, &coeffs, &mut xf, true).unwrap();
        assert!(terms.rhs_u.is_zero());
        assert!(terms.rhs_v.is_zero());
    }

    #[test]
    fn rhs_mb_with_zero_v() {
        // MB has c11 = 0, so with v = 0 both right sides vanish.
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_majda_biello(1.0).unwrap();
        let state = state_from(&g, &mut xf, |x| x.cos() + 0.3 * (2.0 * x).sin(), |_| 0.0);
        let terms = nonlinear_rhs(&state, &coeffs, &mut xf, true).unwrap();
        assert!(terms.rhs_u.max_abs_coeff() < 1e-15);
        assert!(terms.rhs_v.max_abs_coeff() < 1e-15);
    }

    #[test]
    fn rhs_matches_convolution_oracle() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_majda_biello(1.0).unwrap();
        let state = state_from(&g, &mut xf, |x| x.cos(), |x| x.sin());
        let terms = nonlinear_rhs(&state, &coeffs, &mut xf, false).unwrap();
        let (ou, ov) = rhs_oracle(&state, &coeffs);
        for k in -31..=32i64 {
            assert!(
                (terms.rhs_u.coeff(k) - ou.coeff(k)).norm() < 1e-12,
                "u k={k}"
            );
            assert!(
                (terms.rhs_v.coeff(k) - ov.coeff(k)).norm() < 1e-12,
                "v k={k}"
            );
        }
    }

    /// Quadratic-form oracle: discrete double sum with the kernel
    /// `e^{sigma|xi1+xi2|} - e^{sigma|xi1|} e^{sigma|xi2|}`
    /// (weight-the-product minus product-the-weighted).
    fn commutator_oracle(
        state: &SpectralState<f64>,
        coeffs: &SystemCoefficients<f64>,
        sigma: f64,
    ) -> (SpectralField<f64>, SpectralField<f64>) {
        let g = state.grid().clone();
        let n = g.n_points() as i64;
        let half = n / 2;
        let xi = |k: i64| g.wavenumbers()[g.index_of(k)];
        let mut f1 = SpectralField::zero(g.clone());
        let mut f2 = SpectralField::zero(g.clone());
        for k in -half + 1..=half {
            let mut s1 = Complex::new(0.0, 0.0);
            let mut s2 = Complex::new(0.0, 0.0);
            for k1 in -half + 1..=half {
                let k2 = k - k1;
                if k2 <= -half || k2 > half {
                    continue;
                }
                let kernel =
                    (sigma * xi(k).abs()).exp() - (sigma * (xi(k1).abs() + xi(k2).abs())).exp();
                let u1 = state.u_hat.coeff(k1);
                let u2 = state.u_hat.coeff(k2);
                let v1 = state.v_hat.coeff(k1);
                let v2 = state.v_hat.coeff(k2);
                s1 += (u1 * u2 * (coeffs.c11 / 2.0) + v1 * v2 * (coeffs.c12 / 2.0)) * kernel;
                s2 += (u1 * Complex::new(0.0, xi(k1)) * v2 * coeffs.c21
                    + u1 * v2 * Complex::new(0.0, xi(k2)) * coeffs.c22)
                    * kernel;
            }
            f1.set_coeff(k, Complex::new(0.0, xi(k)) * s1);
            f2.set_coeff(k, s2);
        }
        (f1, f2)
    }

    fn band_limited_state(g: &Arc<GridSpec<f64>>, seed: u64) -> SpectralState<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut f = SpectralField::zero(g.clone());
            for k in 1..=8i64 {
                let c = Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                f.set_coeff(k, c);
                f.set_coeff(-k, c.conj());
            }
            f
        };
        let u = mk(&mut rng);
        let v = mk(&mut rng);
        SpectralState::new(u, v, 0.0).unwrap()
    }

    #[test]
    fn commutator_sigma_zero_is_exactly_zero() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_hirota_satsuma(0.1, 1.0).unwrap();
        let state = band_limited_state(&g, 1);
        let c = commutator_terms(&state, &coeffs, 0.0, &mut xf).unwrap();
        assert!(c.f1.is_zero());
        assert!(c.f2.is_zero());
    }

    #[test]
    fn commutator_f1_zero_when_c11_c12_zero() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = SystemCoefficients::new(1.0, 2.0, 0.0, 0.0, 1.0, 2.0).unwrap();
        let state = band_limited_state(&g, 2);
        let c = commutator_terms(&state, &coeffs, 0.1, &mut xf).unwrap();
        assert!(c.f1.max_abs_coeff() < 1e-14);
        assert!(c.f2.max_abs_coeff() > 1e-6);
    }

    #[test]
    fn commutator_matches_quadratic_form_oracle() {
        // The kernel vanishes on same-sign wavenumber pairs, so each
        // component needs at least two modes for a nonzero commutator.
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_majda_biello(1.0).unwrap();
        let state = state_from(
            &g,
            &mut xf,
            |x| x.cos() + (3.0 * x).sin(),
            |x| x.sin() + (2.0 * x).cos(),
        );
        let c = commutator_terms(&state, &coeffs, 0.1, &mut xf).unwrap();
        let (o1, o2) = commutator_oracle(&state, &coeffs, 0.1);
        let scale1 = o1.max_abs_coeff().max(1e-300);
        let scale2 = o2.max_abs_coeff().max(1e-300);
        for k in -31..=32i64 {
            assert!(
                (c.f1.coeff(k) - o1.coeff(k)).norm() / scale1 < 1e-11,
                "f1 k={k}"
            );
            assert!(
                (c.f2.coeff(k) - o2.coeff(k)).norm() / scale2 < 1e-11,
                "f2 k={k}"
            );
        }
    }

    #[test]
    fn commutator_oracle_agreement_seeded_states() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        for coeffs in [
            make_majda_biello(1.0).unwrap(),
            make_hirota_satsuma(0.1, 1.0).unwrap(),
        ] {
            for seed in 0..5u64 {
                let state = band_limited_state(&g, seed);
                let c = commutator_terms(&state, &coeffs, 0.05, &mut xf).unwrap();
                let (o1, o2) = commutator_oracle(&state, &coeffs, 0.05);
                let s1 = o1.max_abs_coeff().max(1e-300);
                let s2 = o2.max_abs_coeff().max(1e-300);
                for k in -31..=32i64 {
                    assert!((c.f1.coeff(k) - o1.coeff(k)).norm() / s1 < 1e-11);
                    assert!((c.f2.coeff(k) - o2.coeff(k)).norm() / s2 < 1e-11);
                }
            }
        }
    }

    #[test]
    fn divergence_form_agreement() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_majda_biello(1.0).unwrap();
        for seed in 10..15u64 {
            let state = band_limited_state(&g, seed);
            let combined = commutator_terms(&state, &coeffs, 0.08, &mut xf).unwrap();
            let two_term = commutator_f2_two_term(&state, &coeffs, 0.08, &mut xf).unwrap();
            let scale = two_term.max_abs_coeff();
            for k in -31..=32i64 {
                assert!(
                    (combined.f2.coeff(k) - two_term.coeff(k)).norm() <= 1e-10 * scale,
                    "k={k}"
                );
            }
        }
    }

    #[test]
    fn tail_dominance_guard_triggers() {
        let g = grid64();
        let mut xf = Transform::new(g.clone());
        let coeffs = make_majda_biello(1.0).unwrap();
        // A flat spectrum gets tail-dominated under the exponential weight.
        let mut u = SpectralField::zero(g.clone());
        for k in 1..=31i64 {
            u.set_coeff(k, Complex::new(1.0, 0.0));
            u.set_coeff(-k, Complex::new(1.0, 0.0));
        }
        let state = SpectralState::new(u, SpectralField::zero(g.clone()), 0.0).unwrap();
        assert!(matches!(
            commutator_terms(&state, &coeffs, 1.0, &mut xf),
            Err(Error::TailDominance)
        ));
    }

    #[test]
    fn lifespan_surrogate() {
        let d: f64 = lifespan_delta(1.0, 0.1, 4.0);
        assert!((d - 0.1 / 16.0).abs() < 1e-15);
        assert!(lifespan_delta(0.0f64, 0.1, 4.0) == 0.1);
    }
}
