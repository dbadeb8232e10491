//! The coupled KdV-KdV system family
//!
//! ```text
//! u_t + a1 u_xxx = c11 u u_x + c12 v v_x
//! v_t + a2 v_xxx = c21 u_x v + c22 u v_x
//! ```
//!
//! with `a1 a2 != 0`, together with the named presets (Majda-Biello,
//! Hirota-Satsuma), the ratio-based admissibility classifier, and the
//! quadratic-invariant weight.
//!
//! Admissibility and the invariant weight are symbolic properties of the
//! model, so coefficient comparisons are exact equality of the stored reals.
//! Callers constructing coefficients from arithmetic must round
//! intentionally.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// The six reals of the unified coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemCoefficients<T> {
    pub a1: T,
    pub a2: T,
    pub c11: T,
    pub c12: T,
    pub c21: T,
    pub c22: T,
}

/// The four ranges of `a2/a1` the theory distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    NegativeRatio,
    MidRatio,
    UnitRatio,
    LargeRatio,
}

/// The five bilinear estimates; which ones hold depends on the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimate {
    Comm0,
    Comm1,
    Comm2,
    Comm3,
    Comm4,
}

/// Classification verdict for a coefficient set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass<T> {
    pub ratio: T,
    pub regime: Regime,
    pub admissible: bool,
    pub required_constraints: Vec<String>,
    pub available_estimates: Vec<Estimate>,
}

impl<T: Scalar> SystemCoefficients<T> {
    pub fn new(a1: T, a2: T, c11: T, c12: T, c21: T, c22: T) -> Result<Self> {
        let all = [a1, a2, c11, c12, c21, c22];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "all coefficients must be finite".into(),
            ));
        }
        if a1.is_zero() || a2.is_zero() {
            return Err(Error::InvalidParameter(
                "dispersion coefficients must satisfy a1*a2 != 0".into(),
            ));
        }
        Ok(Self {
            a1,
            a2,
            c11,
            c12,
            c21,
            c22,
        })
    }

    pub fn ratio(&self) -> T {
        self.a2 / self.a1
    }
}

/// Majda-Biello preset: `(1, a2, 0, -1, -1, -1)`.
pub fn make_majda_biello<T: Scalar>(a2: T) -> Result<SystemCoefficients<T>> {
    let one = T::one();
    SystemCoefficients::new(one, a2, T::zero(), -one, -one, -one)
}

/// Hirota-Satsuma preset: `(a1, 1, -6*a1, c12, 0, -3)`.
pub fn make_hirota_satsuma<T: Scalar>(a1: T, c12: T) -> Result<SystemCoefficients<T>> {
    let six = T::from_f64(6.0).unwrap();
    let three = T::from_f64(3.0).unwrap();
    SystemCoefficients::new(a1, T::one(), -six * a1, c12, T::zero(), -three)
}

/// True iff the v-equation nonlinearity is a perfect x-derivative (`c21 = c22`).
pub fn is_divergence_form<T: Scalar>(coeffs: &SystemCoefficients<T>) -> bool {
    coeffs.c21 == coeffs.c22
}

/// Classify the coefficient set against the admissibility table.
///
/// The boundary `a2/a1 = 4` belongs to the mid range.
pub fn classify<T: Scalar>(coeffs: &SystemCoefficients<T>) -> RegimeClass<T> {
    let ratio = coeffs.ratio();
    let zero = T::zero();
    let one = T::one();
    let four = T::from_f64(4.0).unwrap();

    let regime = if ratio < zero {
        Regime::NegativeRatio
    } else if ratio == one {
        Regime::UnitRatio
    } else if ratio <= four {
        Regime::MidRatio
    } else {
        Regime::LargeRatio
    };

    let (admissible, required_constraints, available_estimates) = match regime {
        Regime::NegativeRatio | Regime::LargeRatio => (
            true,
            vec!["arbitrary coefficients".to_string()],
            vec![
                Estimate::Comm0,
                Estimate::Comm1,
                Estimate::Comm2,
                Estimate::Comm3,
                Estimate::Comm4,
            ],
        ),
        Regime::MidRatio => (
            coeffs.c12 == zero && coeffs.c21 == zero && coeffs.c22 == zero,
            vec!["c12 = c21 = c22 = 0".to_string()],
            vec![Estimate::Comm0],
        ),
        Regime::UnitRatio => (
            coeffs.c21 == coeffs.c22,
            vec!["c21 = c22 (divergence form)".to_string()],
            vec![Estimate::Comm0, Estimate::Comm1, Estimate::Comm2],
        ),
    };

    RegimeClass {
        ratio,
        regime,
        admissible,
        required_constraints,
        available_estimates,
    }
}

/// Weight `eta` making `Q = \int (u^2 + eta v^2) dx` conserved along smooth
/// solutions, or `None` when no such weight exists.
///
/// The cancellation requirement is `c12 + eta (c22 - 2 c21) = 0`, i.e.
/// `eta = -c12 / (c22 - 2 c21)`. For Majda-Biello this gives `eta = +1` and
/// for Hirota-Satsuma `eta = +c12/3`; both signs were confirmed by the
/// numerical conservation oracle (see `check_quadratic_invariant`).
pub fn invariant_weight<T: Scalar>(coeffs: &SystemCoefficients<T>) -> Option<T> {
    if coeffs.c12.is_zero() {
        // u-norm already closed; Q = \int u^2 works.
        return Some(T::zero());
    }
    let denom = coeffs.c22 - coeffs.c21 - coeffs.c21;
    if denom.is_zero() {
        None
    } else {
        Some(-coeffs.c12 / denom)
    }
}
