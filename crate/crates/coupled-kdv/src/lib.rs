//! Pseudospectral simulation and measurement suite for coupled KdV-KdV
//! systems (Majda-Biello, Hirota-Satsuma and the unified six-coefficient
//! family), instrumenting Gevrey norms, the radius of spatial analyticity,
//! nonlinear commutators, Picard contraction and almost-conservation
//! defects on a large periodic box.
//!
//! The core is generic over the scalar type (`f32`/`f64`) through the
//! [`scalar::Scalar`] trait; concrete `f64` aliases live at the crate root.
//!
//! The periodic box is a modeling caveat: the underlying theory lives on the
//! whole line, and a large box with spectrally decaying data emulates it at
//! desk scale. Box-size sensitivity is reported, not corrected.

pub mod coeffs;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod gevrey;
pub mod profiles;
pub mod record;
pub mod runner;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

/// Default box size: L = 64 pi.
pub const DEFAULT_LENGTH: f64 = 64.0 * std::f64::consts::PI;
/// Default number of collocation points.
pub const DEFAULT_N_POINTS: usize = 1024;

// Concrete f64 aliases for the generic core.
pub type Coefficients = coeffs::SystemCoefficients<f64>;
pub type Grid = spectral::GridSpec<f64>;
pub type Field = spectral::SpectralField<f64>;
pub type State = spectral::SpectralState<f64>;
pub type FieldTransform = spectral::Transform<f64>;
pub type Params = gevrey::GevreyParams<f64>;
pub type Radius = gevrey::RadiusEstimate<f64>;
