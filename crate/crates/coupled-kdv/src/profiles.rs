//! Initial-data library: a small closed set of named profiles plus a plain
//! coefficient-file loader for anything else.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::spectral::{GridSpec, SpectralField, SpectralState, Transform};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

/// Shape and amplitude parameters shared by the named profiles. Fields not
/// used by a given profile are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams<T> {
    pub amplitude_u: T,
    pub amplitude_v: T,
    /// Width of the localized bump profiles (gaussian, sech2).
    pub width: T,
    /// Bump center as an absolute position in [0, L).
    pub center: T,
    /// Spectral decay rate of the analytic profiles: |coefficients| fall off
    /// like e^{-sigma0 |xi|}, so sigma0 is the analyticity radius.
    pub sigma0: T,
    /// Phase seed for `random-analytic`.
    pub seed: u64,
}

impl<T: Scalar> ProfileParams<T> {
    pub fn new(grid: &GridSpec<T>) -> Self {
        Self {
            amplitude_u: T::one(),
            amplitude_v: T::one(),
            width: T::one(),
            center: grid.length() * real(0.5),
            sigma0: real(0.5),
            seed: 0,
        }
    }
}

pub const PROFILE_NAMES: [&str; 4] = ["gaussian", "sech2", "poisson-kernel", "random-analytic"];

/// Build the named initial state on `grid`; u and v share the shape but get
/// independent amplitudes (and, for random-analytic, independent phases).
pub fn initial_profile<T: Scalar>(
    name: &str,
    params: &ProfileParams<T>,
    grid: &Arc<GridSpec<T>>,
) -> Result<SpectralState<T>> {
    match name {
        "gaussian" => physical_profile(params, grid, |r| (-r * r * real::<T>(0.5)).exp()),
        "sech2" => physical_profile(params, grid, |r| {
            let c = r.cosh();
            T::one() / (c * c)
        }),
        "poisson-kernel" => {
            let u = exponential_spectrum(params.amplitude_u, params.sigma0, grid, None);
            let v = exponential_spectrum(params.amplitude_v, params.sigma0, grid, None);
            SpectralState::new(u, v, T::zero())
        }
        "random-analytic" => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let u = exponential_spectrum(params.amplitude_u, params.sigma0, grid, Some(&mut rng));
            let v = exponential_spectrum(params.amplitude_v, params.sigma0, grid, Some(&mut rng));
            SpectralState::new(u, v, T::zero())
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown profile '{other}' (expected one of {})",
            PROFILE_NAMES.join(", ")
        ))),
    }
}

fn physical_profile<T: Scalar>(
    params: &ProfileParams<T>,
    grid: &Arc<GridSpec<T>>,
    shape: impl Fn(T) -> T,
) -> Result<SpectralState<T>> {
    if !(params.width > T::zero()) {
        return Err(Error::InvalidParameter("profile width must be > 0".into()));
    }
    let mut xf = Transform::new(grid.clone());
    let l = grid.length();
    let samples: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&x| {
            // Nearest periodic image of the offset.
            let mut dx = x - params.center;
            if dx > l * real(0.5) {
                dx = dx - l;
            } else if dx < -l * real::<T>(0.5) {
                dx = dx + l;
            }
            shape(dx / params.width)
        })
        .collect();
    let scaled = |amp: T| -> Vec<T> { samples.iter().map(|&s| amp * s).collect() };
    let u = xf.forward(&scaled(params.amplitude_u))?;
    let v = xf.forward(&scaled(params.amplitude_v))?;
    SpectralState::new(u, v, T::zero())
}

/// `|coeff_k| = A e^{-sigma0 |xi_k|}`; real-positive coefficients when `rng`
/// is `None` (the Poisson kernel), seeded unimodular phases otherwise.
fn exponential_spectrum<T: Scalar>(
    amplitude: T,
    sigma0: T,
    grid: &Arc<GridSpec<T>>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> SpectralField<T> {
    let n = grid.n_points() as i64;
    let mut field = SpectralField::zero(grid.clone());
    if amplitude.is_zero() {
        return field;
    }
    field.set_coeff(0, Complex::new(amplitude, T::zero()));
    // |k| = n/2 stays zero: it is outside the transform's resolved band.
    for k in 1..n / 2 {
        let xi = grid.wavenumbers()[grid.index_of(k)];
        let mag = amplitude * (-sigma0 * xi.abs()).exp();
        let c = match rng.as_deref_mut() {
            Some(r) => {
                let theta: T = real::<T>(r.gen::<f64>()) * T::TAU();
                Complex::new(mag * theta.cos(), mag * theta.sin())
            }
            None => Complex::new(mag, T::zero()),
        };
        field.set_coeff(k, c);
        field.set_coeff(-k, c.conj());
    }
    field
}

/// Load a state from a plain text spectrum file. Each non-comment line is
///
/// ```text
/// <u|v> <k> <re> <im>
/// ```
///
/// whitespace-separated; `#` starts a comment; unlisted modes are zero.
pub fn load_coefficients<T: Scalar>(
    path: &Path,
    grid: &Arc<GridSpec<T>>,
) -> Result<SpectralState<T>> {
    let file = std::fs::File::open(path)?;
    let mut u = SpectralField::zero(grid.clone());
    let mut v = SpectralField::zero(grid.clone());
    let half = grid.n_points() as i64 / 2;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let bad = |what: &str| {
            Error::InvalidParameter(format!(
                "coefficient file {}:{}: {what}",
                path.display(),
                lineno + 1
            ))
        };
        let which = parts.next().ok_or_else(|| bad("missing field column"))?;
        let k: i64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad wavenumber"))?;
        let re: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad real part"))?;
        let im: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad imaginary part"))?;
        if parts.next().is_some() {
            return Err(bad("trailing columns"));
        }
        if k <= -half || k >= half {
            return Err(bad("wavenumber outside the resolved band |k| < n/2"));
        }
        let c = Complex::new(real::<T>(re), real::<T>(im));
        match which {
            "u" => u.set_coeff(k, c),
            "v" => v.set_coeff(k, c),
            _ => return Err(bad("field column must be 'u' or 'v'")),
        }
    }
    for (name, f) in [("u", &u), ("v", &v)] {
        let res = f.hermitian_residual();
        if res > real(1e-9) {
            return Err(Error::InvalidParameter(format!(
                "coefficient file {}: {name} spectrum is not Hermitian (residual {res:e})",
                path.display()
            )));
        }
    }
    SpectralState::new(u, v, T::zero())
}

/// Inverse of [`load_coefficients`]: dump the nonzero modes of a state.
pub fn save_coefficients<T: Scalar>(state: &SpectralState<T>, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let half = state.grid().n_points() as i64 / 2;
    writeln!(out, "# field k re im")?;
    for (name, f) in [("u", &state.u_hat), ("v", &state.v_hat)] {
        for k in (-half + 1)..half {
            let c = f.coeff(k);
            if c.norm() > T::zero() {
                writeln!(out, "{name} {k} {:e} {:e}", c.re, c.im)?;
            }
        }
    }
    Ok(())
}
