//! Run configuration: TOML ingestion, validation, and default resolution.
//!
//! A config file has dotted sections `[system]`, `[grid]`, `[initial]`,
//! `[stepper]`, `[experiment]`, `[output]`. Unknown keys are rejected with
//! the offending key named. `load_config` fills documented defaults and
//! validates cross-field constraints; [`RunConfig::resolve`] then builds the
//! concrete grid, coefficients, initial state and stepper, deriving the
//! default time step from the lifespan surrogate when none is given.

use crate::coeffs::{make_hirota_satsuma, make_majda_biello, SystemCoefficients};
use crate::dynamics::{default_dt, Scheme, StepperConfig};
use crate::error::{Error, Result};
use crate::gevrey::DEFAULT_NOISE_FLOOR;
use crate::profiles::{initial_profile, load_coefficients, ProfileParams, PROFILE_NAMES};
use crate::spectral::{GridSpec, SpectralState};
use crate::{DEFAULT_LENGTH, DEFAULT_N_POINTS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Coefficient selection: a named preset or the explicit six-tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// `"mb"` (takes `a2`) or `"hs"` (takes `a1`, `c12`); omit for explicit
    /// coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c11: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c21: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c22: Option<f64>,
}

impl SystemSection {
    pub fn build(&self) -> Result<SystemCoefficients<f64>> {
        let forbid = |fields: &[(&str, Option<f64>)], preset: &str| -> Result<()> {
            for (name, value) in fields {
                if value.is_some() {
                    return Err(Error::Config(format!(
                        "system.{name} is not a parameter of the \"{preset}\" preset"
                    )));
                }
            }
            Ok(())
        };
        match self.preset.as_deref() {
            Some("mb") => {
                forbid(
                    &[
                        ("a1", self.a1),
                        ("c11", self.c11),
                        ("c12", self.c12),
                        ("c21", self.c21),
                        ("c22", self.c22),
                    ],
                    "mb",
                )?;
                make_majda_biello(self.a2.unwrap_or(1.0))
            }
            Some("hs") => {
                forbid(
                    &[
                        ("a2", self.a2),
                        ("c11", self.c11),
                        ("c21", self.c21),
                        ("c22", self.c22),
                    ],
                    "hs",
                )?;
                make_hirota_satsuma(self.a1.unwrap_or(0.1), self.c12.unwrap_or(1.0))
            }
            Some(other) => Err(Error::Config(format!(
                "unknown system.preset \"{other}\" (expected \"mb\" or \"hs\")"
            ))),
            None => {
                let need = |name: &str, value: Option<f64>| {
                    value.ok_or_else(|| {
                        Error::Config(format!("system.{name} is required when no preset is given"))
                    })
                };
                SystemCoefficients::new(
                    need("a1", self.a1)?,
                    need("a2", self.a2)?,
                    need("c11", self.c11)?,
                    need("c12", self.c12)?,
                    need("c21", self.c21)?,
                    need("c22", self.c22)?,
                )
            }
        }
    }
}

fn default_n_points() -> usize {
    DEFAULT_N_POINTS
}

fn default_length() -> f64 {
    DEFAULT_LENGTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_N_POINTS,
            length: DEFAULT_LENGTH,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_sigma0() -> f64 {
    0.5
}

/// Initial data: a named profile with shape parameters, or a coefficient
/// file in the documented `u|v  k  re  im` format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// One of `gaussian`, `sech2`, `poisson-kernel`, `random-analytic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// Coefficient file; mutually exclusive with `profile`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "one")]
    pub amplitude_u: f64,
    #[serde(default = "one")]
    pub amplitude_v: f64,
    #[serde(default = "one")]
    pub width: f64,
    /// Bump center; defaults to the box midpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    /// Spectral decay rate of the analytic profiles.
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            profile: Some("sech2".into()),
            file: None,
            amplitude_u: 1.0,
            amplitude_v: 1.0,
            width: 1.0,
            center: None,
            sigma0: 0.5,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Etdrk4
}

fn default_true() -> bool {
    true
}

fn default_contour_points() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    /// Time step; when omitted it is derived from the lifespan surrogate of
    /// the resolved initial data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_contour_points")]
    pub contour_points: usize,
}

impl Default for StepperSection {
    fn default() -> Self {
        Self {
            dt: None,
            scheme: Scheme::Etdrk4,
            dealias: true,
            contour_points: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Classify,
    Radius,
    AclScan,
    CommutatorScan,
    Picard,
    InequalityScan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Simulate,
        ExperimentKind::Classify,
        ExperimentKind::Radius,
        ExperimentKind::AclScan,
        ExperimentKind::CommutatorScan,
        ExperimentKind::Picard,
        ExperimentKind::InequalityScan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Radius => "radius",
            ExperimentKind::AclScan => "acl-scan",
            ExperimentKind::CommutatorScan => "commutator-scan",
            ExperimentKind::Picard => "picard",
            ExperimentKind::InequalityScan => "inequality-scan",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind \"{name}\"")))
    }
}

fn default_stride() -> usize {
    10
}

fn default_rho() -> f64 {
    0.7
}

fn default_n_iters() -> usize {
    8
}

fn default_quadrature_nodes() -> usize {
    16
}

fn default_noise_floor() -> f64 {
    DEFAULT_NOISE_FLOOR
}

fn default_epsilon_tolerance() -> f64 {
    0.2
}

/// Experiment selection plus per-kind parameters. Parameters irrelevant to
/// the chosen kind are ignored; unknown keys are rejected outright.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Final time for `simulate` and `radius`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Observation stride (steps between record rows) for `simulate`.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Gevrey strip widths to track / scan. Defaults per experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Interval lengths for the `picard` contraction study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "default_n_iters")]
    pub n_iters: usize,
    #[serde(default = "default_quadrature_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default)]
    pub track_radius: bool,
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
    /// Slack on the -4/3 decay exponent for the `radius` verdict.
    #[serde(default = "default_epsilon_tolerance")]
    pub epsilon_tolerance: f64,
}

impl ExperimentSection {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            t_final: None,
            stride: default_stride(),
            sigmas: None,
            rho: default_rho(),
            deltas: None,
            n_iters: default_n_iters(),
            quadrature_nodes: default_quadrature_nodes(),
            track_radius: false,
            noise_floor: default_noise_floor(),
            epsilon_tolerance: default_epsilon_tolerance(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Refuse to run experiments on systems outside the admissible ranges.
    #[serde(default = "default_true")]
    pub enforce_admissibility: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
            seed: 0,
            enforce_admissibility: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub stepper: StepperSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Everything `run` needs, built once from a validated config.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    /// Config with derived defaults (e.g. `stepper.dt`) filled back in, so
    /// the echo written beside the outputs is fully explicit.
    pub config: RunConfig,
    pub coeffs: SystemCoefficients<f64>,
    pub grid: Arc<GridSpec<f64>>,
    pub state: SpectralState<f64>,
    pub stepper: StepperConfig<f64>,
}

impl RunConfig {
    /// Cross-field validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        self.system.build()?;
        if self.grid.n_points < 8 || !self.grid.n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid.n_points must be a power of two >= 8, got {}",
                self.grid.n_points
            )));
        }
        if !(self.grid.length > 0.0) || !self.grid.length.is_finite() {
            return Err(Error::Config(format!(
                "grid.length must be a positive finite number, got {}",
                self.grid.length
            )));
        }
        match (&self.initial.profile, &self.initial.file) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "initial.profile and initial.file are mutually exclusive".into(),
                ))
            }
            (Some(name), None) => {
                if !PROFILE_NAMES.contains(&name.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown initial.profile \"{name}\" (expected one of {})",
                        PROFILE_NAMES.join(", ")
                    )));
                }
            }
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "initial.file {} does not exist",
                        path.display()
                    )));
                }
            }
            (None, None) => {
                return Err(Error::Config(
                    "initial data needs either initial.profile or initial.file".into(),
                ))
            }
        }
        if let Some(dt) = self.stepper.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!(
                    "stepper.dt must be a positive finite number, got {dt}"
                )));
            }
        }
        if self.stepper.contour_points < 4 {
            return Err(Error::Config(
                "stepper.contour_points must be at least 4".into(),
            ));
        }
        let ex = &self.experiment;
        if let Some(t) = ex.t_final {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!(
                    "experiment.t_final must be a positive finite number, got {t}"
                )));
            }
        }
        if ex.stride == 0 {
            return Err(Error::Config("experiment.stride must be positive".into()));
        }
        if !(0.0 < ex.rho && ex.rho <= 1.0) {
            return Err(Error::Config(format!(
                "experiment.rho must lie in (0, 1], got {}",
                ex.rho
            )));
        }
        if let Some(sigmas) = &ex.sigmas {
            if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::Config(
                    "experiment.sigmas must be finite and nonnegative".into(),
                ));
            }
        }
        if let Some(deltas) = &ex.deltas {
            if deltas.is_empty()
                || deltas.iter().any(|d| !(d > &0.0))
                || deltas.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::Config(
                    "experiment.deltas must be positive and strictly ascending".into(),
                ));
            }
        }
        Ok(())
    }

    /// Build the concrete run inputs, deriving the default `dt` from the
    /// lifespan surrogate of the resolved initial data.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        self.validate()?;
        let coeffs = self.system.build()?;
        let grid = GridSpec::new(self.grid.n_points, self.grid.length)?;
        let state = match (&self.initial.profile, &self.initial.file) {
            (Some(name), None) => {
                let mut params = ProfileParams::new(&grid);
                params.amplitude_u = self.initial.amplitude_u;
                params.amplitude_v = self.initial.amplitude_v;
                params.width = self.initial.width;
                if let Some(center) = self.initial.center {
                    params.center = center;
                }
                params.sigma0 = self.initial.sigma0;
                params.seed = self.output.seed;
                initial_profile(name, &params, &grid)?
            }
            (None, Some(path)) => load_coefficients(path, &grid)?,
            _ => unreachable!("validate() enforces exactly one initial-data source"),
        };
        let dt = match self.stepper.dt {
            Some(dt) => dt,
            None => default_dt(state.u_hat.l2_norm() + state.v_hat.l2_norm()),
        };
        let stepper = StepperConfig::new(
            dt,
            self.stepper.scheme,
            self.stepper.dealias,
            self.stepper.contour_points,
        )?;
        let mut config = self.clone();
        config.stepper.dt = Some(dt);
        Ok(ResolvedRun {
            config,
            coeffs,
            grid,
            state,
            stepper,
        })
    }

    /// Canonical TOML rendering used for the echo file and the run id.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Deterministic run-directory name: a short hash of the canonical TOML.
    pub fn run_id(&self) -> Result<String> {
        let text = self.canonical_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(format!("{}-{}", self.experiment.kind.name(), &hex[..12]))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: RunConfig = toml::from_str(&text)?;
    config.validate()?;
    Ok(config)
}
