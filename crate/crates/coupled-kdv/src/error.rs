use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("Hermitian symmetry violated (relative residual {residual:.3e})")]
    SymmetryViolation { residual: f64 },

    #[error("multiplier overflow: exponent {exponent:.1} exceeds the guard of {limit}")]
    MultiplierOverflow { exponent: f64, limit: f64 },

    #[error("norm overflow beyond log-space capacity (log norm {log_norm:.1})")]
    NormOverflow { log_norm: f64 },

    #[error("weighted spectrum is tail-dominated: sigma too large for this state's decay")]
    TailDominance,

    #[error("insufficient decay: only {usable} usable modes in the fit window (need {needed})")]
    InsufficientDecay { usable: usize, needed: usize },

    #[error("solution blow-up detected at t = {time}")]
    BlowUp { time: f64 },

    #[error("Picard iteration failed to contract at delta = {delta}")]
    ContractionFailure { delta: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
