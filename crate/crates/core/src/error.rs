use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("time step {dt:e} s is too coarse: {reason}")]
    StepTooCoarse { dt: f64, reason: String },

    #[error("non-finite optical power {0}")]
    NonFinitePower(f64),

    #[error("bias voltage {0} V is outside the measured range (0, 10] V")]
    BiasOutOfRange(f64),

    #[error("degenerate calibration anchors: {0}")]
    DegenerateAnchors(String),

    #[error("attack infeasible: {0}")]
    InfeasibleAttack(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown parameter key `{0}`")]
    UnknownKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
