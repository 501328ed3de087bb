use thiserror::Error;

/// Errors raised by the analytic evaluators and the simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AoiError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("moment of order {order} is not finite")]
    NonfiniteMoment { order: u32 },

    /// The probability that a transfer beats the next arrival is too small to divide by.
    #[error("degenerate conditioning: probability {probability:e} is below 1e-300")]
    DegenerateConditioning { probability: f64 },

    #[error("margin does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("source {source_index} has zero success probability")]
    NoSuccessProbability { source_index: usize },
}

impl AoiError {
    /// Stable variant name, used by the command line runner on stderr.
    pub fn name(&self) -> &'static str {
        match self {
            AoiError::InvalidDistribution(_) => "InvalidDistribution",
            AoiError::InvalidParameter(_) => "InvalidParameter",
            AoiError::NonfiniteMoment { .. } => "NonfiniteMoment",
            AoiError::DegenerateConditioning { .. } => "DegenerateConditioning",
            AoiError::NoSignChange { .. } => "NoSignChange",
            AoiError::InvalidPolicy(_) => "InvalidPolicy",
            AoiError::NoSuccessProbability { .. } => "NoSuccessProbability",
        }
    }
}

pub type Result<T> = std::result::Result<T, AoiError>;

/// Smallest denominator any ratio in the crate is allowed to divide by.
pub(crate) const DENOMINATOR_FLOOR: f64 = 1e-300;

pub(crate) fn guard_probability(p: f64) -> Result<f64> {
    if p.is_finite() && p >= DENOMINATOR_FLOOR {
        Ok(p)
    } else {
        Err(AoiError::DegenerateConditioning { probability: p })
    }
}

pub(crate) fn require_rate(name: &str, rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(AoiError::InvalidParameter(format!("{name} must be finite and > 0, got {rate}")))
    }
}
