use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("level {level} outside 1..={max}")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("truncation overflow: {0}")]
    Truncation(String),

    #[error("second momentum moment diverges (amplitude tail decays like 1/p^{decay})")]
    DivergentMoment { decay: u32 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("domain overflow: {0}")]
    DomainOverflow(String),

    #[error("uncertainty relation violated: dx*dp = {product:.4e} < {bound:.4e}")]
    UncertaintyViolation { product: f64, bound: f64 },

    #[error("truncation leak {leak:.3e} exceeds budget {budget:.3e}")]
    TruncationLeak { leak: f64, budget: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Machine-readable tag used by the CLI error document.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::LevelOutOfRange { .. } => "level_out_of_range",
            Error::Truncation(_) => "truncation",
            Error::DivergentMoment { .. } => "divergent_moment",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::DomainOverflow(_) => "domain_overflow",
            Error::UncertaintyViolation { .. } => "uncertainty_violation",
            Error::TruncationLeak { .. } => "truncation_leak",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Rejected input, as opposed to a computation that could not meet
    /// its numerical requirements.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::LevelOutOfRange { .. }
                | Error::Truncation(_)
                | Error::UncertaintyViolation { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
