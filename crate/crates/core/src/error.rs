use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient sample: {rows} usable rows for {regressors} regressors")]
    InsufficientSample { rows: usize, regressors: usize },

    #[error("regressor matrix is rank deficient (condition ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("covariance matrix is singular or not positive definite ({context})")]
    SingularCovariance { context: String },

    #[error("instrument covariance vector is zero; the instrument carries no information")]
    ZeroGamma,

    #[error("companion matrix has an explosive root (modulus {modulus:.6})")]
    ExplosiveRoots { modulus: f64 },

    #[error("bandwidth {bandwidth} must be smaller than the number of score rows {rows}")]
    BandwidthTooLarge { bandwidth: usize, rows: usize },

    #[error("bootstrap spread is zero for element {index}")]
    ZeroSpread { index: usize },

    #[error("minimum distance fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that come out of the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::SingularCovariance { .. }
                | Error::ZeroGamma
                | Error::ExplosiveRoots { .. }
                | Error::ZeroSpread { .. }
                | Error::NonConvergence { .. }
        )
    }

    pub(crate) fn singular(context: impl Into<String>) -> Self {
        Error::SingularCovariance { context: context.into() }
    }
}

/// Non-fatal conditions collected during a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    WeakInstrument,
    DegenerateWeight { coordinate: usize },
    DroppedDraws { count: usize },
    NonConvergence { iterations: usize },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::WeakInstrument => write!(f, "instrument is constant on the estimation sample"),
            Warning::DegenerateWeight { coordinate } => {
                write!(f, "coordinate {coordinate} has near-zero bootstrap spread; weight capped")
            }
            Warning::DroppedDraws { count } => {
                write!(f, "{count} bootstrap draws produced non-finite functionals and were dropped")
            }
            Warning::NonConvergence { iterations } => {
                write!(f, "minimum distance fit stopped after {iterations} iterations")
            }
        }
    }
}
