use thiserror::Error;

/// Every failure the library can surface.
///
/// Variants are grouped by the CLI exit status they map to: configuration
/// problems exit 2, numerical failures exit 3 (check failures are reported
/// through report structs, not through this type).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("point {point:?} lies outside the grid extent [-{half_extent}, {half_extent}]")]
    Domain { point: Vec<f64>, half_extent: f64 },

    #[error("quotient undefined: {0}")]
    UndefinedQuotient(String),

    #[error("numerical integration did not converge: {0}")]
    Integration(String),

    #[error("Nehari projection failed: {0}")]
    Projection(String),

    #[error("solver converged to the trivial solution (max |u| = {0:e})")]
    TrivialSolution(f64),

    #[error("dilation pushes support outside the grid: {0}")]
    Extent(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("condition {condition} fails at t = {at:?}")]
    ConditionFailed { condition: String, at: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by user configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::ParameterDomain(_)
                | Error::Input(_)
                | Error::Config(_)
                | Error::Serde(_)
                | Error::Csv(_)
                | Error::Io { .. }
                | Error::InsufficientData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
