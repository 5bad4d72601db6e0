use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} is constant (sd below 1e-12)")]
    ConstantColumn(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("could not parse cell at row {row}, column {col}: {value:?}")]
    ParseError {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("response column {0} not found")]
    MissingResponseColumn(String),

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("n x n ridge system is numerically singular (condition estimate {condition:.3e}); increase the ridge penalty")]
    SingularSystem { condition: f64 },

    #[error("coordinate descent did not converge after {0} sweeps")]
    MaxIterExceeded(usize),

    #[error("nonconvex coordinate descent diverged after {0} sweeps")]
    NonConvexDiverged(usize),

    #[error("all penalty weights are zero")]
    AllWeightsZero,

    #[error("stability profile is empty")]
    EmptyProfile,

    #[error("lambda {0} is not part of the profile grid")]
    LambdaNotInProfile(f64),

    #[error("invalid correlation {0}: must lie in [0, 1)")]
    InvalidRho(f64),

    #[error("oracle weights need the true coefficient vector")]
    OracleUnavailable,

    #[error("OLS initial estimates need n > p (n = {n}, p = {p})")]
    OlsUnderdetermined { n: usize, p: usize },

    #[error("at lambda index {lambda_index}, subsample {subsample}: {source}")]
    InSubsample {
        lambda_index: usize,
        subsample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {replicate}, scheme {scheme}: {source}")]
    InReplicate {
        replicate: usize,
        scheme: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Name of the variant, for structured error reports.
    pub fn variant(&self) -> &'static str {
        match self {
            Error::ConstantColumn(_) => "ConstantColumn",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::ParseError { .. } => "ParseError",
            Error::MissingResponseColumn(_) => "MissingResponseColumn",
            Error::RaggedRows { .. } => "RaggedRows",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::MaxIterExceeded(_) => "MaxIterExceeded",
            Error::NonConvexDiverged(_) => "NonConvexDiverged",
            Error::AllWeightsZero => "AllWeightsZero",
            Error::EmptyProfile => "EmptyProfile",
            Error::LambdaNotInProfile(_) => "LambdaNotInProfile",
            Error::InvalidRho(_) => "InvalidRho",
            Error::OracleUnavailable => "OracleUnavailable",
            Error::OlsUnderdetermined { .. } => "OlsUnderdetermined",
            Error::InSubsample { .. } => "InSubsample",
            Error::InReplicate { .. } => "InReplicate",
        }
    }

    /// The innermost error, looking through subsample and replicate tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::InSubsample { source, .. } | Error::InReplicate { source, .. } => source.root(),
            other => other,
        }
    }
}
