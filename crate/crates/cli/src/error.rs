use std::fmt;

/// Failure of a command, with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    /// 1 for a failed operation, 2 for a configuration or input-validation problem.
    pub code: i32,
    /// The operation that failed, e.g. `run_stability_selection`.
    pub operation: String,
    /// Error variant name.
    pub variant: String,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            operation: "config".into(),
            variant: "Config".into(),
            message: message.into(),
        }
    }

    /// A failed core operation. Rejected input maps to exit code 2, anything else to 1.
    pub fn op(operation: &str, err: stablasso_core::Error) -> Self {
        use stablasso_core::Error as E;
        let code = match err.root() {
            E::ConstantColumn(_)
            | E::DimensionMismatch(_)
            | E::InvalidInput(_)
            | E::ParseError { .. }
            | E::MissingResponseColumn(_)
            | E::RaggedRows { .. }
            | E::LambdaNotInProfile(_)
            | E::InvalidRho(_)
            | E::OracleUnavailable
            | E::OlsUnderdetermined { .. } => 2,
            _ => 1,
        };
        Self::from_core(code, operation, err)
    }

    pub fn io(operation: &str, err: impl fmt::Display) -> Self {
        Self {
            code: 1,
            operation: operation.into(),
            variant: "Io".into(),
            message: err.to_string(),
        }
    }

    fn from_core(code: i32, operation: &str, err: stablasso_core::Error) -> Self {
        let variant = match err.root().variant() {
            root if root != err.variant() => format!("{}/{root}", err.variant()),
            root => root.to_string(),
        };
        Self {
            code,
            operation: operation.into(),
            variant,
            message: err.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "error: operation={} variant={} message={:?}",
            self.operation, self.variant, self.message
        )
    }
}
