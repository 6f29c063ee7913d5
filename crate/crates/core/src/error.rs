use thiserror::Error;

/// Errors produced anywhere in the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("insufficient data: {have} rows available, {need} required")]
    InsufficientData { have: usize, need: usize },

    #[error("lexicon kind mismatch: expected {expected}, got {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("{what} did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}); best parameters {best:?}")]
    NotConverged {
        what: String,
        iterations: usize,
        grad_norm: f64,
        best: Vec<f64>,
    },

    #[error("family selection failed: {0}")]
    Selection(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("variable `{variable}`: {source}")]
    Variable {
        variable: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Attach a variable name to an error raised while processing one column.
    pub fn for_variable(self, name: &str) -> Error {
        Error::Variable {
            variable: name.to_string(),
            source: Box::new(self),
        }
    }

    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::NotConverged { .. } | Error::Selection(_) => true,
            Error::Variable { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
