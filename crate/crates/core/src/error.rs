use thiserror::Error;

/// Errors raised by ingestion, estimation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or observation outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed input file (bad header, non-numeric cell, ...).
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("unbalanced: id {id}")]
    Unbalanced { id: String },

    #[error("duplicate observation: id {id}, t {t}")]
    Duplicate { id: String, t: i64 },

    #[error("no estimable individuals: every individual is separated")]
    NoEstimableIndividuals,

    /// Profiled Hessian is singular; `columns` names the regressors found to be
    /// collinear (after removing individual means) when that is detectable.
    #[error("singular Hessian (collinear columns: {})", if columns.is_empty() { "undetermined".to_string() } else { columns.join(", ") })]
    SingularHessian { columns: Vec<String> },

    /// Outer optimizer stopped without meeting its gradient tolerance.
    /// `trace` holds `(objective, gradient sup-norm)` per iteration.
    #[error("no convergence after {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64, trace: Vec<(f64, f64)> },

    /// A constituent fit of a composite estimator failed.
    #[error("{label}: {source}")]
    Subfit {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn subfit(label: impl Into<String>, source: Error) -> Self {
        Error::Subfit { label: label.into(), source: Box::new(source) }
    }

    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Domain(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::Unbalanced { .. }
            | Error::Duplicate { .. }
            | Error::NotApplicable(_)
            | Error::Config(_) => true,
            Error::Subfit { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
