use thiserror::Error;

pub type Result<T> = std::result::Result<T, ChiError>;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChiError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("assumption (c) violated: {0}")]
    OriginResidual(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty domain box: axis {axis} has lo={lo}, hi={hi}")]
    EmptyDomain { axis: usize, lo: f64, hi: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Newton matrix (sigma_min={sigma_min:e}, sigma_max={sigma_max:e})")]
    SingularMatrix { sigma_min: f64, sigma_max: f64 },

    #[error("iterate escaped the enlarged domain at iteration {iteration}")]
    Escaped { iteration: usize },

    #[error("trajectory {which} diverged at index {index} (norm {norm:e})")]
    Divergence {
        which: &'static str,
        index: usize,
        norm: f64,
    },

    #[error("non-finite state in trajectory {which} at index {index}")]
    NonFiniteState { which: &'static str, index: usize },

    #[error("at index {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<ChiError>,
    },

    #[error("at mu={mu:e}: {source}")]
    AtMu {
        mu: f64,
        #[source]
        source: Box<ChiError>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive definite (lambda_min={0:e})")]
    NotPositiveDefinite(f64),

    #[error("spectral radius {0} is not below 1")]
    Unstable(f64),

    #[error("{model} model: {source}")]
    InModel {
        model: &'static str,
        #[source]
        source: Box<ChiError>,
    },

    #[error("invalid certificate: {0}")]
    Certificate(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl ChiError {
    pub(crate) fn at_index(self, index: usize) -> Self {
        ChiError::AtIndex {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_mu(self, mu: f64) -> Self {
        ChiError::AtMu {
            mu,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_model(self, model: &'static str) -> Self {
        ChiError::InModel {
            model,
            source: Box::new(self),
        }
    }

    /// Index of the first offending state when this error came from a
    /// diverging or non-finite simulation.
    pub fn divergence_index(&self) -> Option<usize> {
        match self {
            ChiError::Divergence { index, .. } | ChiError::NonFiniteState { index, .. } => {
                Some(*index)
            }
            ChiError::AtIndex { source, .. }
            | ChiError::AtMu { source, .. }
            | ChiError::InModel { source, .. } => source.divergence_index(),
            _ => None,
        }
    }
}

impl From<std::io::Error> for ChiError {
    fn from(e: std::io::Error) -> Self {
        ChiError::Io(e.to_string())
    }
}
