use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported approximation order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("threshold outside the achievable loss range: {0}")]
    Domain(String),

    /// The large-deviations tilt is zero because the threshold does not
    /// exceed the conditional mean; the estimator is undefined there.
    #[error("threshold {x} does not exceed the conditional mean {mean}")]
    BelowConditionalMean { x: f64, mean: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("degenerate tranche: {0}")]
    DegenerateTranche(String),

    #[error("engine `{engine}` cannot be used here: {reason}")]
    Incompatible { engine: String, reason: String },

    #[error("numeric failure at quadrature node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Strips any `AtNode` wrapping and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtNode { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
