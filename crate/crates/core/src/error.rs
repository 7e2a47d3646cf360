use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The cover graph handed to the poset builder contains a directed cycle.
    #[error("order relation contains a cycle: {}", .witness.join(" -> "))]
    Cycle { witness: Vec<String> },

    #[error("order relation is not antisymmetric: {a} and {b} precede each other")]
    NotAntisymmetric { a: String, b: String },

    #[error("unknown poset element `{0}`")]
    UnknownElement(String),

    #[error("duplicate poset element `{0}`")]
    DuplicateElement(String),

    #[error("poset has {size} elements, above the supported maximum of {max}")]
    TooLarge { size: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A caller-side precondition was violated (support pattern, stability, ...).
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("synthesis failed at element `{element}`: {reason}")]
    Synthesis { element: String, reason: String },

    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
