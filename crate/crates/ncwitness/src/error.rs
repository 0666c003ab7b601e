//! Error type shared by all analysis modules.

use thiserror::Error;

/// Errors surfaced by state construction, moment evaluation, witness
/// assembly, and the atom dynamics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A requested Fock index does not fit below the mode cutoff.
    #[error("cutoff exceeded: {what} requires dim > {required}, but dim = {dim}")]
    CutoffExceeded {
        what: String,
        required: usize,
        dim: usize,
    },

    /// A construction or moment would be silently dominated by truncation
    /// error; the operation is refused rather than returning a wrong number.
    #[error("truncation risk: {what}; increase the cutoff to at least {required_dim}")]
    TruncationRisk { what: String, required_dim: usize },

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument combination is malformed (empty list, bad point label, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Mismatch between an index/point count and the object it is applied to.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Principal-minor enumeration would exceed the configured subset limit.
    #[error("minor enumeration too large: {subsets} subsets requested, limit is {limit}")]
    SubsetLimitExceeded { subsets: u128, limit: u128 },

    /// A correlation provider failed; the offending index is attached.
    #[error("provider evaluation failed at index {index}: {source}")]
    ProviderEval {
        index: String,
        #[source]
        source: Box<Error>,
    },

    /// A numerical routine could not reach its accuracy contract.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Attach the offending multi-index to a provider evaluation error.
pub fn attach_index(err: Error, index: impl std::fmt::Display) -> Error {
    Error::ProviderEval {
        index: index.to_string(),
        source: Box::new(err),
    }
}
