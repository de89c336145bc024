use thiserror::Error;

/// Errors raised by the geometric, differential and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain { name: &'static str, value: f64, domain: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("component {component}: matrix is not symmetric")]
    AsymmetricMatrix { component: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("sampling failure: {0}")]
    SamplingFailure(String),

    #[error("derivative is not onto: {0}")]
    NotOnto(String),

    #[error("set is not contained in the region ball of radius {r0} (reaches {reach})")]
    Containment { r0: f64, reach: f64 },

    #[error("segment leaves the Lipschitz region")]
    OutsideRegion,

    #[error("no admissible radius: regularity bound is infinite")]
    NoAdmissibleRadius,

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
