use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Partition index sets must be distinct and in range.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A precondition on an argument value was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix factorization (SVD, Cholesky, eigendecomposition) failed.
    #[error("numerical factorization failed: {0}")]
    Factorization(String),

    /// An iterative solver ran out of iterations.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Projecting with `r = m` leaves an empty data space.
    #[error("no information remains after projection (r = m = {0})")]
    EmptyProjection(usize),

    /// No retained ray intersects the region of interest.
    #[error("ROI invisible to scan: no ray intersects the region of interest")]
    RoiInvisible,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file did not conform to the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
