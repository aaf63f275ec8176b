//! Error type shared by every module of the crate.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("scalar field mismatch: {0}")]
    Field(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("invalid construction: {0}")]
    Invalid(String),

    #[error("unknown group or invalid parameter: {0}")]
    Catalog(String),

    #[error("representation bound to a different group: {0}")]
    GroupMismatch(String),

    #[error(
        "iteration did not converge: loss {loss:e} after {iters} iterations at rank cap {r_max}"
    )]
    NoConvergence { loss: f64, iters: usize, r_max: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
