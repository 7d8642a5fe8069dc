use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("initial amplitudes have squared norm {norm_sqr}, expected 1")]
    Norm { norm_sqr: f64 },

    #[error("matrix is not unitary: max |C†C - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("eigendecomposition residual {residual:e} exceeds tolerance")]
    Decomposition { residual: f64 },

    #[error("vector {index} is linearly dependent on its predecessors (residual norm {norm:e})")]
    Rank { index: usize, norm: f64 },

    #[error("eigenvalue 1 is not simple at k = ({k1}, {k2}): next phase is {gap:e} away")]
    Degeneracy { k1: f64, k2: f64, gap: f64 },

    #[error("{excluded} of {total} quadrature nodes are degenerate; refusing to redistribute their weight")]
    DegenerateNodes { excluded: usize, total: usize },

    #[error("cannot normalize an image whose maximum value is zero")]
    DegenerateImage,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
