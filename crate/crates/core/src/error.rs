use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no Nyquist box for continuous sampling")]
    NoNyquistBox,

    #[error("region contains no cells")]
    EmptyRegion,

    #[error("no taper reaches concentration {threshold}; best available is {best:.6}")]
    InsufficientConcentration { threshold: f64, best: f64 },

    #[error("sampling grid has no nodes inside the region")]
    NoGridNodes,

    #[error("sampling scheme of the taper does not match the field")]
    SchemeMismatch,

    #[error("taper index mismatch: {left} vs {right} (mixed tapers are opt-in)")]
    TaperIndexMismatch { left: usize, right: usize },

    #[error("no tapers selected")]
    NoTapers,

    #[error("wavenumber grids differ")]
    GridMismatch,

    #[error("quadrature error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureTooCoarse { estimate: f64, tolerance: f64 },

    #[error("wavenumber table does not cover radius {needed} at resolution {resolution}")]
    InsufficientCoverage { needed: f64, resolution: f64 },

    #[error("spectral tail does not decay: last shell holds {shell:.3e} of the total")]
    NonDecayingTail { shell: f64 },

    #[error("circulant embedding is not positive semidefinite (min eigenvalue {min_eig:.3e}) and {nodes} nodes is too many for the dense fallback")]
    EmbeddingFailed { min_eig: f64, nodes: usize },

    #[error("eigensolver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
