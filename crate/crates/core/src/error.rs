use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("stencil reach {reach} aliases on a torus of period {period}")]
    Aliasing { reach: usize, period: usize },

    #[error("out of range: {0}")]
    Range(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("spectral mass {weight:e} at eigenvalue {lambda:e}: projection is not ergodic")]
    Nonergodic { lambda: f64, weight: f64 },

    #[error("{sites} sites exceed the dense backend limit of {limit}")]
    TooLarge { sites: usize, limit: usize },

    #[error("bad cluster saturates the torus; enlarge n or raise eta")]
    Saturated,

    #[error("functional declaration: {0}")]
    Declaration(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
