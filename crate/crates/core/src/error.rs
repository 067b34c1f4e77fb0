use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("spectral point {lambda} lies on the branch cut [{n}+1/2, inf)")]
    BranchCut { n: usize, lambda: Complex64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("operator has a complex diagonal; symmetric eigen-routines need a real one")]
    NotSymmetric,

    #[error("singular matrix: zero pivot at row {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("Herglotz sign violated: m({z}) = {m}")]
    HerglotzViolation { z: Complex64, m: Complex64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("adaptive quadrature failed to converge on cell [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("eigenvalue count changed under truncation doubling: sizes {sizes:?}, counts {counts:?}")]
    TruncationUnstable { sizes: Vec<usize>, counts: Vec<usize> },
}
