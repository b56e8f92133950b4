use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("non-finite values encountered: {0}")]
    NonFinite(String),
    #[error("stability guard: {0}")]
    Stability(String),
    #[error("boundary mass fraction {fraction:.3e} exceeds 1e-8 at t = {time}")]
    BoundaryMass { fraction: f64, time: f64 },
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("support hypothesis violated: {0}")]
    Support(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("admissibility: {0}")]
    Admissibility(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
}
