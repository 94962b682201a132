//! Numerical workbench for the flux-across-surfaces theorem in three
//! dimensions: free evolution, the zero-range point interaction and short
//! range radial potentials.

pub mod fluxfas;
pub mod lsradial;
pub mod pointmodel;
pub mod quadrature;
pub mod specfun;

pub use num_complex::Complex64;

pub type Real = f64;
pub type Complex = Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FasError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("accuracy not reached: {what} (residual {residual:.3e})")]
    Accuracy { what: String, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),
}

pub type Result<T> = std::result::Result<T, FasError>;

pub(crate) fn accuracy(what: impl Into<String>, residual: f64) -> FasError {
    FasError::Accuracy { what: what.into(), residual }
}
