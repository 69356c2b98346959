use thiserror::Error;

/// Errors raised by the library. Mathematical check failures are not errors;
/// they are reported through [`crate::verify::VerificationReport`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: n must be at least 1, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symplectic: residual {residual:e} exceeds tolerance {tol:e}")]
    NotSymplectic { residual: f64, tol: f64 },

    #[error("matrix lies in the time-reversing component (bottom-right entry {0})")]
    NotConnectedComponent(f64),

    #[error("block structure violated in {block}: residual {residual:e}")]
    StructureViolation { block: &'static str, residual: f64 },

    #[error("element is not in the Weyl-Heisenberg subgroup: sigma deviates from identity by {0:e}")]
    NotHeisenberg(f64),

    #[error("matrix is not orthogonal: residual {0:e}")]
    NotOrthogonal(f64),

    #[error("commutator left the algebra in {block}: residual {residual:e}")]
    DecompositionFailure { block: &'static str, residual: f64 },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{name} requires n = {required}, got n = {found}")]
    WrongDimension {
        name: &'static str,
        required: usize,
        found: usize,
    },

    #[error("Stormer-Verlet requires a separable Hamiltonian, `{0}` is not separable")]
    NonseparableForVerlet(String),

    #[error("implicit solver did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("canonical map inversion failed: {0}")]
    InversionFailure(String),

    #[error("map evaluation failed: {0}")]
    MapEvaluation(String),

    #[error("trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("invalid integration interval: {0}")]
    InvalidInterval(String),
}

pub type Result<T> = std::result::Result<T, Error>;
