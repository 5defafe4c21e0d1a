//! Error types shared across the crate.

use thiserror::Error;

/// Errors from grid construction and operator application.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GridError {
    #[error("empty domain: a = {a}, b = {b}")]
    EmptyDomain { a: f64, b: f64 },
    #[error("grid needs M >= 4 interior-node parameter, got {m}")]
    TooFewNodes { m: usize },
    #[error("field length {got} does not match grid convention {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("Dirichlet stencil needs a boundary context")]
    MissingBoundaryContext,
    #[error("shift |k| <= 3 required, got {k}")]
    ShiftTooLarge { k: isize },
    #[error("central difference supports orders 1..=4, got {order}")]
    UnsupportedOrder { order: u32 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("coarsening factor {r} does not divide node count {nodes}")]
    CoarseFactor { r: usize, nodes: usize },
}

/// Errors from the direct and Newton solvers.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SolveError {
    #[error("singular Jacobian (pivot below tolerance at column {column})")]
    SingularJacobian { column: usize },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix is {n}x{n}, vector has {got}")]
    Dimension { n: usize, got: usize },
}

/// Errors from scheme steps and defect evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("scheme expects {expected} parameter(s), got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("scheme requires {required} boundary conditions")]
    UnsupportedBoundary { required: &'static str },
    #[error("non-finite values encountered in {context}")]
    NonFinite { context: &'static str },
}
