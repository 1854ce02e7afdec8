//! Newton–Krylov solver for generalized Monge–Ampère equations on the unit torus.

mod diagnostics;
mod linear;
mod problem;
mod solve;

pub use diagnostics::{
    gradient_bound, gradient_bound_check, necessity_identity, AxisBound, GradientBoundReport, NecessityReport,
};
pub use linear::{gmres, project, LinearOptions, LinearStats, LinearizedOperator};
pub use problem::{ConditionCheck, GmaProblem, MatrixField, ValidationReport, CONDITION_TOL};
pub use solve::{linearized_solve, solve, uniqueness_probe, GmaSolution, SolveOptions, TraceEntry, UniquenessReport};

#[derive(Debug, Clone, thiserror::Error)]
pub enum GmaError {
    #[error("background matrix is not positive definite (a = {a}, ab - c² = {det})")]
    NotPositiveDefinite { a: f64, det: f64 },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("coefficient condition `{name}` fails: value {value:e}")]
    CoefficientCondition { name: String, value: f64 },
    #[error("compatibility condition fails: ∫(e^F - ab + c²) = {integral:e} (tolerance {tol:e})")]
    Compatibility { integral: f64, tol: f64 },
    #[error("linearized operator is not elliptic at the current iterate (margin {margin:e})")]
    NotElliptic { margin: f64 },
    #[error("GMRES stagnated; residual history tail {:?}", tail(.history))]
    LinearStagnation { history: Vec<f64> },
    #[error("solver did not converge: {message}")]
    Nonconvergence { message: String, trace: Vec<TraceEntry> },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn tail(h: &[f64]) -> &[f64] {
    &h[h.len().saturating_sub(5)..]
}
