//! Exterior calculus on the three model Lie algebras and adapted coframes.

use thiserror::Error;

pub mod form;
pub mod frame;
pub mod lattice;
pub mod model;

pub use form::{ComplexForm, Coeff, Form};
pub use frame::{
    adapt_coframe_kt, adapt_coframe_nil, adapt_coframe_sol, simple_frame, AKFrame, FrameConstants, FrameDocument,
    FrameKind, nil_axes, FRAME_TOL, INPUT_TOL,
};
pub use lattice::{sol_lattice, SolLattice};
pub use model::{Fibration, LieModel, ModelTag};

#[derive(Debug, Error)]
pub enum LieError {
    #[error("coefficient field on base {base:?} is not invariant on model {model}: it depends on a fibre coordinate")]
    InvarianceViolation { model: ModelTag, base: Fibration },
    #[error("form has function coefficients but no declared base")]
    MissingBase,
    #[error("fibres are not Lagrangian: Ω ∧ e^13 = {residual:e}")]
    NotLagrangian { residual: f64 },
    #[error("metric is not compatible with Ω: |J² + 1| = {residual:e}")]
    IncompatibleMetric { residual: f64 },
    #[error("metric is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("symplectic form is degenerate")]
    Degenerate,
    #[error("symplectic form is not closed: |dΩ| = {residual:e}")]
    NotClosed { residual: f64 },
    #[error("no adapted frame: {0}")]
    NoAdaptedFrame(String),
    #[error("adapted frame construction failed: {0}")]
    FiltrationFailed(String),
    #[error("Ω ∧ Ω must equal 2 e^1234, got {value} e^1234 times 2")]
    NormalizationViolated { value: f64 },
    #[error("wrong model: expected {expected}, got {got}")]
    WrongModel { expected: &'static str, got: ModelTag },
    #[error("Ω vanishes on the fibres (e^12 ∧ Ω = 0); the elementary construction does not apply")]
    FibresLagrangian,
    #[error("lattice parameter n = {0} not supported (use 3, 4 or 5)")]
    UnsupportedLattice(u32),
    #[error("parse error: {0}")]
    Parse(String),
}
