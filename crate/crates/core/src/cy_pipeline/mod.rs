//! Assembly of Calabi–Yau solutions on the torus-fibred models from a solved
//! potential on the base torus.

mod kt;
mod nil;
mod sol;
mod tw;

pub use kt::{holomorphic_form, kt_problem, solve_kt};
pub use nil::{lambda_continuation, nil_problem, solve_nil3_yt, solve_nil4, ContinuationReport, NilCoefficients};
pub use sol::{sol_foliation_candidate, solve_sol_foliation, solve_sol_simple};
pub use tw::{tw_estimate, tw_estimate_check, wp, TwReport, TW_TOL};

use serde::{Deserialize, Serialize};

use crate::gma_solver::{GmaError, GmaSolution, SolveOptions};
use crate::lie_frame::{AKFrame, ComplexForm, Fibration, Form, LieError};
use crate::torus_field::{Axis, FieldError, TorusField};
use crate::verifier::{self, Report};

/// Tolerance on `|∫(e^F - 1)|` below which `F` counts as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Tolerance on the type-(1,1) residuals of the Nil assemblies.
pub const KLM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Geometry {
    #[serde(rename = "kt-xy")]
    KtXy,
    #[serde(rename = "nil4")]
    Nil4Zt,
    #[serde(rename = "nil3-yt")]
    Nil3Yt,
    #[serde(rename = "sol-simple")]
    SolSimple,
    #[serde(rename = "sol-foliation")]
    SolFoliation,
}

impl Geometry {
    pub const ALL: [Geometry; 5] =
        [Geometry::KtXy, Geometry::Nil4Zt, Geometry::Nil3Yt, Geometry::SolSimple, Geometry::SolFoliation];

    pub fn name(self) -> &'static str {
        match self {
            Geometry::KtXy => "kt-xy",
            Geometry::Nil4Zt => "nil4",
            Geometry::Nil3Yt => "nil3-yt",
            Geometry::SolSimple => "sol-simple",
            Geometry::SolFoliation => "sol-foliation",
        }
    }

    pub fn base(self) -> Fibration {
        match self {
            Geometry::KtXy => Fibration::Xy,
            Geometry::Nil3Yt => Fibration::Yt,
            _ => Fibration::Zt,
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Geometry {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, PipelineError> {
        Geometry::ALL
            .into_iter()
            .find(|g| g.name() == s.to_ascii_lowercase())
            .ok_or_else(|| PipelineError::Invalid(format!("unknown geometry `{s}`")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frame(#[from] LieError),
    #[error(transparent)]
    Gma(#[from] GmaError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("F is not normalized: ∫(e^F - 1) = {integral:e} (normalization ∫(e^F - 1) = 0 is required)")]
    NotNormalized { integral: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("F varies along the leaves: |dF ∧ e^34| = {residual:e}")]
    LeafVariation { residual: f64 },
    #[error("assembly check `{check}` failed: {value:e} > {tol:e}")]
    Assembly { check: String, value: f64, tol: f64 },
}

impl PipelineError {
    /// True for rejections of the input, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Gma(e) => matches!(
                e,
                GmaError::NotPositiveDefinite { .. }
                    | GmaError::Invalid(_)
                    | GmaError::CoefficientCondition { .. }
                    | GmaError::Compatibility { .. }
            ),
            PipelineError::Assembly { .. } => false,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Reject unnormalized `F` instead of shifting it.
    pub strict: bool,
    pub normalization_tol: f64,
    pub solver: SolveOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { strict: false, normalization_tol: NORMALIZATION_TOL, solver: SolveOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct CyInstance {
    pub geometry: Geometry,
    pub frame: AKFrame,
    pub f: TorusField,
}

#[derive(Debug, Clone)]
pub struct CySolution {
    pub geometry: Geometry,
    pub frame: AKFrame,
    /// The normalized `F` actually used.
    pub f: TorusField,
    /// Constant added to the input `F`.
    pub shift: f64,
    /// Potential 1-form (real part for the Kodaira–Thurston geometry).
    pub alpha: Option<Form>,
    pub omega: Form,
    pub omega_tilde: Form,
    pub alpha_complex: Option<ComplexForm>,
    pub theta: Option<ComplexForm>,
    pub theta_tilde: Option<ComplexForm>,
    pub h: Option<TorusField>,
    /// Solution of the reduced equation on the base torus.
    pub gma: Option<GmaSolution>,
    /// Frame coefficients `a_1..a_4` of `α` (Nil geometries).
    pub alpha_frame: Option<[TorusField; 4]>,
    /// Assembly checks computed by the pipeline itself.
    pub assembly: Report,
    pub verification: Vec<Report>,
}

impl CySolution {
    pub fn passed(&self) -> bool {
        self.assembly.passed() && self.verification.iter().all(Report::passed)
    }
}

pub fn solve(instance: &CyInstance, opts: &PipelineOptions) -> Result<CySolution, PipelineError> {
    let (frame, f) = (&instance.frame, &instance.f);
    match instance.geometry {
        Geometry::KtXy => solve_kt(frame, f, opts),
        Geometry::Nil4Zt => solve_nil4(frame, f, opts),
        Geometry::Nil3Yt => solve_nil3_yt(frame, f, opts),
        Geometry::SolSimple => solve_sol_simple(frame, f, opts),
        Geometry::SolFoliation => solve_sol_foliation(frame, f, opts),
    }
}

/// Normalizes `F` so that `∫(e^F - 1) = 0`, or rejects it in strict mode.
pub fn normalize(f: &TorusField, opts: &PipelineOptions) -> Result<(TorusField, f64), PipelineError> {
    if !f.is_finite() {
        return Err(FieldError::NonFinite.into());
    }
    let integral = f.exp().integrate() - 1.0;
    if integral.abs() <= opts.normalization_tol {
        return Ok((f.clone(), 0.0));
    }
    if opts.strict {
        return Err(PipelineError::NotNormalized { integral });
    }
    let (g, s) = f.normalize_rhs(1.0);
    log::info!("F shifted by {s:e} so that ∫(e^F - 1) = 0");
    Ok((g, s))
}

fn require_base(frame: &AKFrame, geometry: Geometry) -> Result<(), PipelineError> {
    if frame.base() != geometry.base() {
        return Err(PipelineError::Invalid(format!(
            "geometry {geometry} needs a frame over the {:?} base, got {:?}",
            geometry.base(),
            frame.base()
        )));
    }
    Ok(())
}

pub(crate) fn axis(i: usize) -> Axis {
    if i == 0 {
        Axis::One
    } else {
        Axis::Two
    }
}

/// The verifier battery applicable to a solution of the given geometry.
pub fn verify_solution(sol: &CySolution) -> Vec<Report> {
    let theta = sol.theta_tilde.as_ref().zip(sol.theta.as_ref());
    let mut out = verify_forms(&sol.frame, &sol.f, &sol.omega, &sol.omega_tilde, theta);
    if theta.is_some() {
        if let Ok(tw) = tw_estimate_check(sol) {
            out.push(tw.to_report());
        }
    }
    out
}

/// Volume, type and cohomology checks for `Ω̃`; with `(Θ̃, Θ)` given the
/// cohomology check is done on both parts and the holomorphic symplectic and
/// self-dual frame checks are added.
pub fn verify_forms(
    frame: &AKFrame,
    f: &TorusField,
    omega: &Form,
    omega_tilde: &Form,
    theta: Option<(&ComplexForm, &ComplexForm)>,
) -> Vec<Report> {
    let model = frame.model();
    let mut out = vec![verifier::check_volume(omega_tilde, omega, f), verifier::check_type11(omega_tilde, frame)];
    match theta {
        Some((tt, t)) => {
            out.push(verifier::check_cohomology_complex(tt, t, model));
            out.push(verifier::check_holomorphic_symplectic(tt, f));
            out.push(verifier::check_selfdual_frame(frame));
        }
        None => out.push(verifier::check_cohomology(omega_tilde, omega, model)),
    }
    out
}

/// `|Ω + dα - Ω̃|`.
fn alpha_consistency(frame: &AKFrame, alpha: &Form, omega_tilde: &Form) -> Result<f64, PipelineError> {
    let da = alpha.d(frame.model())?;
    Ok(frame.omega_form().add(&da).sub(omega_tilde).max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_names_round_trip() {
        for g in Geometry::ALL {
            assert_eq!(g.name().parse::<Geometry>().unwrap(), g);
            assert_eq!(serde_json::to_string(&g).unwrap(), format!("\"{}\"", g.name()));
        }
    }
}
