//! Kodaira–Thurston geometry: Nil³×R fibred over the `(x, y)` torus.

use rustfft::num_complex::Complex64;

use super::{alpha_consistency, normalize, require_base, verify_solution, CySolution, Geometry, PipelineError, PipelineOptions};
use crate::gma_solver::{self, GmaProblem};
use crate::lie_frame::{AKFrame, ComplexForm, Fibration, FrameConstants, FrameKind, ModelTag, INPUT_TOL};
use crate::torus_field::{Derivatives, Scheme, TorusField};
use crate::verifier::{check_selfdual_frame, Check, Report};

/// Base matrix `A` with `(dx, dy)ᵀ = A (f^1, f^2)ᵀ` and `k` from `df^4 = k f^{12}`.
pub(crate) fn kt_constants(frame: &AKFrame) -> Result<([[f64; 2]; 2], f64), PipelineError> {
    if frame.model().tag != ModelTag::Nil3xR || frame.kind() != FrameKind::Kt {
        return Err(PipelineError::Invalid("Kodaira–Thurston geometry needs a Kt frame on nil3xr".into()));
    }
    require_base(frame, Geometry::KtXy)?;
    match frame.constants() {
        FrameConstants::Kt { base_matrix, k } => Ok((*base_matrix, *k)),
        _ => Err(PipelineError::Invalid("frame has no base-adapted constants (f^1, f^2 must be base forms)".into())),
    }
}

/// The equation `det(S + Hess p) = e^F / (det A)²` with `S = (A Aᵀ)⁻¹`.
pub fn kt_problem(frame: &AKFrame, f: &TorusField) -> Result<GmaProblem, PipelineError> {
    let (a, _) = kt_constants(frame)?;
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let aat = [
        [a[0][0] * a[0][0] + a[0][1] * a[0][1], a[0][0] * a[1][0] + a[0][1] * a[1][1]],
        [0.0, a[1][0] * a[1][0] + a[1][1] * a[1][1]],
    ];
    let d2 = det * det;
    let s = [[aat[1][1] / d2, -aat[0][1] / d2], [-aat[0][1] / d2, aat[0][0] / d2]];
    Ok(GmaProblem::monge_ampere(s, f.add_scalar(-2.0 * det.abs().ln())))
}

/// `(g_u, g_v)` from Cartesian derivatives, with `∂_u = A11 ∂_x + A21 ∂_y`, `∂_v = A12 ∂_x + A22 ∂_y`.
pub(crate) fn uv_gradient(gx: &TorusField, gy: &TorusField, a: &[[f64; 2]; 2]) -> (TorusField, TorusField) {
    (gx.zip_map(gy, |x, y| a[0][0] * x + a[1][0] * y), gx.zip_map(gy, |x, y| a[0][1] * x + a[1][1] * y))
}

/// `Aᵀ (Hess_xy g) A` as `(g_uu, g_uv, g_vv)`.
pub(crate) fn uv_hessian(d: &Derivatives, a: &[[f64; 2]; 2]) -> [TorusField; 3] {
    let q = |c: [f64; 2], e: [f64; 2]| {
        let mut v = Vec::with_capacity(d.d11.len());
        for i in 0..d.d11.len() {
            let (xx, xy, yy) = (d.d11.values()[i], d.d12.values()[i], d.d22.values()[i]);
            v.push(c[0] * e[0] * xx + (c[0] * e[1] + c[1] * e[0]) * xy + c[1] * e[1] * yy);
        }
        d.d11.with_values(v)
    };
    let (cu, cv) = ([a[0][0], a[1][0]], [a[0][1], a[1][1]]);
    [q(cu, cu), q(cu, cv), q(cv, cv)]
}

fn check_frame_conditions(frame: &AKFrame) -> Result<(), PipelineError> {
    let rep = check_selfdual_frame(frame);
    if let Some(bad) = rep.checks.iter().find(|c| c.value > INPUT_TOL) {
        return Err(PipelineError::Invalid(format!("frame violates `{}` ({:e})", bad.name, bad.value)));
    }
    Ok(())
}

/// `Θ = (f^1 + i f^2) ∧ (f^3 + i f^4)`.
pub fn holomorphic_form(frame: &AKFrame) -> ComplexForm {
    let [f1, f2, f3, f4] = [1, 2, 3, 4].map(|i| frame.f(i));
    ComplexForm::new(f1, f2).wedge(&ComplexForm::new(f3, f4))
}

pub fn solve_kt(frame: &AKFrame, f: &TorusField, opts: &PipelineOptions) -> Result<CySolution, PipelineError> {
    let (a, k) = kt_constants(frame)?;
    check_frame_conditions(frame)?;
    let (f, shift) = normalize(f, opts)?;
    let problem = kt_problem(frame, &f)?;
    let gma = gma_solver::solve(&problem, &opts.solver)?;
    let p = &gma.p;
    let d = p.derivatives();
    let (pu, pv) = uv_gradient(&d.d1, &d.d2, &a);
    let [huu, huv, hvv] = uv_hessian(&d, &a);
    let (huu, hvv) = (huu.add_scalar(1.0), hvv.add_scalar(1.0));
    let h = (&huu + &hvv).scale(0.5);

    let base = Fibration::Xy;
    let [f1, f2, f3, f4] = [1, 2, 3, 4].map(|i| frame.f(i));
    let tau = ComplexForm::new(f3.clone(), f4.clone());
    let theta = holomorphic_form(frame);
    let dp_u = f1.mul_field(&huu, base).add(&f2.mul_field(&huv, base));
    let dp_v = f1.mul_field(&huv, base).add(&f2.mul_field(&hvv, base));
    let theta_tilde = ComplexForm::new(dp_u, dp_v).wedge(&tau);
    let alpha = ComplexForm::new(f1.mul_field(p, base), f2.mul_field(p, base))
        .scale(Complex64::new(-k, 0.0))
        .add(&tau.mul_fields(&pu, &pv, base));

    let tol = match f.scheme() {
        Scheme::Spectral => 1e-10,
        Scheme::Fd4 => 1e-5,
    };
    let mut assembly = Report::new("assembly");
    let re = alpha_consistency(frame, &alpha.re, &theta_tilde.re)?;
    let im = (theta.im.add(&alpha.im.d(frame.model())?)).sub(&theta_tilde.im).max_abs();
    assembly.push(Check::at_most("|Θ + dα - Θ̃|", re.max(im), tol));

    let mut sol = CySolution {
        geometry: Geometry::KtXy,
        frame: frame.clone(),
        f,
        shift,
        alpha: Some(alpha.re.clone()),
        omega: theta.re.clone(),
        omega_tilde: theta_tilde.re.clone(),
        alpha_complex: Some(alpha),
        theta: Some(theta),
        theta_tilde: Some(theta_tilde),
        h: Some(h),
        gma: Some(gma),
        alpha_frame: None,
        assembly,
        verification: Vec::new(),
    };
    sol.verification = verify_solution(&sol);
    Ok(sol)
}
