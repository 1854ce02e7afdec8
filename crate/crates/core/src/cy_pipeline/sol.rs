//! Elementary solutions on Sol³×R over the `(z, t)` torus.

use super::{normalize, require_base, verify_solution, CySolution, Geometry, PipelineError, PipelineOptions};
use crate::lie_frame::{AKFrame, Fibration, Form, FrameKind, LieError, ModelTag, INPUT_TOL};
use crate::torus_field::TorusField;
use crate::verifier::{Check, Report};

fn check_sol_frame(frame: &AKFrame, geometry: Geometry) -> Result<(), PipelineError> {
    if frame.model().tag != ModelTag::Sol3xR || frame.kind() != FrameKind::Sol {
        return Err(PipelineError::Invalid(format!("{geometry} needs a Sol frame on sol3xr")));
    }
    require_base(frame, geometry)
}

fn build(frame: &AKFrame, f: TorusField, shift: f64, omega_tilde: Form, geometry: Geometry, assembly: Report) -> CySolution {
    let mut sol = CySolution {
        geometry,
        frame: frame.clone(),
        f,
        shift,
        alpha: None,
        omega: frame.omega_form(),
        omega_tilde,
        alpha_complex: None,
        theta: None,
        theta_tilde: None,
        h: None,
        gma: None,
        alpha_frame: None,
        assembly,
        verification: Vec::new(),
    };
    sol.verification = verify_solution(&sol);
    sol
}

/// `Ω̃ = e^F μ e^{12} + σ` for `Ω = μ e^{12} + σ` with `σ` simple; the frame
/// comes from [`crate::lie_frame::simple_frame`], so `f^{12} = μ e^{12}`.
pub fn solve_sol_simple(frame: &AKFrame, f: &TorusField, opts: &PipelineOptions) -> Result<CySolution, PipelineError> {
    check_sol_frame(frame, Geometry::SolSimple)?;
    let omega = frame.omega_form();
    let beta_omega = Form::monomial(&[1, 2]).wedge(&omega).top().as_const().unwrap_or(0.0);
    if beta_omega.abs() <= INPUT_TOL {
        return Err(LieError::FibresLagrangian.into());
    }
    let mu = omega.wedge(&omega).top().as_const().unwrap_or(0.0) / (2.0 * beta_omega);
    let f12 = frame.f_monomial(&[1, 2]);
    let mut assembly = Report::new("assembly");
    assembly.push(Check::at_most("|f12 - μ e12|", f12.sub(&Form::monomial(&[1, 2]).scale(mu)).max_abs(), INPUT_TOL));
    if !assembly.passed() {
        return Err(PipelineError::Invalid("frame is not the simple-form frame of Ω".into()));
    }
    let (f, shift) = normalize(f, opts)?;
    let omega_tilde = f12.mul_field(&f.exp(), Fibration::Zt).add(&frame.f_monomial(&[3, 4]));
    Ok(build(frame, f, shift, omega_tilde, Geometry::SolSimple, assembly))
}

/// `Ω̃ = f^{12} + e^F f^{34}` without the leaf-constancy guard. For
/// nonconstant `F` the result satisfies the volume identity but is not closed.
pub fn sol_foliation_candidate(frame: &AKFrame, f: &TorusField) -> Form {
    frame.f_monomial(&[1, 2]).add(&frame.f_monomial(&[3, 4]).mul_field(&f.exp(), Fibration::Zt))
}

/// `Ω̃ = f^{12} + e^F f^{34}` for `F` with `dF ∧ e^{34} = 0`.
pub fn solve_sol_foliation(frame: &AKFrame, f: &TorusField, opts: &PipelineOptions) -> Result<CySolution, PipelineError> {
    check_sol_frame(frame, Geometry::SolFoliation)?;
    let df = Form::function(f.clone(), Fibration::Zt).d(frame.model())?;
    let residual = df.wedge(&Form::monomial(&[3, 4])).max_abs();
    if residual > INPUT_TOL * (1.0 + f.max_abs()) {
        return Err(PipelineError::LeafVariation { residual });
    }
    let (f, shift) = normalize(f, opts)?;
    let mut assembly = Report::new("assembly");
    assembly.push(Check::at_most("|dF ∧ e34|", residual, INPUT_TOL * (1.0 + f.max_abs())));
    let omega_tilde = sol_foliation_candidate(frame, &f);
    Ok(build(frame, f, shift, omega_tilde, Geometry::SolFoliation, assembly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_frame::{adapt_coframe_sol, simple_frame, LieModel};
    use crate::torus_field::Scheme;
    use nalgebra::Matrix4;
    use std::f64::consts::PI;

    fn omega(mu: f64) -> Form {
        Form::monomial(&[1, 2]).scale(mu).add(&Form::monomial(&[3, 4]))
    }

    #[test]
    fn simple_identity_case() {
        let (fr, mu) = simple_frame(&omega(1.0), &LieModel::sol3xr()).unwrap();
        assert_eq!(mu, 1.0);
        let sol = solve_sol_simple(&fr, &TorusField::zeros(8, 8, Scheme::Spectral), &PipelineOptions::default()).unwrap();
        assert_eq!(sol.omega_tilde.sub(&sol.omega).max_abs(), 0.0);
    }

    #[test]
    fn simple_volume_exact() {
        let (fr, mu) = simple_frame(&omega(2.0), &LieModel::sol3xr()).unwrap();
        assert_eq!(mu, 2.0);
        let f = TorusField::from_fn(32, 32, Scheme::Spectral, |z, _| 0.3 * (2.0 * PI * z).cos());
        let sol = solve_sol_simple(&fr, &f, &PipelineOptions::default()).unwrap();
        assert!(sol.verification[0].value("relative volume error") <= 1e-14);
        assert!(sol.passed(), "{:?}", sol.verification);
    }

    #[test]
    fn foliation_guard() {
        let fr = adapt_coframe_sol(&Matrix4::identity(), &omega(1.0), &LieModel::sol3xr()).unwrap();
        let ok = solve_sol_foliation(&fr, &TorusField::zeros(8, 8, Scheme::Spectral), &PipelineOptions::default()).unwrap();
        assert_eq!(ok.omega_tilde.sub(&ok.omega).max_abs(), 0.0);
        let ft = TorusField::from_fn(16, 16, Scheme::Spectral, |_, t| 0.2 * (2.0 * PI * t).cos());
        let err = solve_sol_foliation(&fr, &ft, &PipelineOptions::default()).unwrap_err();
        assert!(matches!(err, PipelineError::LeafVariation { .. }));
    }
}
