//! Lagrangian fibrations of Nil4 over `(z, t)` and of Nil³×R over `(y, t)`.

use serde::{Deserialize, Serialize};

use super::{axis, normalize, require_base, verify_solution, CySolution, Geometry, PipelineError, PipelineOptions, KLM_TOL};
use crate::gma_solver::{self, GmaProblem};
use crate::lie_frame::{adapt_coframe_nil, nil_axes, AKFrame, Form, FrameConstants, FrameKind, LieModel, ModelTag};
use crate::torus_field::TorusField;
use crate::verifier::{Check, Report};

/// Frame constants `ds = A f^1`, `dr = C f^1 + B f^2`, `df^3 = k f^{12}`,
/// `df^4 = l f^{12} + m f^{13}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NilCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
    pub l: f64,
    pub m: f64,
}

impl NilCoefficients {
    pub fn of(frame: &AKFrame) -> Result<Self, PipelineError> {
        match (frame.kind(), frame.constants()) {
            (FrameKind::Nil, FrameConstants::Nil { a, b, c, k, l, m }) => {
                Ok(NilCoefficients { a: *a, b: *b, c: *c, k: *k, l: *l, m: *m })
            }
            _ => Err(PipelineError::Invalid("frame is not an adapted Nil frame".into())),
        }
    }
}

/// The reduced equation for `p` on the base torus. In the coordinates
/// `(r, s)` the background matrix is `(A/B², -C/B²; ., (B²+C²)/(AB²))` and
/// the first-order terms all multiply `p_r`; the grid axis order of the base
/// decides whether they land in `l` or in `m`.
pub fn nil_problem(frame: &AKFrame, f: &TorusField) -> Result<GmaProblem, PipelineError> {
    let NilCoefficients { a, b, c, m, .. } = NilCoefficients::of(frame)?;
    let b2 = b * b;
    let (ga, gb, gc) = (a / b2, (b2 + c * c) / (a * b2), -c / b2);
    let lr = [[m / b, -m * c / (a * b)], [-m * c / (a * b), m * c * c / (a * a * b)]];
    let rhs = f.add_scalar(-2.0 * b.abs().ln());
    let (_, r_axis) = nil_axes(frame.base());
    let mut pb = GmaProblem::monge_ampere([[ga, gc], [gc, gb]], rhs);
    if r_axis == 0 {
        pb.l = lr;
    } else {
        pb.a = gb;
        pb.b = ga;
        pb.m = [[lr[1][1], lr[0][1]], [lr[0][1], lr[0][0]]];
    }
    Ok(pb)
}

pub fn solve_nil4(frame: &AKFrame, f: &TorusField, opts: &PipelineOptions) -> Result<CySolution, PipelineError> {
    if frame.model().tag != ModelTag::Nil4 {
        return Err(PipelineError::Invalid(format!("nil4 geometry needs a nil4 frame, got {}", frame.model().tag)));
    }
    solve_nil(frame, f, opts, Geometry::Nil4Zt)
}

pub fn solve_nil3_yt(frame: &AKFrame, f: &TorusField, opts: &PipelineOptions) -> Result<CySolution, PipelineError> {
    if frame.model().tag != ModelTag::Nil3xR {
        return Err(PipelineError::Invalid(format!("nil3-yt geometry needs a nil3xr frame, got {}", frame.model().tag)));
    }
    solve_nil(frame, f, opts, Geometry::Nil3Yt)
}

fn solve_nil(frame: &AKFrame, f: &TorusField, opts: &PipelineOptions, geometry: Geometry) -> Result<CySolution, PipelineError> {
    require_base(frame, geometry)?;
    let co = NilCoefficients::of(frame)?;
    if co.m == 0.0 {
        return Err(PipelineError::Invalid("frame constant m vanishes".into()));
    }
    let (f, shift) = normalize(f, opts)?;
    let problem = nil_problem(frame, &f)?;
    let gma = gma_solver::solve(&problem, &opts.solver)?;
    let p = gma.p.clone();
    let NilCoefficients { a, b, c, k, l, m } = co;
    let (s_axis, r_axis) = nil_axes(frame.base());
    let d_s = |g: &TorusField| g.derivative(axis(s_axis), 1);
    let d_r = |g: &TorusField| g.derivative(axis(r_axis), 1);
    let d1 = |g: &TorusField| &d_s(g).scale(a) + &d_r(g).scale(c);
    let d2 = |g: &TorusField| d_r(g).scale(b);

    let (ps, pr) = (d_s(&p), d_r(&p));
    let a3 = &pr.scale(b / a) - &p.scale(m / a);
    let a4 = &ps + &pr.scale(c / a);
    let phi = if k != 0.0 { p.scale(k * m / (a * a * b)).poisson_solve()? } else { p.scale(0.0) };
    let (u, v) = (d_r(&phi).scale(-1.0), d_s(&phi));
    let a1 = &(&u.scale(a) + &v.scale(c)) + &p.scale(k / a);
    let a2 = &v.scale(b) - &p.scale(l / a);

    let base = frame.base();
    let coeffs = [a1, a2, a3, a4];
    let mut alpha = Form::zero(1).with_base(base);
    for (i, ai) in coeffs.iter().enumerate() {
        alpha = alpha.add(&frame.f(i + 1).mul_field(ai, base));
    }
    let omega = frame.omega_form();
    let omega_tilde = omega.add(&alpha.d(frame.model())?);

    let [a1, a2, a3, a4] = &coeffs;
    let explicit = [
        ([1, 2], &(&(&a3.scale(k) + &a4.scale(l)) + &d1(a2)) - &d2(a1)),
        ([1, 3], &a4.scale(m) + &d1(a3)),
        ([1, 4], d1(a4)),
        ([2, 3], d2(a3)),
        ([2, 4], d2(a4)),
    ];
    let mut assembled = omega.clone();
    for (ij, cf) in &explicit {
        assembled = assembled.add(&frame.f_monomial(ij).mul_field(cf, base));
    }
    let da_frame = frame.to_frame(&omega_tilde.sub(&omega));
    let c12 = da_frame.coeff(&[1, 2]).max_abs();
    let c13 = da_frame.coeff(&[1, 3]).to_field(&p);
    let c24 = da_frame.coeff(&[2, 4]).to_field(&p);
    let mut assembly = Report::new("assembly");
    assembly.push(Check::at_most("|Ω + dα - Ω̃|", assembled.sub(&omega_tilde).max_abs(), 1e-10 * (1.0 + p.max_abs())));
    assembly.push(Check::at_most("|c12|", c12, KLM_TOL));
    assembly.push(Check::at_most("|c13 - c24|", (&c13 - &c24).max_abs(), KLM_TOL));
    for name in ["|c12|", "|c13 - c24|"] {
        let ch = assembly.get(name).expect("pushed");
        if !ch.passed {
            return Err(PipelineError::Assembly { check: name.into(), value: ch.value, tol: ch.tolerance });
        }
    }

    let mut sol = CySolution {
        geometry,
        frame: frame.clone(),
        f,
        shift,
        alpha: Some(alpha),
        omega,
        omega_tilde,
        alpha_complex: None,
        theta: None,
        theta_tilde: None,
        h: None,
        gma: Some(gma),
        alpha_frame: Some(coeffs),
        assembly,
        verification: Vec::new(),
    };
    sol.verification = verify_solution(&sol);
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub lambdas: Vec<f64>,
    /// `max_i |α_λ - α_0|` over the `e`-basis coefficients, in the order of `lambdas`.
    pub errors: Vec<f64>,
    /// Errors strictly decrease as `λ` decreases.
    pub monotone: bool,
}

/// Solves the Nil4(λ) problem for each `λ` with the identity metric and
/// `Ω = e^{14} + e^{23}`, and compares `α` with the Nil³×R solution over
/// `(y, t)`. `F` is given on the `(y, t)` grid; the `(z, t)` data of Nil4 is
/// `F(z, t) = F(y = -t, t = z)`.
pub fn lambda_continuation(
    f_yt: &TorusField,
    lambdas: &[f64],
    opts: &PipelineOptions,
) -> Result<(ContinuationReport, CySolution, Vec<CySolution>), PipelineError> {
    if f_yt.n1() != f_yt.n2() {
        return Err(PipelineError::Invalid("continuation needs a square grid".into()));
    }
    let omega = Form::monomial(&[1, 4]).add(&Form::monomial(&[2, 3]));
    let g = nalgebra::Matrix4::identity();
    let nil3 = adapt_coframe_nil(&g, &omega, &LieModel::nil3xr())?;
    let base_sol = solve_nil3_yt(&nil3, f_yt, opts)?;
    let f_zt = f_yt.compose_integer_map([[0, -1], [1, 0]]);
    let reference = base_sol.alpha.as_ref().expect("nil solutions carry α");
    let mut errors = Vec::new();
    let mut sols = Vec::new();
    for &lambda in lambdas {
        let frame = adapt_coframe_nil(&g, &omega, &LieModel::nil4_scaled(lambda))?;
        let sol = solve_nil4(&frame, &f_zt, opts)?;
        let alpha = sol.alpha.as_ref().expect("nil solutions carry α");
        let mut err = 0.0f64;
        for i in 1..=4 {
            let mine = alpha.coeff(&[i]).to_field(&sol.f).compose_integer_map([[0, 1], [-1, 0]]);
            let theirs = reference.coeff(&[i]).to_field(&base_sol.f);
            err = err.max((&mine - &theirs).max_abs());
        }
        errors.push(err);
        sols.push(sol);
    }
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&i, &j| lambdas[j].total_cmp(&lambdas[i]));
    let monotone = order.windows(2).all(|w| errors[w[1]] < errors[w[0]]);
    Ok((ContinuationReport { lambdas: lambdas.to_vec(), errors, monotone }, base_sol, sols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_field::Scheme;
    use nalgebra::Matrix4;
    use std::f64::consts::PI;

    fn nil4_standard() -> AKFrame {
        let om = Form::monomial(&[1, 4]).add(&Form::monomial(&[2, 3]));
        adapt_coframe_nil(&Matrix4::identity(), &om, &LieModel::nil4()).unwrap()
    }

    #[test]
    fn trivial_rhs() {
        let fr = nil4_standard();
        let sol = solve_nil4(&fr, &TorusField::zeros(16, 16, Scheme::Spectral), &PipelineOptions::default()).unwrap();
        assert!(sol.alpha_frame.as_ref().unwrap().iter().all(|a| a.max_abs() == 0.0));
        assert_eq!(sol.omega_tilde.sub(&sol.omega).max_abs(), 0.0);
        assert!(sol.passed());
    }

    #[test]
    fn cosine_rhs_standard_frame() {
        let fr = nil4_standard();
        let f = TorusField::from_fn(32, 32, Scheme::Spectral, |z, _| 0.1 * (2.0 * PI * z).cos());
        let sol = solve_nil4(&fr, &f, &PipelineOptions::default()).unwrap();
        assert!(sol.assembly.passed(), "{:?}", sol.assembly);
        for r in &sol.verification {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn nil3_without_l_has_no_base_components() {
        let om = Form::monomial(&[1, 4]).add(&Form::monomial(&[2, 3]));
        let fr = adapt_coframe_nil(&Matrix4::identity(), &om, &LieModel::nil3xr()).unwrap();
        let co = NilCoefficients::of(&fr).unwrap();
        assert_eq!((co.k, co.l), (0.0, 0.0));
        let f = TorusField::from_fn(16, 16, Scheme::Spectral, |y, _| 0.1 * (2.0 * PI * y).cos());
        let sol = solve_nil3_yt(&fr, &f, &PipelineOptions::default()).unwrap();
        let [a1, a2, ..] = sol.alpha_frame.as_ref().unwrap();
        assert_eq!(a1.max_abs(), 0.0);
        assert_eq!(a2.max_abs(), 0.0);
        assert!(sol.passed());
    }
}
