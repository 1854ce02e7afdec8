//! Numerical certification of candidate Calabi–Yau solutions.
//!
//! Every check is a pure function of its inputs and returns a [`Report`]
//! listing each sub-check with the tolerance that was applied.

use nalgebra::{Matrix4, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lie_frame::form::mask_name;
use crate::lie_frame::{AKFrame, ComplexForm, Form, LieModel};
use crate::torus_field::TorusField;

pub const VOLUME_TOL: f64 = 1e-6;
pub const TYPE11_TOL: f64 = 1e-8;
pub const CLOSED_TOL: f64 = 1e-8;
pub const PAIRING_TOL: f64 = 1e-8;
pub const THETA_SQUARE_TOL: f64 = 1e-10;
pub const THETA_VOLUME_TOL: f64 = 1e-6;
pub const SELFDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, comparison: Comparison::AtMost, tolerance, passed: value <= tolerance }
    }
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, comparison: Comparison::AtLeast, tolerance, passed: value >= tolerance }
    }
    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, comparison: Comparison::Above, tolerance, passed: value > tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Self {
        Report { name: name.into(), checks: Vec::new() }
    }
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
    /// Value of the named check; panics if absent.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("no check named `{name}` in {}", self.name)).value
    }
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Top coefficient of a 4-form as a field (constants broadcast to `like`).
fn top_field(form: &Form, like: &TorusField) -> TorusField {
    form.top().to_field(like)
}

/// Pointwise `Ω̃² - e^F Ω²` (top coefficients).
pub fn volume_error_field(omega_tilde: &Form, omega: &Form, f: &TorusField) -> TorusField {
    let lhs = top_field(&omega_tilde.wedge(omega_tilde), f);
    let rhs = top_field(&omega.wedge(omega), f);
    lhs.zip_map(&rhs.zip_map(f, |r, v| r * v.exp()), |a, b| a - b)
}

pub fn check_volume(omega_tilde: &Form, omega: &Form, f: &TorusField) -> Report {
    let err = volume_error_field(omega_tilde, omega, f);
    let scale = top_field(&omega.wedge(omega), f).max_abs().max(f64::MIN_POSITIVE);
    let mut r = Report::new("volume");
    r.push(Check::at_most("relative volume error", err.max_abs() / scale, VOLUME_TOL));
    r
}

/// `Ω̃(J·,J·) = Ω̃` on frame pairs, and positivity of `Ω̃(·, J·)`.
pub fn check_type11(omega_tilde: &Form, frame: &AKFrame) -> Report {
    let finv = frame.frame_inverse();
    let j = *frame.j_matrix();
    let n = omega_tilde.grid_len();
    let (res, eig) = (0..n)
        .into_par_iter()
        .map(|idx| {
            let w = omega_tilde.matrix_at(idx);
            let diff: Matrix4<f64> = finv.transpose() * (j.transpose() * w * j - w) * finv;
            let s = finv.transpose() * (w * j) * finv;
            let sym = (s + s.transpose()) * 0.5;
            let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
            (diff.abs().max(), min_eig)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    let mut r = Report::new("type (1,1)");
    r.push(Check::at_most("J-invariance residual", res, TYPE11_TOL));
    r.push(Check::above("positivity margin", eig, 0.0));
    r
}

/// Closedness of both forms and `∫(Ω̃ - Ω) ∧ η` over the closed invariant 2-forms `η`.
pub fn check_cohomology(omega_tilde: &Form, omega: &Form, model: &LieModel) -> Report {
    let mut r = Report::new("cohomology");
    push_closed(&mut r, "dΩ̃", omega_tilde, model);
    push_closed(&mut r, "dΩ", omega, model);
    push_pairings(&mut r, "", &omega_tilde.sub(omega), model);
    r
}

/// Cohomology check for a complex form: real and imaginary parts separately.
pub fn check_cohomology_complex(theta_tilde: &ComplexForm, theta: &ComplexForm, model: &LieModel) -> Report {
    let mut r = Report::new("cohomology");
    push_closed(&mut r, "d Re Θ̃", &theta_tilde.re, model);
    push_closed(&mut r, "d Im Θ̃", &theta_tilde.im, model);
    let diff = theta_tilde.sub(theta);
    push_pairings(&mut r, "Re ", &diff.re, model);
    push_pairings(&mut r, "Im ", &diff.im, model);
    r
}

fn push_closed(r: &mut Report, name: &str, form: &Form, model: &LieModel) {
    let v = form.d(model).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
    r.push(Check::at_most(format!("|{name}|"), v, CLOSED_TOL));
}

fn push_pairings(r: &mut Report, prefix: &str, diff: &Form, model: &LieModel) {
    for eta in model.closed_2forms() {
        let name = eta.terms().next().map(|(m, _)| format!("e{}", mask_name(m))).unwrap_or_default();
        let top = diff.wedge(&eta).top();
        let v = match top.as_const() {
            Some(c) => c,
            None => top.to_field(diff.sample_field().expect("field coefficient")).integrate(),
        };
        r.push(Check::at_most(format!("|∫{prefix}(Ω̃ - Ω) ∧ {name}|"), v.abs(), PAIRING_TOL));
    }
}

/// `Θ̃ ∧ Θ̃ = 0` and `Θ̃ ∧ conj(Θ̃) = 4 e^F e^{1234}` pointwise.
pub fn check_holomorphic_symplectic(theta_tilde: &ComplexForm, f: &TorusField) -> Report {
    let sq = theta_tilde.wedge(theta_tilde);
    let sq_err = top_field(&sq.re, f).max_abs().max(top_field(&sq.im, f).max_abs());
    let vol = theta_tilde.wedge(&theta_tilde.conj());
    let target = f.exp().scale(4.0);
    let re_err = (&top_field(&vol.re, f) - &target).max_abs();
    let im_err = top_field(&vol.im, f).max_abs();
    let mut r = Report::new("holomorphic symplectic");
    r.push(Check::at_most("|Θ̃ ∧ Θ̃|", sq_err, THETA_SQUARE_TOL));
    r.push(Check::at_most("relative |Θ̃ ∧ conj Θ̃ - 4e^F e1234|", re_err.max(im_err) / target.max_abs(), THETA_VOLUME_TOL));
    r
}

/// Relations of the self-dual triple `Ω_1, Ω_2, Ω_3` built from the frame.
pub fn check_selfdual_frame(frame: &AKFrame) -> Report {
    let om = frame.selfdual_triple();
    let vol = Form::monomial(&[1, 2, 3, 4]).scale(2.0);
    let mut r = Report::new("self-dual frame");
    let mut cross = 0.0f64;
    for i in 0..3 {
        for j in i + 1..3 {
            cross = cross.max(om[i].wedge(&om[j]).max_abs());
        }
    }
    r.push(Check::at_most("|Ω_i ∧ Ω_j| (i ≠ j)", cross, SELFDUAL_TOL));
    let norm = (0..3).map(|i| om[i].wedge(&om[i]).sub(&vol).max_abs()).fold(0.0, f64::max);
    r.push(Check::at_most("|Ω_i ∧ Ω_i - 2 e1234|", norm, SELFDUAL_TOL));
    let model = frame.model();
    let closed = (1..3).map(|i| om[i].d(model).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    r.push(Check::at_most("|dΩ_2|, |dΩ_3|", closed, SELFDUAL_TOL));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_frame::{adapt_coframe_kt, adapt_coframe_nil, Fibration, FrameKind};
    use crate::torus_field::Scheme;
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn nil4_frame() -> AKFrame {
        let om = Form::monomial(&[1, 4]).add(&Form::monomial(&[2, 3]));
        adapt_coframe_nil(&Matrix4::identity(), &om, &LieModel::nil4()).unwrap()
    }

    fn kt_frame() -> AKFrame {
        let om = Form::monomial(&[1, 3]).add(&Form::monomial(&[4, 2]));
        adapt_coframe_kt(&Matrix4::identity(), &om, &LieModel::nil3xr()).unwrap()
    }

    #[test]
    fn trivial_cases_pass_exactly() {
        let fr = nil4_frame();
        let om = fr.omega_form();
        let f = TorusField::zeros(8, 8, Scheme::Spectral);
        assert_eq!(check_volume(&om, &om, &f).value("relative volume error"), 0.0);
        let t = check_type11(&om, &fr);
        assert_eq!(t.value("J-invariance residual"), 0.0);
        assert!((t.value("positivity margin") - 1.0).abs() < 1e-14);
        let c = check_cohomology(&om, &om, fr.model());
        assert!(c.passed());
        assert!(c.checks.iter().all(|k| k.value == 0.0));
    }

    #[test]
    fn perturbations_are_flagged() {
        let fr = nil4_frame();
        let om = fr.omega_form();
        let f = TorusField::zeros(8, 8, Scheme::Spectral);
        let bumped = om.add(&Form::monomial(&[1, 4]).scale(1e-3));
        let v = check_volume(&bumped, &om, &f);
        assert!(!v.passed() && v.value("relative volume error") >= 1e-4);
        let eps = 1e-3;
        let t = check_type11(&om.add(&fr.f_monomial(&[1, 3]).scale(eps)), &fr);
        assert!(!t.passed());
        assert!((t.value("J-invariance residual") - eps).abs() < 1e-12);
        let c = check_cohomology(&om.add(&Form::monomial(&[1, 4]).scale(1e-2)), &om, fr.model());
        assert!(!c.passed());
        assert!((c.value("|∫(Ω̃ - Ω) ∧ e23|") - 1e-2).abs() < 1e-15);
        // e12 = de4 is exact on Nil4, so this shift is invisible.
        assert!(check_cohomology(&om.add(&Form::monomial(&[1, 2]).scale(1e-2)), &om, fr.model()).passed());
    }

    #[test]
    fn selfdual_frame_checks() {
        let fr = kt_frame();
        assert!(check_selfdual_frame(&fr).passed());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            // Random U(2) element acting on (f1 + i f2, f3 + i f4).
            let (a, b, c, phase): (f64, f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen(), rng.gen());
            let (th, ps1, ps2, ph) = (a * PI, b * 2.0 * PI, c * 2.0 * PI, phase * 2.0 * PI);
            let u = [
                [num_complex(th.cos(), ps1), num_complex(-th.sin(), -ps2)],
                [num_complex(th.sin(), ps2), num_complex(th.cos(), -ps1)],
            ];
            let mut rot = Matrix4::zeros();
            for (i, row) in u.iter().enumerate() {
                for (j, uij) in row.iter().enumerate() {
                    let z = uij * rustfft::num_complex::Complex64::from_polar(1.0, ph);
                    let blk = Matrix2::new(z.re, -z.im, z.im, z.re);
                    rot.fixed_view_mut::<2, 2>(2 * i, 2 * j).copy_from(&blk);
                }
            }
            let rotated = rot * fr.frame_matrix();
            let rf = AKFrame::from_frame(LieModel::nil3xr(), Fibration::Xy, FrameKind::Kt, rotated).unwrap();
            let rep = check_selfdual_frame(&rf);
            assert!(rep.checks.iter().all(|c| c.value <= 1e-12), "{rep:?}");
        }
        let mut scaled = *fr.frame_matrix();
        scaled.row_mut(3).scale_mut(1.1);
        let sf = AKFrame::from_frame(LieModel::nil3xr(), Fibration::Xy, FrameKind::Kt, scaled).unwrap();
        let rep = check_selfdual_frame(&sf);
        assert!(!rep.get("|Ω_i ∧ Ω_i - 2 e1234|").unwrap().passed);
    }

    fn num_complex(modulus: f64, arg: f64) -> rustfft::num_complex::Complex64 {
        rustfft::num_complex::Complex64::from_polar(modulus, arg)
    }

    #[test]
    fn holomorphic_pair_canonical() {
        let fr = kt_frame();
        let theta = ComplexForm::new(fr.f(1), fr.f(2)).wedge(&ComplexForm::new(fr.f(3), fr.f(4)));
        let f = TorusField::zeros(8, 8, Scheme::Spectral);
        let r = check_holomorphic_symplectic(&theta, &f);
        assert!(r.checks.iter().all(|c| c.value == 0.0), "{r:?}");
        let bad = theta.add(&ComplexForm::new(fr.f_monomial(&[1, 3]).scale(1e-3), Form::zero(2)));
        let r = check_holomorphic_symplectic(&bad, &f);
        assert!((r.value("|Θ̃ ∧ Θ̃|") - 2e-3).abs() < 1e-12);
        assert!(!r.passed());
    }
}
