#![allow(dead_code)]

use std::f64::consts::PI;

use cytorus::gma_solver::GmaProblem;
use cytorus::lie_frame::{adapt_coframe_kt, adapt_coframe_nil, AKFrame, Form, FrameKind, LieModel};
use cytorus::torus_field::{Scheme, TorusField};
use nalgebra::Matrix4;

pub const TAU: f64 = 2.0 * PI;

pub fn e(indices: &[usize]) -> Form {
    Form::monomial(indices)
}

/// Metric and symplectic form making the given rows an adapted frame of `kind`.
pub fn data_from_rows(rows: [[f64; 4]; 4], kind: FrameKind) -> (Matrix4<f64>, Form) {
    let f = Matrix4::from_fn(|i, j| rows[i][j]);
    (f.transpose() * f, kind.canonical_omega().substitute(&f))
}

pub fn nil4_standard() -> AKFrame {
    adapt_coframe_nil(&Matrix4::identity(), &e(&[1, 4]).add(&e(&[2, 3])), &LieModel::nil4()).unwrap()
}

/// Nil4 frame whose `dz` expansion has a nonzero `f^1` component.
pub fn nil4_skew() -> AKFrame {
    let rows = [[-1.25, 0.0, 0.0, 0.0], [0.4, 0.0, -0.8, 0.0], [0.3, 1.1, 0.2, 0.0], [0.1, -0.3, 0.25, -0.9]];
    let (g, om) = data_from_rows(rows, FrameKind::Nil);
    adapt_coframe_nil(&g, &om, &LieModel::nil4()).unwrap()
}

pub fn nil3_standard() -> AKFrame {
    adapt_coframe_nil(&Matrix4::identity(), &e(&[1, 4]).add(&e(&[2, 3])), &LieModel::nil3xr()).unwrap()
}

/// Nil³×R frame over `(y, t)` with `l ≠ 0` and `C ≠ 0`.
pub fn nil3_generic() -> AKFrame {
    let rows = [[0.9, 0.0, 0.0, 0.0], [-0.3, 0.0, 1.2, 0.0], [0.2, 0.8, -0.35, 0.0], [0.15, 0.1, -0.2, 1.1]];
    let (g, om) = data_from_rows(rows, FrameKind::Nil);
    adapt_coframe_nil(&g, &om, &LieModel::nil3xr()).unwrap()
}

pub fn kt_standard() -> AKFrame {
    adapt_coframe_kt(&Matrix4::identity(), &e(&[1, 3]).add(&e(&[4, 2])), &LieModel::nil3xr()).unwrap()
}

pub fn manufactured_p(n: usize, scheme: Scheme) -> TorusField {
    TorusField::from_fn(n, n, scheme, |x, y| 0.01 * (TAU * x).sin() * (TAU * y).cos())
}

/// `det(I + Hess p*) = e^F` with the Hessian of `p*` evaluated analytically.
pub fn manufactured_problem(n: usize, scheme: Scheme) -> GmaProblem {
    let c = 0.01 * TAU * TAU;
    let f = TorusField::from_fn(n, n, scheme, |x, y| {
        let pxx = -c * (TAU * x).sin() * (TAU * y).cos();
        let pxy = -c * (TAU * x).cos() * (TAU * y).sin();
        ((1.0 + pxx) * (1.0 + pxx) - pxy * pxy).ln()
    });
    GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], f)
}

pub fn cos_field(n: usize, amp: f64, axis: usize) -> TorusField {
    TorusField::from_fn(n, n, Scheme::Spectral, |x, y| amp * (TAU * if axis == 0 { x } else { y }).cos())
}
