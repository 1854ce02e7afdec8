//! Adapted orthonormal coframes for invariant almost-Kähler structures.
//!
//! Conventions: the metric matrix is `G_ij = g(e_i, e_j)`, the 2-form matrix
//! is `W_ij = Ω(e_i, e_j)`, and `J` acts on vectors by `J = -G⁻¹W` so that
//! `Ω(X, Y) = g(JX, Y)`. On 1-forms `(Jξ)(X) = -ξ(JX)`, i.e. a row covector
//! maps to `-ξ J`. Frame rows are `f^i = Σ_j F_ij e^j`.

use nalgebra::{Matrix4, RowVector4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::form::Form;
use super::model::{Fibration, LieModel, ModelTag, PAIRS};
use super::LieError;

/// Tolerance for frame identities that hold exactly up to rounding.
pub const FRAME_TOL: f64 = 1e-12;
/// Looser tolerance used to accept user-supplied data as compatible.
pub const INPUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    /// `Ω = f^{14} + f^{23}`, Lagrangian fibres.
    Nil,
    /// `Ω = f^{12} + f^{34}`.
    Sol,
    /// `Ω = f^{13} + f^{42}` with the holomorphic symplectic pair.
    Kt,
}

impl FrameKind {
    /// The symplectic form written in its own frame.
    pub fn canonical_omega(self) -> Form {
        match self {
            FrameKind::Nil => Form::monomial(&[1, 4]).add(&Form::monomial(&[2, 3])),
            FrameKind::Sol => Form::monomial(&[1, 2]).add(&Form::monomial(&[3, 4])),
            FrameKind::Kt => Form::monomial(&[1, 3]).add(&Form::monomial(&[4, 2])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrameConstants {
    /// `ds = A f^1`, `dr = C f^1 + B f^2`, `df^3 = k f^{12}`, `df^4 = l f^{12} + m f^{13}`,
    /// where `s` and `r` are the base coordinates with `ds ∈ ⟨e^1⟩`, `dr = e^3`.
    Nil { a: f64, b: f64, c: f64, k: f64, l: f64, m: f64 },
    /// `(dx, dy)ᵀ = base_matrix (f^1, f^2)ᵀ` and `df^4 = k f^{12}`.
    Kt { base_matrix: [[f64; 2]; 2], k: f64 },
    /// `dt = a f^1`.
    Sol { a: f64 },
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AKFrame {
    model: LieModel,
    base: Fibration,
    kind: FrameKind,
    frame: Matrix4<f64>,
    metric: Matrix4<f64>,
    omega: Matrix4<f64>,
    j: Matrix4<f64>,
    constants: FrameConstants,
}

fn row(m: &Matrix4<f64>, i: usize) -> RowVector4<f64> {
    m.row(i).into_owned()
}

fn e(i: usize) -> RowVector4<f64> {
    let mut v = RowVector4::zeros();
    v[i - 1] = 1.0;
    v
}

fn scale_of(m: &Matrix4<f64>) -> f64 {
    m.abs().max().max(1.0)
}

/// Checks `G` symmetric positive definite and `W` antisymmetric, nondegenerate.
fn check_inputs(metric: &Matrix4<f64>, omega: &Matrix4<f64>) -> Result<Matrix4<f64>, LieError> {
    if (metric - metric.transpose()).abs().max() > INPUT_TOL * scale_of(metric) || metric.cholesky().is_none() {
        return Err(LieError::NotPositiveDefinite);
    }
    let pf = omega[(0, 1)] * omega[(2, 3)] - omega[(0, 2)] * omega[(1, 3)] + omega[(0, 3)] * omega[(1, 2)];
    if pf.abs() <= INPUT_TOL * scale_of(omega).powi(2) {
        return Err(LieError::Degenerate);
    }
    metric.try_inverse().ok_or(LieError::NotPositiveDefinite)
}

fn omega_matrix(omega: &Form) -> Result<Matrix4<f64>, LieError> {
    omega.to_matrix().ok_or_else(|| LieError::Parse("symplectic form must be a constant 2-form".into()))
}

fn j_of(ginv: &Matrix4<f64>, w: &Matrix4<f64>) -> Matrix4<f64> {
    -(ginv * w)
}

fn compatibility_residual(j: &Matrix4<f64>) -> f64 {
    (j * j + Matrix4::identity()).abs().max()
}

fn norm(ginv: &Matrix4<f64>, xi: &RowVector4<f64>) -> f64 {
    (xi * ginv * xi.transpose())[(0, 0)].sqrt()
}

fn inner(ginv: &Matrix4<f64>, a: &RowVector4<f64>, b: &RowVector4<f64>) -> f64 {
    (a * ginv * b.transpose())[(0, 0)]
}

fn j_cov(j: &Matrix4<f64>, xi: &RowVector4<f64>) -> RowVector4<f64> {
    -(xi * j)
}

fn stack(rows: [RowVector4<f64>; 4]) -> Matrix4<f64> {
    Matrix4::from_rows(&rows)
}

fn closedness_residual(model: &LieModel, w: &Matrix4<f64>) -> f64 {
    Form::from_matrix(w).d(model).map(|f| f.max_abs()).unwrap_or(f64::INFINITY)
}

impl AKFrame {
    fn assemble(
        model: LieModel,
        base: Fibration,
        kind: FrameKind,
        frame: Matrix4<f64>,
        metric: Matrix4<f64>,
        omega: Matrix4<f64>,
    ) -> Result<Self, LieError> {
        let ginv = metric.try_inverse().ok_or(LieError::NotPositiveDefinite)?;
        let j = j_of(&ginv, &omega);
        let out = AKFrame { model, base, kind, frame, metric, omega, j, constants: FrameConstants::Raw };
        out.check_orthonormal(INPUT_TOL)?;
        out.check_reconstruction(INPUT_TOL)?;
        Ok(out)
    }

    /// Frame with the metric that makes it orthonormal and the symplectic
    /// form canonical for `kind`. No filtration is imposed and no constants
    /// are extracted.
    pub fn from_frame(model: LieModel, base: Fibration, kind: FrameKind, frame: Matrix4<f64>) -> Result<Self, LieError> {
        if !model.allows(base) {
            return Err(LieError::InvarianceViolation { model: model.tag, base });
        }
        if frame.determinant().abs() < FRAME_TOL {
            return Err(LieError::Degenerate);
        }
        let metric = frame.transpose() * frame;
        let omega = kind
            .canonical_omega()
            .substitute(&frame)
            .to_matrix()
            .expect("canonical form is constant");
        Self::assemble(model, base, kind, frame, metric, omega)
    }

    pub fn model(&self) -> &LieModel {
        &self.model
    }
    pub fn base(&self) -> Fibration {
        self.base
    }
    pub fn kind(&self) -> FrameKind {
        self.kind
    }
    pub fn frame_matrix(&self) -> &Matrix4<f64> {
        &self.frame
    }
    pub fn frame_inverse(&self) -> Matrix4<f64> {
        self.frame.try_inverse().expect("frame is invertible")
    }
    pub fn metric(&self) -> &Matrix4<f64> {
        &self.metric
    }
    pub fn omega_matrix(&self) -> &Matrix4<f64> {
        &self.omega
    }
    pub fn omega_form(&self) -> Form {
        Form::from_matrix(&self.omega)
    }
    /// `J` acting on tangent vectors, in the `e`-basis.
    pub fn j_matrix(&self) -> &Matrix4<f64> {
        &self.j
    }
    /// `J` on the coframe: row `i` holds the `f`-coefficients of `J f^i`.
    pub fn j_coframe(&self) -> Matrix4<f64> {
        -(self.frame * self.j * self.frame_inverse())
    }
    pub fn constants(&self) -> &FrameConstants {
        &self.constants
    }

    /// `f^i` as a 1-form in the `e`-basis (`i` in `1..=4`).
    pub fn f(&self, i: usize) -> Form {
        let r = row(&self.frame, i - 1);
        Form::covector(&[r[0], r[1], r[2], r[3]])
    }

    /// `f^{i1..ik}` in the `e`-basis.
    pub fn f_monomial(&self, indices: &[usize]) -> Form {
        Form::monomial(indices).substitute(&self.frame)
    }

    /// Rewrites an `e`-basis form in the frame.
    pub fn to_frame(&self, form: &Form) -> Form {
        form.substitute(&self.frame_inverse())
    }

    /// Rewrites a frame-basis form in the `e`-basis.
    pub fn from_frame_basis(&self, form: &Form) -> Form {
        form.substitute(&self.frame)
    }

    /// Largest entry of `F G⁻¹ Fᵀ - I`.
    pub fn gram_residual(&self) -> f64 {
        let ginv = self.metric.try_inverse().expect("metric invertible");
        (self.frame * ginv * self.frame.transpose() - Matrix4::identity()).abs().max()
    }

    /// Largest coefficient of `Ω` minus its canonical frame expression.
    pub fn reconstruction_residual(&self) -> f64 {
        self.to_frame(&self.omega_form()).sub(&self.kind.canonical_omega()).max_abs()
    }

    pub fn compatibility_residual(&self) -> f64 {
        compatibility_residual(&self.j)
    }

    fn check_orthonormal(&self, tol: f64) -> Result<(), LieError> {
        let r = self.gram_residual();
        if r > tol {
            return Err(LieError::NoAdaptedFrame(format!("frame not orthonormal (residual {r:e})")));
        }
        Ok(())
    }

    fn check_reconstruction(&self, tol: f64) -> Result<(), LieError> {
        let r = self.reconstruction_residual();
        if r > tol {
            return Err(LieError::NoAdaptedFrame(format!("symplectic form not reproduced (residual {r:e})")));
        }
        Ok(())
    }

    /// Residuals of the defining expansions of the constants (exact frame coefficients).
    pub fn constants_residual(&self) -> f64 {
        match &self.constants {
            FrameConstants::Nil { a, b, c, k, l, m } => {
                let (ds, dr) = self.nil_base_differentials();
                let mut r = self.to_frame(&ds).sub(&Form::monomial(&[1]).scale(*a)).max_abs();
                r = r.max(
                    self.to_frame(&dr)
                        .sub(&Form::monomial(&[1]).scale(*c).add(&Form::monomial(&[2]).scale(*b)))
                        .max_abs(),
                );
                let df3 = self.to_frame(&self.f(3).d(&self.model).expect("constant"));
                let df4 = self.to_frame(&self.f(4).d(&self.model).expect("constant"));
                r = r.max(df3.sub(&Form::monomial(&[1, 2]).scale(*k)).max_abs());
                r.max(
                    df4.sub(&Form::monomial(&[1, 2]).scale(*l).add(&Form::monomial(&[1, 3]).scale(*m)))
                        .max_abs(),
                )
            }
            FrameConstants::Kt { base_matrix, k } => {
                let dif = self.model.base_differentials(self.base).expect("allowed base");
                let mut r = 0.0f64;
                for (axis, d) in dif.iter().enumerate() {
                    let expect = Form::monomial(&[1])
                        .scale(base_matrix[axis][0])
                        .add(&Form::monomial(&[2]).scale(base_matrix[axis][1]));
                    r = r.max(self.to_frame(&Form::covector(d)).sub(&expect).max_abs());
                }
                let df3 = self.to_frame(&self.f(3).d(&self.model).expect("constant"));
                let df4 = self.to_frame(&self.f(4).d(&self.model).expect("constant"));
                r.max(df3.max_abs()).max(df4.sub(&Form::monomial(&[1, 2]).scale(*k)).max_abs())
            }
            FrameConstants::Sol { a } => {
                let dif = self.model.base_differentials(self.base).expect("allowed base");
                self.to_frame(&Form::covector(&dif[1])).sub(&Form::monomial(&[1]).scale(*a)).max_abs()
            }
            FrameConstants::Raw => 0.0,
        }
    }

    /// `(ds, dr)` for the Nil reductions: `ds ∈ ⟨e^1⟩` and `dr = e^3`.
    pub fn nil_base_differentials(&self) -> (Form, Form) {
        let dif = self.model.base_differentials(self.base).expect("allowed base");
        let (s_axis, r_axis) = nil_axes(self.base);
        (Form::covector(&dif[s_axis]), Form::covector(&dif[r_axis]))
    }
}

/// Grid axes (0-based) of the coordinates `s` (with `ds ∈ ⟨e^1⟩`) and `r` (`dr = e^3`).
pub fn nil_axes(base: Fibration) -> (usize, usize) {
    match base {
        Fibration::Zt => (1, 0),
        Fibration::Yt => (0, 1),
        Fibration::Xy => panic!("no Nil reduction over the xy base"),
    }
}

/// Adapted coframe with `Ω = f^{14} + f^{23}`, `f^1 ∈ ⟨e^1⟩`, `f^2 ∈ ⟨e^1,e^3⟩`,
/// `f^3 ∈ ⟨e^1,e^2,e^3⟩`, for the Nil4 model over `(z,t)` or Nil3×R over `(y,t)`.
pub fn adapt_coframe_nil(metric: &Matrix4<f64>, omega: &Form, model: &LieModel) -> Result<AKFrame, LieError> {
    let (base, sigma) = match model.tag {
        ModelTag::Nil4 => (Fibration::Zt, -1.0),
        ModelTag::Nil3xR => (Fibration::Yt, 1.0),
        ModelTag::Sol3xR => return Err(LieError::WrongModel { expected: "nil4 or nil3xr", got: model.tag }),
    };
    let w = omega_matrix(omega)?;
    let lag = omega.wedge(&Form::monomial(&[1, 3])).max_abs();
    if lag > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NotLagrangian { residual: lag });
    }
    let ginv = check_inputs(metric, &w)?;
    let j = j_of(&ginv, &w);
    let cres = compatibility_residual(&j);
    if cres > INPUT_TOL {
        return Err(LieError::IncompatibleMetric { residual: cres });
    }

    let f1 = e(1) * (sigma / norm(&ginv, &e(1)));
    let f4 = j_cov(&j, &f1);
    let v = e(3) - f1 * inner(&ginv, &e(3), &f1);
    let mut f2 = v / norm(&ginv, &v);
    let mut f3 = j_cov(&j, &f2);
    if f3[1].abs() <= INPUT_TOL {
        return Err(LieError::FiltrationFailed("f^3 has no e^2 component".into()));
    }
    if f3[1] < 0.0 {
        f2 = -f2;
        f3 = -f3;
    }
    let frame = stack([f1, f2, f3, f4]);
    let mut out = AKFrame::assemble(*model, base, FrameKind::Nil, frame, *metric, w)?;
    let filtration = [frame[(1, 1)], frame[(1, 3)], frame[(2, 3)]];
    if filtration.iter().any(|x| x.abs() > INPUT_TOL * scale_of(&frame)) {
        return Err(LieError::FiltrationFailed(format!("frame violates the filtration: {filtration:?}")));
    }
    let closed = closedness_residual(model, &w);
    if closed > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NotClosed { residual: closed });
    }
    out.constants = nil_constants(&out)?;
    Ok(out)
}

fn nil_constants(frame: &AKFrame) -> Result<FrameConstants, LieError> {
    let (ds, dr) = frame.nil_base_differentials();
    let ds_f = frame.to_frame(&ds);
    let dr_f = frame.to_frame(&dr);
    let c1 = |f: &Form, i: usize| f.coeff(&[i]).as_const().unwrap_or(0.0);
    let a = c1(&ds_f, 1);
    let (c, b) = (c1(&dr_f, 1), c1(&dr_f, 2));
    let df3 = frame.to_frame(&frame.f(3).d(&frame.model)?);
    let df4 = frame.to_frame(&frame.f(4).d(&frame.model)?);
    let snap = |v: f64| if v.abs() <= FRAME_TOL * scale_of(&frame.frame) { 0.0 } else { v };
    let c2 = |f: &Form, i: usize, j: usize| snap(f.coeff(&[i, j]).as_const().unwrap_or(0.0));
    let consts = FrameConstants::Nil { a, b, c, k: c2(&df3, 1, 2), l: c2(&df4, 1, 2), m: c2(&df4, 1, 3) };
    let with = AKFrame { constants: consts.clone(), ..frame.clone() };
    let r = with.constants_residual();
    if r > INPUT_TOL * scale_of(&frame.frame) {
        return Err(LieError::FiltrationFailed(format!("structure constants do not expand (residual {r:e})")));
    }
    if a <= 0.0 || b.abs() <= INPUT_TOL {
        return Err(LieError::FiltrationFailed(format!("need A > 0 and B != 0, got A = {a}, B = {b}")));
    }
    Ok(consts)
}

/// `J = K (-K²)^{-1/2}` with `K = -G⁻¹W`: the almost complex structure
/// closest to `K`, equal to `K` when the triple is already compatible.
fn polar_j(metric: &Matrix4<f64>, w: &Matrix4<f64>) -> Matrix4<f64> {
    let eig = SymmetricEigen::new(*metric);
    let sqrt_g = eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    let isqrt_g =
        eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt())) * eig.eigenvectors.transpose();
    let n = isqrt_g * w * isqrt_g;
    let ntn = SymmetricEigen::new(n.transpose() * n);
    let inv_abs = ntn.eigenvectors * Matrix4::from_diagonal(&ntn.eigenvalues.map(|x| 1.0 / x.sqrt())) * ntn.eigenvectors.transpose();
    -(isqrt_g * n * inv_abs * sqrt_g)
}

/// Adapted coframe on Sol³×R with `Ω = f^{12} + f^{34}`, `f^1 ∈ ⟨e^1⟩`,
/// `f^3 ∈ ⟨e^3⟩`, `f^4 ∈ ⟨e^3,e^4⟩`. A metric that is not compatible with
/// `Ω` is replaced by `g(X,Y) = Ω(X, JY)` for the polar part `J` of `-G⁻¹W`.
pub fn adapt_coframe_sol(metric: &Matrix4<f64>, omega: &Form, model: &LieModel) -> Result<AKFrame, LieError> {
    if model.tag != ModelTag::Sol3xR {
        return Err(LieError::WrongModel { expected: "sol3xr", got: model.tag });
    }
    let w = omega_matrix(omega)?;
    check_inputs(metric, &w)?;
    let j = polar_j(metric, &w);
    let g = w * j;
    let g = (g + g.transpose()) * 0.5;
    if (g - metric).abs().max() > INPUT_TOL * scale_of(metric) {
        log::info!("metric replaced by the compatible metric of the polar almost complex structure");
    }
    let ginv = g.try_inverse().ok_or(LieError::NotPositiveDefinite)?;
    let f1 = e(1) / norm(&ginv, &e(1));
    let f2 = j_cov(&j, &f1);
    let f3 = e(3) / norm(&ginv, &e(3));
    let f4 = j_cov(&j, &f3);
    let frame = stack([f1, f2, f3, f4]);
    if frame[(3, 0)].abs() > INPUT_TOL || frame[(3, 1)].abs() > INPUT_TOL {
        return Err(LieError::NoAdaptedFrame("J f^3 leaves ⟨e^3, e^4⟩".into()));
    }
    let mut out = AKFrame::assemble(*model, Fibration::Zt, FrameKind::Sol, frame, g, w)?;
    let closed = closedness_residual(model, &w);
    if closed > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NotClosed { residual: closed });
    }
    out.constants = FrameConstants::Sol { a: 1.0 / frame[(0, 0)] };
    Ok(out)
}

/// Frame for the elementary Sol³×R construction: `Ω = μ e^{12} + σ` with `σ`
/// simple, `f^{12} = μ e^{12}` and `f^{34} = σ`. The metric making this frame
/// orthonormal renders the base projection holomorphic. Returns the frame and `μ`.
pub fn simple_frame(omega: &Form, model: &LieModel) -> Result<(AKFrame, f64), LieError> {
    if model.tag != ModelTag::Sol3xR {
        return Err(LieError::WrongModel { expected: "sol3xr", got: model.tag });
    }
    let w = omega_matrix(omega)?;
    let beta = Form::monomial(&[1, 2]);
    let b_om = beta.wedge(omega).top().as_const().unwrap_or(0.0);
    if b_om.abs() <= INPUT_TOL * scale_of(&w) {
        return Err(LieError::FibresLagrangian);
    }
    let om2 = omega.wedge(omega).top().as_const().unwrap_or(0.0);
    if om2.abs() <= INPUT_TOL * scale_of(&w).powi(2) {
        return Err(LieError::Degenerate);
    }
    let mu = om2 / (2.0 * b_om);
    let sigma = omega.sub(&beta.scale(mu)).to_matrix().expect("constant");
    let (mut u, mut v, mut best) = (0, 1, 0.0);
    for &(i, j) in PAIRS.iter() {
        if sigma[(i - 1, j - 1)].abs() > best {
            (u, v, best) = (i - 1, j - 1, sigma[(i - 1, j - 1)].abs());
        }
    }
    let s_uv = sigma[(u, v)];
    let f3 = row(&sigma, u) / s_uv;
    let f4 = row(&sigma, v);
    let r = mu.abs().sqrt();
    let frame = stack([e(1) * r, e(2) * (r * mu.signum()), f3, f4]);
    let closed = closedness_residual(model, &w);
    if closed > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NotClosed { residual: closed });
    }
    let mut out = AKFrame::from_frame(*model, Fibration::Zt, FrameKind::Sol, frame)?;
    if (out.omega - w).abs().max() > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NoAdaptedFrame("simple decomposition does not reproduce Ω".into()));
    }
    out.omega = w;
    out.constants = FrameConstants::Sol { a: 1.0 / r };
    Ok((out, mu))
}

/// Adapted coframe for the Kodaira–Thurston fibration over `(x, y)`:
/// `Ω = f^{13} + f^{42}` with `f^1, f^2 ∈ ⟨e^1, e^2⟩`, `f^3 ∈ ⟨e^1, e^2, e^3⟩`,
/// and `Ω ∧ Ω = 2 e^{1234}`.
pub fn adapt_coframe_kt(metric: &Matrix4<f64>, omega: &Form, model: &LieModel) -> Result<AKFrame, LieError> {
    if model.tag != ModelTag::Nil3xR {
        return Err(LieError::WrongModel { expected: "nil3xr", got: model.tag });
    }
    let w = omega_matrix(omega)?;
    if w[(2, 3)].abs() > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NotLagrangian { residual: w[(2, 3)].abs() });
    }
    let ginv = check_inputs(metric, &w)?;
    let j = j_of(&ginv, &w);
    let cres = compatibility_residual(&j);
    if cres > INPUT_TOL {
        return Err(LieError::IncompatibleMetric { residual: cres });
    }
    let b1 = e(1) / norm(&ginv, &e(1));
    let v = e(2) - b1 * inner(&ginv, &e(2), &b1);
    let b2 = v / norm(&ginv, &v);
    let b3 = j_cov(&j, &b1);
    let b4 = -j_cov(&j, &b2);
    let th = b3[3].atan2(b4[3]);
    let (c, s) = (th.cos(), th.sin());
    let mut f = [b1 * c + b2 * s, -b1 * s + b2 * c, b3 * c - b4 * s, b3 * s + b4 * c];
    if f[0][0] < 0.0 || (f[0][0].abs() <= INPUT_TOL && f[0][1] < 0.0) {
        f = [-f[0], -f[1], -f[2], -f[3]];
    }
    let frame = stack(f);
    let mut out = AKFrame::assemble(*model, Fibration::Xy, FrameKind::Kt, frame, *metric, w)?;
    let vol = omega.wedge(omega).top().as_const().unwrap_or(0.0);
    if (vol - 2.0).abs() > INPUT_TOL {
        return Err(LieError::NormalizationViolated { value: vol / 2.0 });
    }
    let closed = closedness_residual(model, &w);
    if closed > INPUT_TOL * scale_of(&w) {
        return Err(LieError::NotClosed { residual: closed });
    }
    out.constants = kt_constants(&out)?;
    Ok(out)
}

fn kt_constants(frame: &AKFrame) -> Result<FrameConstants, LieError> {
    let dif = frame.model.base_differentials(frame.base)?;
    let mut base_matrix = [[0.0; 2]; 2];
    for (axis, d) in dif.iter().enumerate() {
        let df = frame.to_frame(&Form::covector(d));
        base_matrix[axis] = [
            df.coeff(&[1]).as_const().unwrap_or(0.0),
            df.coeff(&[2]).as_const().unwrap_or(0.0),
        ];
    }
    let df4 = frame.to_frame(&frame.f(4).d(&frame.model)?);
    let k = df4.coeff(&[1, 2]).as_const().unwrap_or(0.0);
    let consts = FrameConstants::Kt { base_matrix, k };
    let with = AKFrame { constants: consts.clone(), ..frame.clone() };
    let r = with.constants_residual();
    if r > INPUT_TOL * scale_of(&frame.frame) {
        return Err(LieError::FiltrationFailed(format!("frame constants do not expand (residual {r:e})")));
    }
    Ok(consts)
}

impl AKFrame {
    /// Kodaira–Thurston frame given directly by its matrix; constants are
    /// extracted when `f^1, f^2` are base forms and `f^3` has no `e^4` part.
    pub fn kt_from_frame(frame: Matrix4<f64>) -> Result<Self, LieError> {
        let mut out = Self::from_frame(LieModel::nil3xr(), Fibration::Xy, FrameKind::Kt, frame)?;
        if let Ok(c) = kt_constants(&out) {
            out.constants = c;
        }
        Ok(out)
    }

    /// Self-dual triple `(f^{12}+f^{34}, f^{13}+f^{42}, f^{14}+f^{23})` in the `e`-basis.
    pub fn selfdual_triple(&self) -> [Form; 3] {
        [
            self.f_monomial(&[1, 2]).add(&self.f_monomial(&[3, 4])),
            self.f_monomial(&[1, 3]).add(&self.f_monomial(&[4, 2])),
            self.f_monomial(&[1, 4]).add(&self.f_monomial(&[2, 3])),
        ]
    }
}

/// Serializable description of a frame and its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDocument {
    pub model: LieModel,
    pub structure: String,
    pub structure_constants: [[f64; 6]; 4],
    pub coframe: [String; 4],
    pub base: Fibration,
    pub kind: FrameKind,
    pub frame_matrix: [[f64; 4]; 4],
    pub metric: [[f64; 4]; 4],
    /// Coefficients of `Ω` on `e^{12}, e^{13}, e^{14}, e^{23}, e^{24}, e^{34}`.
    pub omega: [f64; 6],
    pub j_matrix: [[f64; 4]; 4],
    pub constants: FrameConstants,
}

fn to_rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

fn from_rows(r: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| r[i][j])
}

impl AKFrame {
    pub fn to_document(&self) -> FrameDocument {
        FrameDocument {
            model: self.model,
            structure: self.model.structure_string(),
            structure_constants: self.model.d_matrix(),
            coframe: self.model.coframe_realization(),
            base: self.base,
            kind: self.kind,
            frame_matrix: to_rows(&self.frame),
            metric: to_rows(&self.metric),
            omega: PAIRS.map(|(i, j)| self.omega[(i - 1, j - 1)]),
            j_matrix: to_rows(&self.j),
            constants: self.constants.clone(),
        }
    }

    /// Rebuilds a frame from its document, re-checking orthonormality, the
    /// canonical form of `Ω` and the stored constants.
    pub fn from_document(doc: &FrameDocument) -> Result<Self, LieError> {
        let mut w = Matrix4::zeros();
        for (c, &(i, j)) in doc.omega.iter().zip(PAIRS.iter()) {
            w[(i - 1, j - 1)] = *c;
            w[(j - 1, i - 1)] = -*c;
        }
        if !doc.model.allows(doc.base) {
            return Err(LieError::InvarianceViolation { model: doc.model.tag, base: doc.base });
        }
        let mut out = Self::assemble(doc.model, doc.base, doc.kind, from_rows(&doc.frame_matrix), from_rows(&doc.metric), w)?;
        out.constants = doc.constants.clone();
        let r = out.constants_residual();
        if r > INPUT_TOL * scale_of(&out.frame) {
            return Err(LieError::FiltrationFailed(format!("stored constants inconsistent (residual {r:e})")));
        }
        Ok(out)
    }
}

impl Serialize for AKFrame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AKFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = FrameDocument::deserialize(d)?;
        AKFrame::from_document(&doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn om(pairs: &[(&[usize], f64)]) -> Form {
        pairs.iter().fold(Form::zero(2), |acc, (ix, c)| acc.add(&Form::monomial(ix).scale(*c)))
    }

    fn nil_consts(f: &AKFrame) -> [f64; 6] {
        match f.constants() {
            FrameConstants::Nil { a, b, c, k, l, m } => [*a, *b, *c, *k, *l, *m],
            other => panic!("unexpected constants {other:?}"),
        }
    }

    #[test]
    fn nil4_standard_frame() {
        let omega = om(&[(&[1, 4], 1.0), (&[2, 3], 1.0)]);
        let f = adapt_coframe_nil(&Matrix4::identity(), &omega, &LieModel::nil4()).unwrap();
        let expected = Matrix4::new(
            -1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, -1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, -1.0,
        );
        assert_eq!(*f.frame_matrix(), expected);
        assert_eq!(nil_consts(&f), [1.0, -1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(f.gram_residual() <= FRAME_TOL);
        assert!(f.reconstruction_residual() <= FRAME_TOL);
        assert!(f.constants_residual() <= FRAME_TOL);
        let jc = f.j_coframe();
        // J f^1 = f^4, J f^2 = f^3.
        assert!((jc[(0, 3)] - 1.0).abs() < FRAME_TOL && (jc[(1, 2)] - 1.0).abs() < FRAME_TOL);
    }

    #[test]
    fn nil4_homothety() {
        let omega = om(&[(&[1, 4], 1.0), (&[2, 3], 1.0)]);
        let f = adapt_coframe_nil(&Matrix4::identity(), &omega, &LieModel::nil4()).unwrap();
        let g = adapt_coframe_nil(&(Matrix4::identity() * 2.0), &omega.scale(2.0), &LieModel::nil4()).unwrap();
        let r2 = 2f64.sqrt();
        assert!((g.frame_matrix() - f.frame_matrix() * r2).abs().max() < 1e-15);
        let (cf, cg) = (nil_consts(&f), nil_consts(&g));
        for i in 0..6 {
            assert!((cg[i] - cf[i] / r2).abs() < 1e-15);
        }
    }

    #[test]
    fn nil_rejections() {
        let bad = om(&[(&[1, 3], 1.0), (&[4, 2], 1.0)]);
        assert!(matches!(
            adapt_coframe_nil(&Matrix4::identity(), &bad, &LieModel::nil4()),
            Err(LieError::NotLagrangian { .. })
        ));
        let omega = om(&[(&[1, 4], 1.0), (&[2, 3], 1.0)]);
        let g = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 2.0, 1.0, 1.0));
        assert!(matches!(
            adapt_coframe_nil(&g, &omega, &LieModel::nil4()),
            Err(LieError::IncompatibleMetric { .. })
        ));
    }

    #[test]
    fn sol_frames() {
        let sol = LieModel::sol3xr();
        let f = adapt_coframe_sol(&Matrix4::identity(), &om(&[(&[1, 2], 1.0), (&[3, 4], 1.0)]), &sol).unwrap();
        assert_eq!(*f.frame_matrix(), Matrix4::identity());
        let omega = om(&[(&[1, 2], 2.0), (&[3, 4], 1.0)]);
        let g = adapt_coframe_sol(&Matrix4::identity(), &omega, &sol).unwrap();
        assert!(g.reconstruction_residual() <= FRAME_TOL);
        assert!(g.gram_residual() <= FRAME_TOL);
        assert!((g.frame_matrix()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        let bad = om(&[(&[1, 3], 1.0), (&[4, 2], 1.0)]);
        assert!(matches!(adapt_coframe_sol(&Matrix4::identity(), &bad, &sol), Err(LieError::NoAdaptedFrame(_))));
    }

    #[test]
    fn kt_standard_frame() {
        let omega = om(&[(&[1, 3], 1.0), (&[4, 2], 1.0)]);
        let f = adapt_coframe_kt(&Matrix4::identity(), &omega, &LieModel::nil3xr()).unwrap();
        assert_eq!(*f.frame_matrix(), Matrix4::identity());
        assert_eq!(f.constants(), &FrameConstants::Kt { base_matrix: [[0.0, 1.0], [1.0, 0.0]], k: 1.0 });
    }

    #[test]
    fn simple_frame_decomposes() {
        let omega = om(&[(&[1, 2], 2.0), (&[3, 4], 1.0), (&[1, 3], 0.5)]);
        let (f, mu) = simple_frame(&omega, &LieModel::sol3xr()).unwrap();
        assert!((mu - 2.0).abs() < 1e-15);
        assert!(f.reconstruction_residual() <= FRAME_TOL);
        let lag = om(&[(&[1, 4], 1.0), (&[2, 3], 1.0)]);
        assert!(matches!(simple_frame(&lag, &LieModel::sol3xr()), Err(LieError::FibresLagrangian)));
    }

    #[test]
    fn document_round_trip() {
        let omega = om(&[(&[1, 4], 1.0), (&[2, 3], 1.0)]);
        let f = adapt_coframe_nil(&Matrix4::identity(), &omega, &LieModel::nil4()).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let g: AKFrame = serde_json::from_str(&text).unwrap();
        assert_eq!(f, g);
    }
}
