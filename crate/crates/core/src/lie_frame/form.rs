//! Invariant differential forms with constant or base-function coefficients.
//!
//! A monomial `e^{i1..ik}` is stored as a bit mask with bit `i-1` set for each
//! index. Coefficients are constants or [`TorusField`]s on a declared base.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Matrix4;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{Fibration, LieModel};
use super::LieError;
use crate::torus_field::{Axis, TorusField};

pub type Mask = u8;

pub const TOP: Mask = 0b1111;

pub fn mask_of(indices: &[usize]) -> Mask {
    indices.iter().fold(0, |m, &i| {
        assert!((1..=4).contains(&i), "index {i} out of range");
        m | 1 << (i - 1)
    })
}

pub fn indices_of(mask: Mask) -> Vec<usize> {
    (1..=4).filter(|i| mask & (1 << (i - 1)) != 0).collect()
}

pub fn mask_name(mask: Mask) -> String {
    indices_of(mask).iter().map(|i| i.to_string()).collect()
}

/// Sign of `e^a ∧ e^b` relative to the sorted monomial, or 0 on overlap.
pub fn wedge_sign(a: Mask, b: Mask) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inversions = 0;
    for i in indices_of(a) {
        inversions += indices_of(b).iter().filter(|&&j| j < i).count();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coeff {
    Const(f64),
    Field(TorusField),
}

impl Coeff {
    pub fn is_const(&self) -> bool {
        matches!(self, Coeff::Const(_))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Coeff::Const(c) => Some(*c),
            Coeff::Field(_) => None,
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Coeff::Const(c) => c.abs(),
            Coeff::Field(f) => f.max_abs(),
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Const(a), Coeff::Const(b)) => Coeff::Const(a + b),
            (Coeff::Const(a), Coeff::Field(f)) | (Coeff::Field(f), Coeff::Const(a)) => Coeff::Field(f.add_scalar(*a)),
            (Coeff::Field(f), Coeff::Field(g)) => Coeff::Field(f + g),
        }
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Const(a), Coeff::Const(b)) => Coeff::Const(a * b),
            (Coeff::Const(a), Coeff::Field(f)) | (Coeff::Field(f), Coeff::Const(a)) => Coeff::Field(f.scale(*a)),
            (Coeff::Field(f), Coeff::Field(g)) => Coeff::Field(f * g),
        }
    }

    pub fn scale(&self, s: f64) -> Coeff {
        match self {
            Coeff::Const(c) => Coeff::Const(c * s),
            Coeff::Field(f) => Coeff::Field(f.scale(s)),
        }
    }

    /// Pointwise values on the grid of `like`.
    pub fn to_field(&self, like: &TorusField) -> TorusField {
        match self {
            Coeff::Const(c) => TorusField::constant(like.n1(), like.n2(), like.scheme(), *c),
            Coeff::Field(f) => f.clone(),
        }
    }

    pub fn value_at(&self, idx: usize) -> f64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Field(f) => f.values()[idx],
        }
    }

    fn grid(&self) -> Option<(usize, usize)> {
        match self {
            Coeff::Const(_) => None,
            Coeff::Field(f) => Some((f.n1(), f.n2())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    degree: usize,
    base: Option<Fibration>,
    terms: BTreeMap<Mask, Coeff>,
}

fn merge_base(a: Option<Fibration>, b: Option<Fibration>) -> Option<Fibration> {
    match (a, b) {
        (Some(x), Some(y)) => {
            assert_eq!(x, y, "forms live on different bases");
            Some(x)
        }
        (x, None) => x,
        (None, y) => y,
    }
}

impl Form {
    pub fn zero(degree: usize) -> Self {
        assert!(degree <= 4);
        Form { degree, base: None, terms: BTreeMap::new() }
    }

    pub fn scalar(c: f64) -> Self {
        let mut f = Form::zero(0);
        f.add_const(0, c);
        f
    }

    /// A function on the given base, as a 0-form.
    pub fn function(field: TorusField, base: Fibration) -> Self {
        let mut f = Form::zero(0);
        f.base = Some(base);
        f.terms.insert(0, Coeff::Field(field));
        f
    }

    /// `e^{i1} ∧ ... ∧ e^{ik}` for any order of distinct indices (sign included).
    pub fn monomial(indices: &[usize]) -> Self {
        let mut f = Form::zero(indices.len());
        let mut sign = 1.0;
        let mut acc: Mask = 0;
        for &i in indices {
            let m = mask_of(&[i]);
            sign *= wedge_sign(acc, m);
            acc |= m;
        }
        if sign != 0.0 && acc.count_ones() as usize == indices.len() {
            f.add_const(acc, sign);
        }
        f
    }

    /// The 1-form with coefficients `v[i-1]` on `e^i`.
    pub fn covector(v: &[f64; 4]) -> Self {
        let mut f = Form::zero(1);
        for (i, c) in v.iter().enumerate() {
            f.add_const(1 << i, *c);
        }
        f
    }

    /// The 1-form `Σ c_i e^i` with coefficient fields.
    pub fn one_form(coeffs: [Coeff; 4], base: Option<Fibration>) -> Self {
        let mut f = Form::zero(1);
        f.base = base;
        for (i, c) in coeffs.into_iter().enumerate() {
            f.add_term(1 << i, c);
        }
        f
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn base(&self) -> Option<Fibration> {
        self.base
    }
    pub fn with_base(mut self, base: Fibration) -> Self {
        self.base = Some(base);
        self
    }
    pub fn terms(&self) -> impl Iterator<Item = (Mask, &Coeff)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.values().all(Coeff::is_const)
    }

    pub fn get(&self, mask: Mask) -> Coeff {
        self.terms.get(&mask).cloned().unwrap_or(Coeff::Const(0.0))
    }

    pub fn coeff(&self, indices: &[usize]) -> Coeff {
        self.get(mask_of(indices))
    }

    /// Coefficient of `e^{1234}` of a 4-form.
    pub fn top(&self) -> Coeff {
        assert_eq!(self.degree, 4, "top coefficient needs a 4-form");
        self.get(TOP)
    }

    pub fn add_const(&mut self, mask: Mask, c: f64) {
        self.add_term(mask, Coeff::Const(c));
    }

    pub fn add_term(&mut self, mask: Mask, c: Coeff) {
        assert_eq!(mask.count_ones() as usize, self.degree, "degree mismatch");
        if let Coeff::Const(v) = c {
            if v == 0.0 && !self.terms.contains_key(&mask) {
                return;
            }
        }
        if let (Some(g), Some((n1, n2))) = (self.grid(), c.grid()) {
            assert_eq!(g, (n1, n2), "coefficient grids differ");
        }
        let new = match self.terms.get(&mask) {
            Some(old) => old.add(&c),
            None => c,
        };
        if new == Coeff::Const(0.0) {
            self.terms.remove(&mask);
        } else {
            self.terms.insert(mask, new);
        }
    }

    fn grid(&self) -> Option<(usize, usize)> {
        self.terms.values().find_map(Coeff::grid)
    }

    pub fn add(&self, other: &Form) -> Form {
        assert_eq!(self.degree, other.degree, "adding forms of different degree");
        let mut out = self.clone();
        out.base = merge_base(self.base, other.base);
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Form {
        self.map_coeffs(|c| c.scale(s))
    }

    /// Multiplies every coefficient by a function on `base`.
    pub fn mul_field(&self, field: &TorusField, base: Fibration) -> Form {
        let mut out = self.map_coeffs(|c| c.mul(&Coeff::Field(field.clone())));
        out.base = merge_base(self.base, Some(base));
        out
    }

    fn map_coeffs(&self, f: impl Fn(&Coeff) -> Coeff) -> Form {
        Form { degree: self.degree, base: self.base, terms: self.terms.iter().map(|(m, c)| (*m, f(c))).collect() }
    }

    pub fn wedge(&self, other: &Form) -> Form {
        assert!(self.degree + other.degree <= 4, "wedge degree exceeds 4");
        let mut out = Form::zero(self.degree + other.degree);
        out.base = merge_base(self.base, other.base);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let s = wedge_sign(*ma, *mb);
                if s != 0.0 {
                    out.add_term(ma | mb, ca.mul(cb).scale(s));
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    /// Exterior derivative of `e^I` from the structure constants.
    fn d_monomial(model: &LieModel, mask: Mask) -> Form {
        let idx = indices_of(mask);
        let mut out = Form::zero(idx.len() + 1);
        for (r, &i) in idx.iter().enumerate() {
            let before = Form::monomial(&idx[..r]);
            let after = Form::monomial(&idx[r + 1..]);
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            out = out.add(&before.wedge(&model.de(i)).wedge(&after).scale(sign));
        }
        out
    }

    pub(crate) fn d_constant_part(&self, model: &LieModel) -> Form {
        let mut out = Form::zero(self.degree + 1);
        out.base = self.base;
        for (m, c) in &self.terms {
            let dm = Form::d_monomial(model, *m);
            for (mm, cc) in &dm.terms {
                out.add_term(*mm, cc.mul(c));
            }
        }
        out
    }

    /// Exterior derivative on `model`. Function coefficients are
    /// differentiated along the base coordinates of the form's fibration.
    pub fn d(&self, model: &LieModel) -> Result<Form, LieError> {
        if self.degree >= 4 {
            return Ok(Form::zero(4).with_base_opt(self.base));
        }
        let mut out = self.d_constant_part(model);
        if self.is_constant() {
            return Ok(out);
        }
        let base = self.base.ok_or(LieError::MissingBase)?;
        let dif = model.base_differentials(base)?;
        for (m, c) in &self.terms {
            if let Coeff::Field(f) = c {
                let d1 = f.derivative(Axis::One, 1);
                let d2 = f.derivative(Axis::Two, 1);
                let df = Form::covector(&dif[0])
                    .mul_field(&d1, base)
                    .add(&Form::covector(&dif[1]).mul_field(&d2, base));
                out = out.add(&df.wedge(&Form::monomial(&indices_of(*m))));
            }
        }
        Ok(out)
    }

    fn with_base_opt(mut self, base: Option<Fibration>) -> Self {
        self.base = base;
        self
    }

    /// Substitutes `e^i = Σ_j m[(i,j)] g^j`, returning coefficients in the `g`-basis.
    /// With `m` the inverse of a frame matrix this expresses a form in that frame;
    /// with the frame matrix itself it maps frame coefficients back to `e`.
    pub fn substitute(&self, m: &Matrix4<f64>) -> Form {
        let rows: Vec<Form> = (0..4).map(|i| Form::covector(&[m[(i, 0)], m[(i, 1)], m[(i, 2)], m[(i, 3)]])).collect();
        let mut out = Form::zero(self.degree);
        out.base = self.base;
        for (mask, c) in &self.terms {
            let mut prod = Form::scalar(1.0);
            for i in indices_of(*mask) {
                prod = prod.wedge(&rows[i - 1]);
            }
            for (mm, cc) in &prod.terms {
                out.add_term(*mm, c.mul(cc));
            }
        }
        out
    }

    /// Antisymmetric matrix `W_ij = ω(e_i, e_j)` of a constant 2-form.
    pub fn to_matrix(&self) -> Option<Matrix4<f64>> {
        if self.degree != 2 || !self.is_constant() {
            return None;
        }
        let mut w = Matrix4::zeros();
        for (m, c) in &self.terms {
            let idx = indices_of(*m);
            let v = c.as_const().unwrap_or(0.0);
            w[(idx[0] - 1, idx[1] - 1)] = v;
            w[(idx[1] - 1, idx[0] - 1)] = -v;
        }
        Some(w)
    }

    pub fn from_matrix(w: &Matrix4<f64>) -> Form {
        let mut f = Form::zero(2);
        for i in 0..4 {
            for j in i + 1..4 {
                f.add_const(mask_of(&[i + 1, j + 1]), w[(i, j)]);
            }
        }
        f
    }

    /// Matrix of the 2-form at one grid point (constants broadcast).
    pub fn matrix_at(&self, idx: usize) -> Matrix4<f64> {
        assert_eq!(self.degree, 2);
        let mut w = Matrix4::zeros();
        for (m, c) in &self.terms {
            let ij = indices_of(*m);
            let v = c.value_at(idx);
            w[(ij[0] - 1, ij[1] - 1)] = v;
            w[(ij[1] - 1, ij[0] - 1)] = -v;
        }
        w
    }

    /// Number of grid points of the coefficient fields (1 when constant).
    pub fn grid_len(&self) -> usize {
        self.grid().map(|(a, b)| a * b).unwrap_or(1)
    }

    /// Some coefficient field, for broadcasting constants.
    pub fn sample_field(&self) -> Option<&TorusField> {
        self.terms.values().find_map(|c| match c {
            Coeff::Field(f) => Some(f),
            Coeff::Const(_) => None,
        })
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let name = if *m == 0 { String::new() } else { format!("e{}", mask_name(*m)) };
            match c {
                Coeff::Const(v) if *v == 1.0 && *m != 0 => write!(f, "{name}")?,
                Coeff::Const(v) if *m == 0 => write!(f, "{v}")?,
                Coeff::Const(v) => write!(f, "{v}*{name}")?,
                Coeff::Field(_) if *m == 0 => f.write_str("<field>")?,
                Coeff::Field(_) => write!(f, "<field>*{name}")?,
            }
        }
        Ok(())
    }
}

/// Complex-valued form stored as real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexForm {
    pub re: Form,
    pub im: Form,
}

impl ComplexForm {
    pub fn new(re: Form, im: Form) -> Self {
        assert_eq!(re.degree(), im.degree());
        ComplexForm { re, im }
    }

    pub fn degree(&self) -> usize {
        self.re.degree()
    }

    pub fn conj(&self) -> ComplexForm {
        ComplexForm { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    pub fn add(&self, o: &ComplexForm) -> ComplexForm {
        ComplexForm { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &ComplexForm) -> ComplexForm {
        ComplexForm { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn scale(&self, z: Complex64) -> ComplexForm {
        ComplexForm {
            re: self.re.scale(z.re).sub(&self.im.scale(z.im)),
            im: self.re.scale(z.im).add(&self.im.scale(z.re)),
        }
    }

    /// Multiplies by the complex function `u + i v` on `base`.
    pub fn mul_fields(&self, u: &TorusField, v: &TorusField, base: Fibration) -> ComplexForm {
        ComplexForm {
            re: self.re.mul_field(u, base).sub(&self.im.mul_field(v, base)),
            im: self.re.mul_field(v, base).add(&self.im.mul_field(u, base)),
        }
    }

    pub fn wedge(&self, o: &ComplexForm) -> ComplexForm {
        ComplexForm {
            re: self.re.wedge(&o.re).sub(&self.im.wedge(&o.im)),
            im: self.re.wedge(&o.im).add(&self.im.wedge(&o.re)),
        }
    }

    pub fn d(&self, model: &LieModel) -> Result<ComplexForm, LieError> {
        Ok(ComplexForm { re: self.re.d(model)?, im: self.im.d(model)? })
    }

    pub fn substitute(&self, m: &Matrix4<f64>) -> ComplexForm {
        ComplexForm { re: self.re.substitute(m), im: self.im.substitute(m) }
    }

    pub fn max_abs(&self) -> f64 {
        self.re.max_abs().max(self.im.max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_field::Scheme;
    use std::f64::consts::PI;

    fn e(i: &[usize]) -> Form {
        Form::monomial(i)
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(e(&[1]).wedge(&e(&[2])), e(&[1, 2]));
        assert!(e(&[1, 2]).wedge(&e(&[1, 2])).is_zero(0.0));
        let w = e(&[1, 4]).add(&e(&[2, 3]));
        let sq = w.wedge(&w);
        assert_eq!(sq.top(), Coeff::Const(2.0));
        assert_eq!(e(&[2, 1]), e(&[1, 2]).scale(-1.0));
    }

    #[test]
    fn d_examples() {
        let nil4 = LieModel::nil4();
        assert_eq!(e(&[2]).d(&nil4).unwrap(), e(&[1, 3]));
        let sol = LieModel::sol3xr();
        assert!(e(&[3, 4]).d(&sol).unwrap().is_zero(0.0));
        for m in [LieModel::nil3xr(), LieModel::nil4(), LieModel::sol3xr()] {
            for i in 1..=4 {
                assert!(e(&[i]).d(&m).unwrap().d(&m).unwrap().is_zero(0.0));
            }
        }
    }

    #[test]
    fn function_coefficients_use_base_differentials() {
        let n = 32;
        let f = TorusField::from_fn(n, n, Scheme::Spectral, |z, _| (2.0 * PI * z).sin());
        let nil4 = LieModel::nil4();
        let form = Form::function(f.clone(), Fibration::Zt);
        let df = form.d(&nil4).unwrap();
        // dz = e^3 on the Nil4 model.
        let expected = f.derivative(Axis::One, 1);
        assert!((&df.coeff(&[3]).to_field(&f) - &expected).max_abs() < 1e-12);
        assert!(df.coeff(&[1]).max_abs() < 1e-12);
        let bad = Form::function(f, Fibration::Xy);
        assert!(matches!(bad.d(&nil4), Err(LieError::InvarianceViolation { .. })));
    }

    #[test]
    fn substitution_round_trip() {
        let m = Matrix4::new(1.0, 2.0, 0.0, 0.5, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.0, 0.0, 1.0);
        let inv = m.try_inverse().unwrap();
        let w = e(&[1, 4]).add(&e(&[2, 3]).scale(2.0)).add(&e(&[3, 4]).scale(-0.5));
        let back = w.substitute(&m).substitute(&inv);
        assert!(back.sub(&w).is_zero(1e-12));
        let wm = w.to_matrix().unwrap();
        assert!((w.substitute(&m).to_matrix().unwrap() - m.transpose() * wm * m).abs().max() < 1e-12);
    }

    #[test]
    fn complex_wedge() {
        let z1 = ComplexForm::new(e(&[1]), e(&[2]));
        let z2 = ComplexForm::new(e(&[3]), e(&[4]));
        let th = z1.wedge(&z2);
        assert_eq!(th.re, e(&[1, 3]).add(&e(&[4, 2])));
        assert_eq!(th.im, e(&[1, 4]).add(&e(&[2, 3])));
        assert!(th.wedge(&th).max_abs() < 1e-15);
        assert_eq!(th.wedge(&th.conj()).re.top(), Coeff::Const(4.0));
    }
}
