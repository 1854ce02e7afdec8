//! Problem data, validation and the pointwise operator.

use serde::{Deserialize, Serialize};

use super::GmaError;
use crate::torus_field::{Derivatives, TorusField};

/// Tolerance on the algebraic coefficient conditions.
pub const CONDITION_TOL: f64 = 1e-12;

/// `det [[a + p_xx - l11 p_x - m11 p_y, c + p_xy - l12 p_x - m12 p_y],
///       [.,                           b + p_yy - l22 p_x - m22 p_y]] = e^F`
/// on the unit torus. `l` and `m` are symmetric; only `[0][0]`, `[0][1]`,
/// `[1][1]` are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmaProblem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default)]
    pub l: [[f64; 2]; 2],
    #[serde(default)]
    pub m: [[f64; 2]; 2],
    pub f: TorusField,
    #[serde(default)]
    pub renormalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub positive_definite: bool,
    pub conditions: Vec<ConditionCheck>,
    /// `∫(e^F - ab + c²)` after any renormalization.
    pub compatibility_integral: f64,
    pub compatibility_tol: f64,
    /// Constant added to `F` by renormalization (0 when off).
    pub shift: f64,
}

impl GmaProblem {
    /// Classical Monge–Ampère problem `det(S + Hess p) = e^F`.
    pub fn monge_ampere(s: [[f64; 2]; 2], f: TorusField) -> Self {
        GmaProblem { a: s[0][0], b: s[1][1], c: s[0][1], l: [[0.0; 2]; 2], m: [[0.0; 2]; 2], f, renormalize: false }
    }

    pub fn det_s(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    pub fn l11(&self) -> f64 {
        self.l[0][0]
    }
    pub fn l12(&self) -> f64 {
        self.l[0][1]
    }
    pub fn l22(&self) -> f64 {
        self.l[1][1]
    }
    pub fn m11(&self) -> f64 {
        self.m[0][0]
    }
    pub fn m12(&self) -> f64 {
        self.m[0][1]
    }
    pub fn m22(&self) -> f64 {
        self.m[1][1]
    }

    pub fn has_lower_order(&self) -> bool {
        self.l.iter().flatten().chain(self.m.iter().flatten()).any(|v| *v != 0.0)
    }

    /// The four degeneracy conditions on `(l, m)` with their values.
    pub fn coefficient_conditions(&self) -> Vec<ConditionCheck> {
        let (l11, l12, l22) = (self.l11(), self.l12(), self.l22());
        let (m11, m12, m22) = (self.m11(), self.m12(), self.m22());
        let mk = |name: &str, value: f64| ConditionCheck { name: name.into(), value, passed: value.abs() <= CONDITION_TOL };
        vec![
            mk("m11*l22 = 0", m11 * l22),
            mk("l11*l22 - l12^2 = 0", l11 * l22 - l12 * l12),
            mk("m11*m22 - m12^2 = 0", m11 * m22 - m12 * m12),
            mk("l11*m22 + l22*m11 - 2*l12*m12 = 0", l11 * m22 + l22 * m11 - 2.0 * l12 * m12),
        ]
    }

    /// `∫(e^F - ab + c²)` over the unit torus.
    pub fn compatibility_integral(&self) -> f64 {
        self.f.exp().integrate() - self.det_s()
    }

    /// Checks positivity, the coefficient conditions and compatibility,
    /// renormalizing `F` first when requested. Returns the problem that will
    /// actually be solved.
    pub fn validate(&self, compat_tol: f64) -> Result<(GmaProblem, ValidationReport), GmaError> {
        let positive = self.a > 0.0 && self.det_s() > 0.0 && self.a.is_finite() && self.det_s().is_finite();
        if !positive {
            return Err(GmaError::NotPositiveDefinite { a: self.a, det: self.det_s() });
        }
        if self.l[0][1] != self.l[1][0] || self.m[0][1] != self.m[1][0] {
            return Err(GmaError::Invalid("l and m must be symmetric".into()));
        }
        let conditions = self.coefficient_conditions();
        if let Some(bad) = conditions.iter().find(|c| !c.passed) {
            return Err(GmaError::CoefficientCondition { name: bad.name.clone(), value: bad.value });
        }
        if !self.f.is_finite() {
            return Err(GmaError::Invalid("F has non-finite values".into()));
        }
        let mut prepared = self.clone();
        let mut shift = 0.0;
        if self.renormalize {
            let (f, s) = self.f.normalize_rhs(self.det_s());
            prepared.f = f;
            shift = s;
            if s != 0.0 {
                log::info!("F shifted by {s:e} to satisfy the compatibility condition");
            }
        }
        let integral = prepared.compatibility_integral();
        if integral.abs() > compat_tol {
            return Err(GmaError::Compatibility { integral, tol: compat_tol });
        }
        let report = ValidationReport {
            positive_definite: true,
            conditions,
            compatibility_integral: integral,
            compatibility_tol: compat_tol,
            shift,
        };
        Ok((prepared, report))
    }
}

/// Entries of the matrix `M_t(p)` at every grid point.
#[derive(Debug, Clone)]
pub struct MatrixField {
    pub m11: TorusField,
    pub m12: TorusField,
    pub m22: TorusField,
}

impl MatrixField {
    pub fn det(&self) -> TorusField {
        let v: Vec<f64> = (0..self.m11.len())
            .map(|i| {
                let (a, b, c) = (self.m11.values()[i], self.m22.values()[i], self.m12.values()[i]);
                a * b - c * c
            })
            .collect();
        self.m11.with_values(v)
    }

    /// Smallest eigenvalue of the symmetric 2×2 matrix at each point.
    pub fn min_eigenvalue(&self) -> TorusField {
        let v: Vec<f64> = (0..self.m11.len())
            .map(|i| {
                let (a, b, c) = (self.m11.values()[i], self.m22.values()[i], self.m12.values()[i]);
                let h = 0.5 * (a + b);
                h - (0.25 * (a - b) * (a - b) + c * c).sqrt()
            })
            .collect();
        self.m11.with_values(v)
    }
}

impl GmaProblem {
    /// `M_t(p)` from precomputed derivatives of `p`; lower-order terms carry the factor `t`.
    pub fn matrix_field(&self, d: &Derivatives, t: f64) -> MatrixField {
        let n = d.d1.len();
        let mut m11 = Vec::with_capacity(n);
        let mut m12 = Vec::with_capacity(n);
        let mut m22 = Vec::with_capacity(n);
        for i in 0..n {
            let (px, py) = (d.d1.values()[i], d.d2.values()[i]);
            m11.push(self.a + d.d11.values()[i] - t * (self.l11() * px + self.m11() * py));
            m12.push(self.c + d.d12.values()[i] - t * (self.l12() * px + self.m12() * py));
            m22.push(self.b + d.d22.values()[i] - t * (self.l22() * px + self.m22() * py));
        }
        MatrixField { m11: d.d1.with_values(m11), m12: d.d1.with_values(m12), m22: d.d1.with_values(m22) }
    }

    /// Right side of the continuation path, `t e^F + (1-t)(ab - c²)`.
    pub fn rhs_t(&self, t: f64) -> TorusField {
        let det = self.det_s();
        self.f.map(|v| t * v.exp() + (1.0 - t) * det)
    }

    /// `det M_t(p) - t e^F - (1-t)(ab-c²)`.
    pub fn residual_t(&self, p: &TorusField, t: f64) -> TorusField {
        let d = p.derivatives();
        &self.matrix_field(&d, t).det() - &self.rhs_t(t)
    }

    /// Pointwise residual of the full equation, `det M_1(p) - e^F`.
    pub fn residual(&self, p: &TorusField) -> TorusField {
        self.residual_t(p, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_field::Scheme;
    use std::f64::consts::PI;

    fn flat(f: TorusField) -> GmaProblem {
        GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], f)
    }

    #[test]
    fn validation_examples() {
        let zero = TorusField::zeros(16, 16, Scheme::Spectral);
        assert!(flat(zero.clone()).validate(1e-10).is_ok());
        let mut bad = flat(zero.clone());
        bad.m[0][0] = 1.0;
        bad.l[1][1] = 1.0;
        match bad.validate(1e-10) {
            Err(GmaError::CoefficientCondition { name, .. }) => assert_eq!(name, "m11*l22 = 0"),
            other => panic!("unexpected {other:?}"),
        }
        let half = flat(TorusField::constant(16, 16, Scheme::Spectral, 0.5));
        assert!(matches!(half.validate(1e-10), Err(GmaError::Compatibility { .. })));
        let mut renorm = half.clone();
        renorm.renormalize = true;
        let (p, rep) = renorm.validate(1e-10).unwrap();
        assert!(p.compatibility_integral().abs() <= 1e-12);
        assert!((rep.shift + 0.5).abs() < 1e-15);
        let mut neg = flat(zero);
        neg.a = -1.0;
        assert!(matches!(neg.validate(1e-10), Err(GmaError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn residual_examples() {
        let zero = TorusField::zeros(16, 16, Scheme::Spectral);
        assert_eq!(flat(zero.clone()).residual(&zero).max_abs(), 0.0);
        let mut p2 = flat(zero.clone());
        p2.a = 2.0;
        let r = p2.residual(&zero);
        assert!(r.values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let pstar = TorusField::from_fn(32, 32, Scheme::Spectral, |x, y| 0.01 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let f = flat(TorusField::zeros(32, 32, Scheme::Spectral)).residual_t(&pstar, 1.0).add_scalar(1.0).map(f64::ln);
        assert!(flat(f).residual(&pstar).max_abs() <= 1e-12);
    }
}
