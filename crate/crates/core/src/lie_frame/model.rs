//! The three four-dimensional Lie algebra models and their coordinate coframes.

use serde::{Deserialize, Serialize};

use super::form::{mask_of, Form};
use super::LieError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "nil3xr")]
    Nil3xR,
    #[serde(rename = "nil4")]
    Nil4,
    #[serde(rename = "sol3xr")]
    Sol3xR,
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelTag::Nil3xR => "nil3xr",
            ModelTag::Nil4 => "nil4",
            ModelTag::Sol3xR => "sol3xr",
        })
    }
}

impl std::str::FromStr for ModelTag {
    type Err = LieError;
    fn from_str(s: &str) -> Result<Self, LieError> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "nil3xr" | "nil3r" | "kt" => Ok(ModelTag::Nil3xR),
            "nil4" => Ok(ModelTag::Nil4),
            "sol3xr" | "sol3r" | "sol" => Ok(ModelTag::Sol3xR),
            _ => Err(LieError::Parse(format!("unknown model `{s}`"))),
        }
    }
}

/// Two-dimensional base of a torus fibration, named by its coordinates.
/// Axis 1 of a field on the base is the first named coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fibration {
    Xy,
    Yt,
    Zt,
}

impl Fibration {
    pub fn coordinates(self) -> [char; 2] {
        match self {
            Fibration::Xy => ['x', 'y'],
            Fibration::Yt => ['y', 't'],
            Fibration::Zt => ['z', 't'],
        }
    }
}

/// Index order of the six basis 2-forms `e^{ij}`, `i < j`.
pub const PAIRS: [(usize, usize); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieModel {
    pub tag: ModelTag,
    /// Scaling of `de^2` in the Nil4 model; 1 is the standard algebra and 0
    /// degenerates to the Nil3 x R structure equations.
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

impl LieModel {
    pub fn new(tag: ModelTag) -> Self {
        LieModel { tag, lambda: 1.0 }
    }
    pub fn nil3xr() -> Self {
        Self::new(ModelTag::Nil3xR)
    }
    pub fn nil4() -> Self {
        Self::new(ModelTag::Nil4)
    }
    pub fn nil4_scaled(lambda: f64) -> Self {
        LieModel { tag: ModelTag::Nil4, lambda }
    }
    pub fn sol3xr() -> Self {
        Self::new(ModelTag::Sol3xR)
    }

    /// `d e^i` over the basis [`PAIRS`], for `i` in `1..=4`.
    pub fn d_matrix(&self) -> [[f64; 6]; 4] {
        let mut d = [[0.0; 6]; 4];
        match self.tag {
            ModelTag::Nil3xR => d[3][0] = 1.0,
            ModelTag::Nil4 => {
                d[1][1] = self.lambda;
                d[3][0] = 1.0;
            }
            ModelTag::Sol3xR => {
                d[2][1] = 1.0;
                d[3][2] = -1.0;
            }
        }
        d
    }

    /// Structure equations in the compact notation, e.g. `(0,13,0,12)`.
    pub fn structure_string(&self) -> String {
        let d = self.d_matrix();
        let parts: Vec<String> = d
            .iter()
            .map(|row| {
                let mut s = String::new();
                for (c, &(i, j)) in row.iter().zip(PAIRS.iter()) {
                    if *c == 0.0 {
                        continue;
                    }
                    let (a, b) = if *c < 0.0 { (j, i) } else { (i, j) };
                    if !s.is_empty() {
                        s.push('+');
                    }
                    if c.abs() != 1.0 {
                        s.push_str(&format!("{}*", c.abs()));
                    }
                    s.push_str(&format!("{a}{b}"));
                }
                if s.is_empty() {
                    "0".into()
                } else {
                    s
                }
            })
            .collect();
        format!("({})", parts.join(","))
    }

    /// `d e^i` as a constant 2-form.
    pub fn de(&self, i: usize) -> Form {
        let row = self.d_matrix()[i - 1];
        let mut f = Form::zero(2);
        for (c, &(a, b)) in row.iter().zip(PAIRS.iter()) {
            if *c != 0.0 {
                f.add_const(mask_of(&[a, b]), *c);
            }
        }
        f
    }

    /// The coframe `e^i` written in the coordinates `(x, y, z, t)`.
    pub fn coframe_realization(&self) -> [String; 4] {
        let l = self.lambda;
        match self.tag {
            ModelTag::Nil3xR => ["dy".into(), "dx".into(), "dt".into(), "dz - x dy".into()],
            ModelTag::Nil4 => {
                if l == 1.0 {
                    ["-dt".into(), "dy - t dz".into(), "dz".into(), "dx - t dy + 1/2 t^2 dz".into()]
                } else {
                    [
                        "-dt".into(),
                        format!("dy - {l} t dz"),
                        "dz".into(),
                        format!("dx - t dy + {} t^2 dz", 0.5 * l),
                    ]
                }
            }
            ModelTag::Sol3xR => ["dt".into(), "dz".into(), "e^t dx".into(), "e^-t dy".into()],
        }
    }

    pub fn allows(&self, base: Fibration) -> bool {
        matches!(
            (self.tag, base),
            (ModelTag::Nil3xR, Fibration::Xy)
                | (ModelTag::Nil3xR, Fibration::Yt)
                | (ModelTag::Nil4, Fibration::Zt)
                | (ModelTag::Sol3xR, Fibration::Zt)
        )
    }

    /// Differentials of the two base coordinates as covectors in the `e`-basis.
    pub fn base_differentials(&self, base: Fibration) -> Result<[[f64; 4]; 2], LieError> {
        let e = |i: usize, s: f64| {
            let mut v = [0.0; 4];
            v[i - 1] = s;
            v
        };
        match (self.tag, base) {
            (ModelTag::Nil3xR, Fibration::Xy) => Ok([e(2, 1.0), e(1, 1.0)]),
            (ModelTag::Nil3xR, Fibration::Yt) => Ok([e(1, 1.0), e(3, 1.0)]),
            (ModelTag::Nil4, Fibration::Zt) => Ok([e(3, 1.0), e(1, -1.0)]),
            (ModelTag::Sol3xR, Fibration::Zt) => Ok([e(2, 1.0), e(1, 1.0)]),
            _ => Err(LieError::InvarianceViolation { model: self.tag, base }),
        }
    }

    /// Closed invariant 2-forms used for cohomology pairings. For the nilpotent
    /// models this is the whole kernel of `d` (spanned by monomials); on Sol³×R
    /// the closed `e^{13} = de^3` and `e^{14} = -de^4` are exact and only the
    /// representatives `e^{12}`, `e^{34}` of `H²` are kept.
    pub fn closed_2forms(&self) -> Vec<Form> {
        PAIRS
            .iter()
            .filter(|&&p| self.tag != ModelTag::Sol3xR || p == (1, 2) || p == (3, 4))
            .map(|&(i, j)| Form::monomial(&[i, j]))
            .filter(|f| self.d_const(f).is_zero(0.0))
            .collect()
    }

    /// Exterior derivative of a constant-coefficient form.
    pub(crate) fn d_const(&self, f: &Form) -> Form {
        f.d_constant_part(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_strings() {
        assert_eq!(LieModel::nil3xr().structure_string(), "(0,0,0,12)");
        assert_eq!(LieModel::nil4().structure_string(), "(0,13,0,12)");
        assert_eq!(LieModel::sol3xr().structure_string(), "(0,0,13,41)");
        assert_eq!(LieModel::nil4_scaled(0.0).d_matrix(), LieModel::nil3xr().d_matrix());
    }

    #[test]
    fn closed_forms_per_model() {
        let names = |m: LieModel| m.closed_2forms().iter().map(|f| f.to_string()).collect::<Vec<_>>();
        assert_eq!(names(LieModel::nil3xr()), ["e12", "e13", "e14", "e23", "e24"]);
        assert_eq!(names(LieModel::nil4()), ["e12", "e13", "e14", "e23"]);
        assert_eq!(names(LieModel::sol3xr()), ["e12", "e34"]);
    }

    #[test]
    fn invariance_guard() {
        assert!(LieModel::nil4().base_differentials(Fibration::Xy).is_err());
        assert!(LieModel::sol3xr().base_differentials(Fibration::Yt).is_err());
        assert!(LieModel::nil3xr().base_differentials(Fibration::Yt).is_ok());
    }
}
