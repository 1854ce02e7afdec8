//! JSON instance, GMA problem and convergence study descriptions.

use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::expr::{Expr, Var};
use super::CliError;
use crate::cy_pipeline::{Geometry, PipelineOptions};
use crate::gma_solver::{GmaProblem, SolveOptions};
use crate::lie_frame::model::PAIRS;
use crate::lie_frame::{adapt_coframe_kt, adapt_coframe_nil, adapt_coframe_sol, simple_frame, AKFrame, Form, LieModel, ModelTag};
use crate::torus_field::io::load_csv;
use crate::torus_field::{Scheme, TorusField};

pub const DEFAULT_GRID: usize = 64;

/// `F` given either as an expression in `x, y` or as a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Expression(String),
    Csv { csv: PathBuf },
}

impl FieldSpec {
    /// Samples or loads the field. Relative CSV paths are taken from `dir`.
    pub fn load(&self, grid: Option<usize>, scheme: Scheme, dir: &Path) -> Result<TorusField, CliError> {
        match self {
            FieldSpec::Expression(src) => {
                let e = Expr::parse(src).map_err(|e| CliError::Validation(format!("F: {e}")))?;
                let n = grid.unwrap_or(DEFAULT_GRID);
                crate::torus_field::check_grid(n).map_err(|e| CliError::Validation(e.to_string()))?;
                Ok(e.sample(n, n, scheme))
            }
            FieldSpec::Csv { csv } => {
                let path = if csv.is_absolute() { csv.clone() } else { dir.join(csv) };
                let f = load_csv(&path, scheme)
                    .map_err(|e| CliError::Validation(format!("F from {}: {e}", path.display())))?;
                if let Some(n) = grid {
                    if f.n1() != n || f.n2() != n {
                        return Err(CliError::Validation(format!(
                            "F in {} is {}x{}, but grid {n} was requested",
                            path.display(),
                            f.n1(),
                            f.n2()
                        )));
                    }
                }
                Ok(f)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FieldSpec::Expression(s) => s.clone(),
            FieldSpec::Csv { csv } => csv.display().to_string(),
        }
    }
}

/// `"identity"`, 16 row-major entries, or four rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Flat(Vec<f64>),
    Rows([[f64; 4]; 4]),
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Named("identity".into())
    }
}

impl MetricSpec {
    pub fn matrix(&self) -> Result<Matrix4<f64>, CliError> {
        match self {
            MetricSpec::Named(n) if n == "identity" => Ok(Matrix4::identity()),
            MetricSpec::Named(n) => Err(CliError::Validation(format!("unknown metric `{n}` (use \"identity\" or 16 entries)"))),
            MetricSpec::Flat(v) if v.len() == 16 => Ok(Matrix4::from_row_slice(v)),
            MetricSpec::Flat(v) => Err(CliError::Validation(format!("metric needs 16 entries, got {}", v.len()))),
            MetricSpec::Rows(r) => Ok(Matrix4::from_fn(|i, j| r[i][j])),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix().map(|m| m == Matrix4::identity()).unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub geometry: Geometry,
    /// Must agree with the geometry when given.
    #[serde(default)]
    pub model: Option<ModelTag>,
    #[serde(default)]
    pub metric: MetricSpec,
    /// Coefficients on `e^{12}, e^{13}, e^{14}, e^{23}, e^{24}, e^{34}`.
    #[serde(default)]
    pub omega: Option<[f64; 6]>,
    #[serde(rename = "F")]
    pub f: FieldSpec,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub options: PipelineOptions,
}

pub fn model_of(geometry: Geometry) -> ModelTag {
    match geometry {
        Geometry::KtXy | Geometry::Nil3Yt => ModelTag::Nil3xR,
        Geometry::Nil4Zt => ModelTag::Nil4,
        Geometry::SolSimple | Geometry::SolFoliation => ModelTag::Sol3xR,
    }
}

/// Symplectic form used when the instance does not give one.
pub fn default_omega(geometry: Geometry) -> [f64; 6] {
    match geometry {
        Geometry::KtXy => [0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
        Geometry::Nil4Zt | Geometry::Nil3Yt => [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        Geometry::SolSimple | Geometry::SolFoliation => [1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    }
}

pub fn omega_form(c: &[f64; 6]) -> Form {
    let mut out = Form::zero(2);
    for (v, (i, j)) in c.iter().zip(PAIRS) {
        if *v != 0.0 {
            out = out.add(&Form::monomial(&[i, j]).scale(*v));
        }
    }
    out
}

impl InstanceConfig {
    pub fn new(geometry: Geometry, f: FieldSpec) -> Self {
        InstanceConfig {
            geometry,
            model: None,
            metric: MetricSpec::default(),
            omega: None,
            f,
            grid: None,
            scheme: Scheme::Spectral,
            options: PipelineOptions::default(),
        }
    }

    pub fn frame(&self) -> Result<AKFrame, CliError> {
        let tag = model_of(self.geometry);
        if let Some(m) = self.model {
            if m != tag {
                return Err(CliError::Validation(format!("geometry {} lives on {tag}, not {m}", self.geometry)));
            }
        }
        let model = LieModel::new(tag);
        let g = self.metric.matrix()?;
        let omega = omega_form(&self.omega.unwrap_or_else(|| default_omega(self.geometry)));
        let frame = match self.geometry {
            Geometry::KtXy => adapt_coframe_kt(&g, &omega, &model),
            Geometry::Nil4Zt | Geometry::Nil3Yt => adapt_coframe_nil(&g, &omega, &model),
            Geometry::SolFoliation => adapt_coframe_sol(&g, &omega, &model),
            Geometry::SolSimple => {
                if !self.metric.is_identity() {
                    log::warn!("sol-simple builds its own frame from Ω; the metric is ignored");
                }
                simple_frame(&omega, &model).map(|(f, _)| f)
            }
        };
        frame.map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// `det [[a, c], [c, b]] + Hess p - l p_x - m p_y = e^F` with `F` given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmaConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub l: [[f64; 2]; 2],
    #[serde(default)]
    pub m: [[f64; 2]; 2],
    #[serde(rename = "F")]
    pub f: FieldSpec,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default)]
    pub options: SolveOptions,
}

impl GmaConfig {
    pub fn problem(&self, f: TorusField) -> GmaProblem {
        GmaProblem { a: self.a, b: self.b, c: self.c, l: self.l, m: self.m, f, renormalize: self.renormalize }
    }
}

fn identity2() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

fn default_grids() -> Vec<usize> {
    vec![32, 64, 128]
}

/// Manufactured-solution study: `F` is computed from the exact potential `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "identity2")]
    pub s: [[f64; 2]; 2],
    #[serde(default)]
    pub l: [[f64; 2]; 2],
    #[serde(default)]
    pub m: [[f64; 2]; 2],
    pub p: String,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    #[serde(default)]
    pub options: SolveOptions,
}

impl ConvergenceConfig {
    /// The problem at grid `n` and the exact potential sampled on it.
    pub fn problem(&self, n: usize) -> Result<(GmaProblem, TorusField), CliError> {
        crate::torus_field::check_grid(n).map_err(|e| CliError::Validation(e.to_string()))?;
        let p = Expr::parse(&self.p).map_err(|e| CliError::Validation(format!("p: {e}")))?;
        let (px, py) = (p.diff(Var::X), p.diff(Var::Y));
        let (pxx, pxy, pyy) = (px.diff(Var::X), px.diff(Var::Y), py.diff(Var::Y));
        let (s, l, m) = (self.s, self.l, self.m);
        let bad = std::cell::Cell::new(None);
        let f = TorusField::from_fn(n, n, self.scheme, |x, y| {
            let (gx, gy) = (px.eval(x, y), py.eval(x, y));
            let m11 = s[0][0] + pxx.eval(x, y) - l[0][0] * gx - m[0][0] * gy;
            let m12 = s[0][1] + pxy.eval(x, y) - l[0][1] * gx - m[0][1] * gy;
            let m22 = s[1][1] + pyy.eval(x, y) - l[1][1] * gx - m[1][1] * gy;
            let det = m11 * m22 - m12 * m12;
            if !(det > 0.0 && m11 > 0.0) && bad.get().is_none() {
                bad.set(Some((x, y)));
            }
            det.ln()
        });
        if let Some((x, y)) = bad.get() {
            return Err(CliError::Validation(format!(
                "manufactured p is not admissible: the matrix is not positive definite at ({x}, {y})"
            )));
        }
        let problem = GmaProblem { a: s[0][0], b: s[1][1], c: s[0][1], l, m, f, renormalize: false };
        Ok((problem, p.sample(n, n, self.scheme)))
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
