//! On-disk layout of a run: JSON documents plus one CSV per field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::cy_pipeline::{CySolution, Geometry};
use crate::gma_solver::{GmaSolution, GradientBoundReport, TraceEntry};
use crate::lie_frame::form::{indices_of, mask_name, mask_of};
use crate::lie_frame::{Coeff, ComplexForm, Fibration, Form};
use crate::torus_field::io::{load_csv, save_csv, save_with_meta};
use crate::torus_field::{Scheme, TorusField};
use crate::verifier::Report;

pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTICS: &str = "diagnostics.json";
pub const FRAME: &str = "frame.json";
pub const PROBLEM: &str = "problem.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Instance,
    Gma,
}

/// Everything needed to rerun or re-verify a solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: RunMode,
    #[serde(default)]
    pub geometry: Option<Geometry>,
    pub grid: [usize; 2],
    pub scheme: Scheme,
    /// Expression or file the input `F` came from.
    pub f_source: String,
    /// Constant added to the input `F` before solving.
    pub f_shift: f64,
    pub seed: Option<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Resolved configuration including all solver options.
    pub config: serde_json::Value,
    pub homotopy_trace: Vec<TraceEntry>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmaDiagnostics {
    pub final_residual: f64,
    pub final_residual_mean: f64,
    pub min_eigen_margin: f64,
    pub dense_fallbacks: usize,
    pub gradient_bound: GradientBoundReport,
}

impl From<&GmaSolution> for GmaDiagnostics {
    fn from(s: &GmaSolution) -> Self {
        GmaDiagnostics {
            final_residual: s.final_residual,
            final_residual_mean: s.final_residual_mean,
            min_eigen_margin: s.min_eigen_margin,
            dense_fallbacks: s.dense_fallbacks,
            gradient_bound: s.gradient_bound_report.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default)]
    pub assembly: Option<Report>,
    pub verification: Vec<Report>,
    #[serde(default)]
    pub gma: Option<GmaDiagnostics>,
}

/// The coefficients of a GMA run, without the field data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmaCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub l: [[f64; 2]; 2],
    pub m: [[f64; 2]; 2],
    pub tol_residual: f64,
    pub tol_compat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermDocument {
    indices: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FormDocument {
    degree: usize,
    base: Option<Fibration>,
    terms: Vec<TermDocument>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

pub fn write_field(dir: &Path, stem: &str, f: &TorusField, source: &str, files: &mut Vec<String>) -> Result<(), CliError> {
    save_with_meta(f, dir, stem, source).map_err(|e| io_err(&dir.join(stem), e))?;
    files.push(format!("{stem}.csv"));
    files.push(format!("{stem}.json"));
    Ok(())
}

pub fn read_field(dir: &Path, name: &str, scheme: Scheme) -> Result<TorusField, CliError> {
    let path = dir.join(name);
    load_csv(&path, scheme).map_err(|e| io_err(&path, e))
}

/// Writes `<stem>.json` and one `<stem>_<ij>.csv` per field coefficient.
pub fn write_form(dir: &Path, stem: &str, form: &Form, files: &mut Vec<String>) -> Result<(), CliError> {
    let mut terms = Vec::new();
    for (mask, c) in form.terms() {
        let name = mask_name(mask);
        let label = if name.is_empty() { "0".to_string() } else { name.clone() };
        match c {
            Coeff::Const(v) => terms.push(TermDocument { indices: name, constant: Some(*v), csv: None }),
            Coeff::Field(f) => {
                let file = format!("{stem}_{label}.csv");
                let path = dir.join(&file);
                save_csv(f, &path).map_err(|e| io_err(&path, e))?;
                files.push(file.clone());
                terms.push(TermDocument { indices: name, constant: None, csv: Some(file) });
            }
        }
    }
    let doc = FormDocument { degree: form.degree(), base: form.base(), terms };
    write_json(dir, &format!("{stem}.json"), &doc)?;
    files.push(format!("{stem}.json"));
    Ok(())
}

pub fn read_form(dir: &Path, stem: &str, scheme: Scheme) -> Result<Form, CliError> {
    let doc: FormDocument = super::config::read_json(&dir.join(format!("{stem}.json")))?;
    let mut out = Form::zero(doc.degree);
    if let Some(b) = doc.base {
        out = out.with_base(b);
    }
    for t in doc.terms {
        let idx: Vec<usize> = t
            .indices
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize).filter(|d| (1..=4).contains(d)))
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::Validation(format!("{stem}.json: bad indices `{}`", t.indices)))?;
        if idx.len() != doc.degree || indices_of(mask_of(&idx)) != idx {
            return Err(CliError::Validation(format!("{stem}.json: indices `{}` do not fit degree {}", t.indices, doc.degree)));
        }
        let coeff = match (t.constant, t.csv) {
            (Some(v), None) => Coeff::Const(v),
            (None, Some(file)) => Coeff::Field(read_field(dir, &file, scheme)?),
            _ => return Err(CliError::Validation(format!("{stem}.json: term `{}` needs exactly one of constant, csv", t.indices))),
        };
        out.add_term(mask_of(&idx), coeff);
    }
    Ok(out)
}

pub fn write_complex_form(dir: &Path, stem: &str, form: &ComplexForm, files: &mut Vec<String>) -> Result<(), CliError> {
    write_form(dir, &format!("{stem}_re"), &form.re, files)?;
    write_form(dir, &format!("{stem}_im"), &form.im, files)
}

pub fn read_complex_form(dir: &Path, stem: &str, scheme: Scheme) -> Result<ComplexForm, CliError> {
    Ok(ComplexForm::new(read_form(dir, &format!("{stem}_re"), scheme)?, read_form(dir, &format!("{stem}_im"), scheme)?))
}

/// Frame, fields and forms of a pipeline solution.
pub fn write_solution(dir: &Path, sol: &CySolution, f_source: &str, files: &mut Vec<String>) -> Result<(), CliError> {
    write_json(dir, FRAME, &sol.frame.to_document())?;
    files.push(FRAME.into());
    write_field(dir, "F", &sol.f, f_source, files)?;
    write_form(dir, "omega_tilde", &sol.omega_tilde, files)?;
    if let Some(a) = &sol.alpha {
        write_form(dir, "alpha", a, files)?;
    }
    if let Some(t) = &sol.theta_tilde {
        write_complex_form(dir, "theta_tilde", t, files)?;
    }
    if let Some(g) = &sol.gma {
        write_field(dir, "p", &g.p, "solver", files)?;
    }
    if let Some(h) = &sol.h {
        write_field(dir, "h", h, "solver", files)?;
    }
    if let Some(a) = &sol.alpha_frame {
        for (i, c) in a.iter().enumerate() {
            write_field(dir, &format!("alpha_frame_a{}", i + 1), c, "solver", files)?;
        }
    }
    Ok(())
}
