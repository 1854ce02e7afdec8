//! Python bindings for cytorus.

use std::path::PathBuf;

use cytorus::cli::config::{FieldSpec, InstanceConfig, MetricSpec};
use cytorus::cli::expr::Expr;
use cytorus::cli::{self, CliError};
use cytorus::cy_pipeline::{self, CyInstance, CySolution, Geometry, PipelineError, PipelineOptions};
use cytorus::gma_solver::{self, GmaError, GmaProblem, GmaSolution, SolveOptions};
use cytorus::torus_field::io::{load_csv, save_csv};
use cytorus::torus_field::{Axis, FieldError, Scheme, TorusField};
use cytorus::verifier::{Comparison, Report};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Validation(m) => PyValueError::new_err(m),
        CliError::Numerical(m) => PyArithmeticError::new_err(m),
        CliError::Verification(m) => PyRuntimeError::new_err(m),
    }
}

fn pipeline_err(e: PipelineError) -> PyErr {
    cli_err(e.into())
}

fn gma_err(e: GmaError) -> PyErr {
    cli_err(e.into())
}

fn field_err(e: FieldError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    s.parse().map_err(field_err)
}

fn parse_axis(axis: usize) -> PyResult<Axis> {
    match axis {
        1 => Ok(Axis::One),
        2 => Ok(Axis::Two),
        _ => Err(PyValueError::new_err("axis must be 1 or 2")),
    }
}

/// Periodic scalar field on the unit torus, stored on an `n1 x n2` grid.
#[pyclass(name = "Field", module = "cytorus_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyField {
    inner: TorusField,
}

impl From<TorusField> for PyField {
    fn from(inner: TorusField) -> Self {
        PyField { inner }
    }
}

#[pymethods]
impl PyField {
    /// Samples an expression in `x`, `y` on an `n x n` grid.
    #[staticmethod]
    #[pyo3(signature = (expr, n, scheme = "spectral"))]
    fn from_expression(expr: &str, n: usize, scheme: &str) -> PyResult<Self> {
        cytorus::torus_field::check_grid(n).map_err(field_err)?;
        let e = Expr::parse(expr).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(e.sample(n, n, parse_scheme(scheme)?).into())
    }

    /// Builds a field from rows indexed by `i` (the `x` direction).
    #[staticmethod]
    #[pyo3(signature = (rows, scheme = "spectral"))]
    fn from_rows(rows: Vec<Vec<f64>>, scheme: &str) -> PyResult<Self> {
        let n1 = rows.len();
        let n2 = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n2) {
            return Err(PyValueError::new_err("rows must all have the same length"));
        }
        let values = rows.into_iter().flatten().collect();
        Ok(TorusField::from_values(n1, n2, parse_scheme(scheme)?, values).map_err(field_err)?.into())
    }

    #[staticmethod]
    #[pyo3(signature = (path, scheme = "spectral"))]
    fn load(path: PathBuf, scheme: &str) -> PyResult<Self> {
        Ok(load_csv(&path, parse_scheme(scheme)?).map_err(field_err)?.into())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_csv(&self.inner, &path).map_err(field_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n1(), self.inner.n2())
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme().to_string()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.values().chunks(self.inner.n2()).map(<[f64]>::to_vec).collect()
    }

    fn integrate(&self) -> f64 {
        self.inner.integrate()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn interpolate(&self, x: f64, y: f64) -> f64 {
        self.inner.interpolate(x, y)
    }

    #[pyo3(signature = (axis, order = 1))]
    fn derivative(&self, axis: usize, order: u8) -> PyResult<Self> {
        if !(1..=2).contains(&order) {
            return Err(PyValueError::new_err("order must be 1 or 2"));
        }
        Ok(self.inner.derivative(parse_axis(axis)?, order).into())
    }

    fn laplacian(&self) -> Self {
        self.inner.laplacian().into()
    }

    fn poisson_solve(&self) -> PyResult<Self> {
        Ok(self.inner.poisson_solve().map_err(field_err)?.into())
    }

    /// Returns `(G, shift)` with `G = F + shift` and `∫ e^G = target`.
    #[pyo3(signature = (target = 1.0))]
    fn normalize_rhs(&self, target: f64) -> (Self, f64) {
        let (g, s) = self.inner.normalize_rhs(target);
        (g.into(), s)
    }

    fn __repr__(&self) -> String {
        format!("Field(shape=({}, {}), scheme='{}')", self.inner.n1(), self.inner.n2(), self.inner.scheme())
    }
}

type CheckRow = (String, String, f64, String, f64, bool);

fn report_rows(reports: &[Report]) -> Vec<CheckRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().map(move |c| {
                let cmp = match c.comparison {
                    Comparison::AtMost => "<=",
                    Comparison::AtLeast => ">=",
                    Comparison::Above => ">",
                };
                (r.name.clone(), c.name.clone(), c.value, cmp.to_string(), c.tolerance, c.passed)
            })
        })
        .collect()
}

/// Result of a geometric solve.
#[pyclass(name = "Solution", module = "cytorus_py")]
pub struct PySolution {
    inner: CySolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn geometry(&self) -> &'static str {
        self.inner.geometry.name()
    }

    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    /// Constant added to the input `F`.
    #[getter]
    fn shift(&self) -> f64 {
        self.inner.shift
    }

    #[getter]
    fn f(&self) -> PyField {
        self.inner.f.clone().into()
    }

    #[getter]
    fn p(&self) -> Option<PyField> {
        self.inner.gma.as_ref().map(|g| g.p.clone().into())
    }

    #[getter]
    fn h(&self) -> Option<PyField> {
        self.inner.h.clone().map(Into::into)
    }

    /// Frame coefficients `a1..a4` of the potential, when the geometry has them.
    #[getter]
    fn alpha_frame(&self) -> Option<Vec<PyField>> {
        self.inner.alpha_frame.as_ref().map(|a| a.iter().cloned().map(Into::into).collect())
    }

    /// `(report, check, value, comparison, tolerance, passed)` for every check.
    fn checks(&self) -> Vec<CheckRow> {
        let mut all = vec![self.inner.assembly.clone()];
        all.extend(self.inner.verification.iter().cloned());
        report_rows(&all)
    }

    /// Largest absolute coefficient of `Ω̃ - Ω`.
    fn omega_change(&self) -> f64 {
        self.inner.omega_tilde.sub(&self.inner.omega).max_abs()
    }

    fn __repr__(&self) -> String {
        format!("Solution(geometry='{}', passed={}, shift={:e})", self.inner.geometry.name(), self.inner.passed(), self.inner.shift)
    }
}

/// Result of a GMA solve on the base torus.
#[pyclass(name = "GmaResult", module = "cytorus_py")]
pub struct PyGmaResult {
    inner: GmaSolution,
    report: Report,
}

#[pymethods]
impl PyGmaResult {
    #[getter]
    fn p(&self) -> PyField {
        self.inner.p.clone().into()
    }

    #[getter]
    fn final_residual(&self) -> f64 {
        self.inner.final_residual
    }

    #[getter]
    fn min_eigen_margin(&self) -> f64 {
        self.inner.min_eigen_margin
    }

    #[getter]
    fn shift(&self) -> f64 {
        self.inner.shift
    }

    #[getter]
    fn homotopy_steps(&self) -> usize {
        self.inner.homotopy_trace.len()
    }

    #[getter]
    fn passed(&self) -> bool {
        self.report.passed()
    }

    fn checks(&self) -> Vec<CheckRow> {
        report_rows(std::slice::from_ref(&self.report))
    }
}

fn solver_options(tol_residual: Option<f64>) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(t) = tol_residual {
        o.tol_residual = t;
    }
    o
}

/// Solves the Calabi-Yau problem for `geometry` with volume data `f`.
#[pyfunction]
#[pyo3(signature = (geometry, f, metric = None, omega = None, strict = false, tol_residual = None))]
fn solve(
    py: Python<'_>,
    geometry: &str,
    f: &PyField,
    metric: Option<Vec<f64>>,
    omega: Option<[f64; 6]>,
    strict: bool,
    tol_residual: Option<f64>,
) -> PyResult<PySolution> {
    let geometry: Geometry = geometry.parse().map_err(pipeline_err)?;
    let mut cfg = InstanceConfig::new(geometry, FieldSpec::Expression("0".into()));
    if let Some(m) = metric {
        cfg.metric = MetricSpec::Flat(m);
    }
    cfg.omega = omega;
    let frame = cfg.frame().map_err(cli_err)?;
    let opts = PipelineOptions { strict, solver: solver_options(tol_residual), ..PipelineOptions::default() };
    let instance = CyInstance { geometry, frame, f: f.inner.clone() };
    let inner = py.detach(|| cy_pipeline::solve(&instance, &opts)).map_err(pipeline_err)?;
    Ok(PySolution { inner })
}

/// Solves `det(S + Hess p - l p_x - m p_y) = e^F` with `S = [[a, c], [c, b]]`.
#[pyfunction]
#[pyo3(signature = (a, b, f, c = 0.0, l = None, m = None, renormalize = false, tol_residual = None))]
#[allow(clippy::too_many_arguments)]
fn solve_gma(
    py: Python<'_>,
    a: f64,
    b: f64,
    f: &PyField,
    c: f64,
    l: Option<[[f64; 2]; 2]>,
    m: Option<[[f64; 2]; 2]>,
    renormalize: bool,
    tol_residual: Option<f64>,
) -> PyResult<PyGmaResult> {
    let problem = GmaProblem { a, b, c, l: l.unwrap_or_default(), m: m.unwrap_or_default(), f: f.inner.clone(), renormalize };
    let opts = solver_options(tol_residual);
    let inner = py.detach(|| gma_solver::solve(&problem, &opts)).map_err(gma_err)?;
    let used = GmaProblem { f: problem.f.add_scalar(inner.shift), ..problem };
    let report = cli::gma_report(&used, &inner.p, &opts);
    Ok(PyGmaResult { inner, report })
}

/// Re-verifies a run directory written by `cytorus solve --out`.
#[pyfunction]
fn verify(py: Python<'_>, dir: PathBuf) -> PyResult<()> {
    py.detach(|| cli::cmd_verify(&dir)).map_err(cli_err)
}

/// Runs the command line tool with `args` (without the program name) and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let mut all = vec!["cytorus".to_string()];
    all.extend(args);
    py.detach(|| cli::run(all))
}

#[pymodule]
fn cytorus_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyGmaResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_gma, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
