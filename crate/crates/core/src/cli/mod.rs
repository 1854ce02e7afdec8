//! Command-line front end: `solve`, `verify` and `convergence`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a
//! verification check failed. `CYTORUS_THREADS` sets the worker count.

pub mod artifacts;
pub mod config;
pub mod expr;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cy_pipeline::{self, holomorphic_form, tw_estimate, verify_forms, CyInstance, Geometry, PipelineError};
use crate::gma_solver::{self, GmaError, SolveOptions};
use crate::lie_frame::{AKFrame, FrameDocument};
use crate::torus_field::Scheme;
use crate::verifier::{Check, Comparison, Report};
use artifacts::*;
use config::*;

pub const THREADS_ENV: &str = "CYTORUS_THREADS";
/// Amplitude of the seeded perturbation of the initial iterate.
pub const SEED_PERTURBATION: f64 = 1e-3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<GmaError> for CliError {
    fn from(e: GmaError) -> Self {
        CliError::from(PipelineError::from(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "cytorus", version, about = "Calabi–Yau solver for invariant almost-Kähler T²-bundles over T²")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance (--config or --geometry) or a bare GMA problem (--gma).
    Solve(SolveArgs),
    /// Re-run the verifier battery on the artifacts of a solve.
    Verify {
        dir: PathBuf,
    },
    /// Manufactured-solution convergence study.
    Convergence {
        config: PathBuf,
        /// Write the study as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "spectral" => Ok(Scheme::Spectral),
        "fd4" => Ok(Scheme::Fd4),
        _ => Err(format!("unknown scheme `{s}` (spectral or fd4)")),
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// JSON instance file.
    #[arg(long, conflicts_with = "gma")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = |s: &str| s.parse::<Geometry>().map_err(|e| e.to_string()))]
    pub geometry: Option<Geometry>,
    /// JSON GMA problem file.
    #[arg(long, conflicts_with = "geometry")]
    pub gma: Option<PathBuf>,
    /// Expression for F in x, y.
    #[arg(long = "F", conflicts_with = "f_file")]
    pub f: Option<String>,
    /// CSV file holding F.
    #[arg(long = "F-file")]
    pub f_file: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub tol_newton: Option<f64>,
    #[arg(long)]
    pub tol_residual: Option<f64>,
    #[arg(long)]
    pub tol_compat: Option<f64>,
    #[arg(long)]
    pub tol_linear: Option<f64>,
    /// Initial number of continuation steps from t = 0 to t = 1.
    #[arg(long)]
    pub homotopy_steps: Option<usize>,
    /// Reject F that violates the compatibility condition instead of shifting it.
    #[arg(long, conflicts_with = "renormalize")]
    pub strict: bool,
    /// Shift F by a constant to satisfy the compatibility condition.
    #[arg(long)]
    pub renormalize: bool,
    /// Seed of a small random perturbation of the initial iterate.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolveArgs {
    fn field_override(&self) -> Option<FieldSpec> {
        match (&self.f, &self.f_file) {
            (Some(e), _) => Some(FieldSpec::Expression(e.clone())),
            (None, Some(p)) => Some(FieldSpec::Csv { csv: p.clone() }),
            _ => None,
        }
    }

    fn apply(&self, o: &mut SolveOptions) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Validation(format!("--{name} must be positive, got {v}")))
            }
        };
        if let Some(v) = self.tol_newton {
            o.tol_newton = positive("tol-newton", v)?;
        }
        if let Some(v) = self.tol_residual {
            o.tol_residual = positive("tol-residual", v)?;
        }
        if let Some(v) = self.tol_compat {
            o.tol_compat = positive("tol-compat", v)?;
        }
        if let Some(v) = self.tol_linear {
            o.linear.rel_tol = positive("tol-linear", v)?;
        }
        if let Some(n) = self.homotopy_steps {
            if n == 0 {
                return Err(CliError::Validation("--homotopy-steps must be at least 1".into()));
            }
            o.homotopy_step_init = 1.0 / n as f64;
            o.homotopy_step_min = o.homotopy_step_min.min(o.homotopy_step_init);
        }
        if let Some(s) = self.seed {
            o.perturbation = Some((SEED_PERTURBATION, s));
        }
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    init_threads();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Verify { dir } => cmd_verify(&dir),
        Command::Convergence { config, out } => cmd_convergence(&config, out.as_deref()).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialized; {THREADS_ENV} ignored");
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))
}

fn fmt_comparison(c: Comparison) -> &'static str {
    match c {
        Comparison::AtMost => "<=",
        Comparison::AtLeast => ">=",
        Comparison::Above => ">",
    }
}

/// Prints one line per check; returns the names of failed checks.
pub fn print_reports(reports: &[Report]) -> Vec<String> {
    let mut failed = Vec::new();
    for r in reports {
        for c in &r.checks {
            let status = if c.passed { "ok" } else { "FAIL" };
            println!(
                "  {status:<4} {:<22} {:<44} {:>12.3e} {:>2} {:.1e}",
                r.name,
                c.name,
                c.value,
                fmt_comparison(c.comparison),
                c.tolerance
            );
            if !c.passed {
                failed.push(format!("{}: {}", r.name, c.name));
            }
        }
    }
    failed
}

fn verdict(failed: Vec<String>) -> Result<(), CliError> {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join("; ")))
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    if let Some(p) = &a.gma {
        return solve_gma(a, p);
    }
    let (mut cfg, dir) = match (&a.config, a.geometry) {
        (Some(p), _) => (read_json::<InstanceConfig>(p)?, base_dir(p)),
        (None, Some(g)) => {
            let f = a
                .field_override()
                .ok_or_else(|| CliError::Validation("--geometry needs --F or --F-file".into()))?;
            (InstanceConfig::new(g, f), PathBuf::new())
        }
        (None, None) => return Err(CliError::Validation("one of --config, --geometry or --gma is required".into())),
    };
    if let Some(g) = a.geometry {
        cfg.geometry = g;
    }
    if let Some(f) = a.field_override() {
        cfg.f = f;
    }
    cfg.grid = a.grid.or(cfg.grid);
    cfg.scheme = a.scheme.unwrap_or(cfg.scheme);
    cfg.options.strict |= a.strict;
    a.apply(&mut cfg.options.solver)?;

    let frame = cfg.frame()?;
    let f = cfg.f.load(cfg.grid, cfg.scheme, &dir)?;
    let instance = CyInstance { geometry: cfg.geometry, frame, f };
    let start = Instant::now();
    let sol = cy_pipeline::solve(&instance, &cfg.options)?;
    let wall = start.elapsed().as_secs_f64();

    println!(
        "{}: {}x{} {:?}, F shifted by {:.3e}, {:.2}s",
        cfg.geometry,
        sol.f.n1(),
        sol.f.n2(),
        cfg.scheme,
        sol.shift,
        wall
    );
    let mut reports = vec![sol.assembly.clone()];
    reports.extend(sol.verification.iter().cloned());
    let failed = print_reports(&reports);

    if let Some(out) = &a.out {
        ensure_dir(out)?;
        let mut files = Vec::new();
        write_solution(out, &sol, &cfg.f.describe(), &mut files)?;
        let diag = Diagnostics {
            assembly: Some(sol.assembly.clone()),
            verification: sol.verification.clone(),
            gma: sol.gma.as_ref().map(GmaDiagnostics::from),
        };
        write_json(out, DIAGNOSTICS, &diag)?;
        files.push(DIAGNOSTICS.into());
        files.push(MANIFEST.into());
        let manifest = Manifest {
            tool: "cytorus".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: RunMode::Instance,
            geometry: Some(cfg.geometry),
            grid: [sol.f.n1(), sol.f.n2()],
            scheme: cfg.scheme,
            f_source: cfg.f.describe(),
            f_shift: sol.shift,
            seed: a.seed,
            threads: rayon::current_num_threads(),
            wall_time_s: wall,
            config: serde_json::to_value(&cfg).map_err(|e| CliError::Validation(e.to_string()))?,
            homotopy_trace: sol.gma.as_ref().map(|g| g.homotopy_trace.clone()).unwrap_or_default(),
            files,
        };
        write_json(out, MANIFEST, &manifest)?;
        println!("artifacts written to {}", out.display());
    }
    verdict(failed)
}

fn solve_gma(a: &SolveArgs, path: &Path) -> Result<(), CliError> {
    let mut cfg: GmaConfig = read_json(path)?;
    if let Some(f) = a.field_override() {
        cfg.f = f;
    }
    cfg.grid = a.grid.or(cfg.grid);
    cfg.scheme = a.scheme.unwrap_or(cfg.scheme);
    if a.renormalize {
        cfg.renormalize = true;
    }
    if a.strict {
        cfg.renormalize = false;
    }
    a.apply(&mut cfg.options)?;
    let f = cfg.f.load(cfg.grid, cfg.scheme, &base_dir(path))?;
    let problem = cfg.problem(f);
    let start = Instant::now();
    let sol = gma_solver::solve(&problem, &cfg.options)?;
    let wall = start.elapsed().as_secs_f64();
    let f_used = problem.f.add_scalar(sol.shift);
    let used = gma_solver::GmaProblem { f: f_used.clone(), ..problem.clone() };
    let reports = vec![gma_report(&used, &sol.p, &cfg.options)];
    println!(
        "gma: {}x{} {:?}, F shifted by {:.3e}, residual {:.2e}, {:.2}s",
        f_used.n1(),
        f_used.n2(),
        cfg.scheme,
        sol.shift,
        sol.final_residual,
        wall
    );
    let failed = print_reports(&reports);
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        let mut files = Vec::new();
        write_field(out, "F", &f_used, &cfg.f.describe(), &mut files)?;
        write_field(out, "p", &sol.p, "solver", &mut files)?;
        let coeffs = GmaCoefficients {
            a: cfg.a,
            b: cfg.b,
            c: cfg.c,
            l: cfg.l,
            m: cfg.m,
            tol_residual: cfg.options.tol_residual,
            tol_compat: cfg.options.tol_compat,
        };
        write_json(out, PROBLEM, &coeffs)?;
        files.push(PROBLEM.into());
        write_json(out, DIAGNOSTICS, &Diagnostics { assembly: None, verification: reports, gma: Some((&sol).into()) })?;
        files.push(DIAGNOSTICS.into());
        files.push(MANIFEST.into());
        let manifest = Manifest {
            tool: "cytorus".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: RunMode::Gma,
            geometry: None,
            grid: [f_used.n1(), f_used.n2()],
            scheme: cfg.scheme,
            f_source: cfg.f.describe(),
            f_shift: sol.shift,
            seed: a.seed,
            threads: rayon::current_num_threads(),
            wall_time_s: wall,
            config: serde_json::to_value(&cfg).map_err(|e| CliError::Validation(e.to_string()))?,
            homotopy_trace: sol.homotopy_trace.clone(),
            files,
        };
        write_json(out, MANIFEST, &manifest)?;
        println!("artifacts written to {}", out.display());
    }
    verdict(failed)
}

/// Compatibility, residual and ellipticity of a computed potential.
pub fn gma_report(problem: &gma_solver::GmaProblem, p: &crate::torus_field::TorusField, opts: &SolveOptions) -> Report {
    let mut r = Report::new("gma");
    r.push(Check::at_most("|∫(e^F - ab + c²)|", problem.compatibility_integral().abs(), opts.tol_compat));
    let res = problem.residual(p);
    let mean = res.mean();
    r.push(Check::at_most("residual (mean removed)", res.add_scalar(-mean).max_abs(), opts.tol_residual));
    let margin = problem.matrix_field(&p.derivatives(), 1.0).min_eigenvalue().min();
    r.push(Check::above("min eigenvalue", margin, 0.0));
    r
}

pub fn cmd_verify(dir: &Path) -> Result<(), CliError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let scheme = manifest.scheme;
    let f = read_field(dir, "F.csv", scheme)?;
    let reports = match manifest.mode {
        RunMode::Gma => {
            let c: GmaCoefficients = read_json(&dir.join(PROBLEM))?;
            let p = read_field(dir, "p.csv", scheme)?;
            let problem = gma_solver::GmaProblem { a: c.a, b: c.b, c: c.c, l: c.l, m: c.m, f, renormalize: false };
            let opts = SolveOptions { tol_residual: c.tol_residual, tol_compat: c.tol_compat, ..SolveOptions::default() };
            vec![gma_report(&problem, &p, &opts)]
        }
        RunMode::Instance => {
            let doc: FrameDocument = read_json(&dir.join(FRAME))?;
            let frame = AKFrame::from_document(&doc).map_err(|e| CliError::Validation(format!("{FRAME}: {e}")))?;
            if let Some(g) = manifest.geometry {
                if frame.base() != g.base() {
                    return Err(CliError::Validation(format!("{FRAME} does not match geometry {g}")));
                }
            }
            let omega_tilde = read_form(dir, "omega_tilde", scheme)?;
            let omega = frame.omega_form();
            let kt = manifest.geometry == Some(Geometry::KtXy);
            let (mut reports, theta_ok) = if kt {
                let tt = read_complex_form(dir, "theta_tilde", scheme)?;
                let t = holomorphic_form(&frame);
                let mut r = verify_forms(&frame, &f, &omega, &omega_tilde, Some((&tt, &t)));
                let mut consistency = Report::new("artifact consistency");
                consistency.push(Check::at_most("|Re Θ̃ - Ω̃|", tt.re.sub(&omega_tilde).max_abs(), 0.0));
                r.push(consistency);
                (r, true)
            } else {
                (verify_forms(&frame, &f, &omega, &omega_tilde, None), false)
            };
            if theta_ok && dir.join("p.csv").exists() && dir.join("h.csv").exists() {
                let p = read_field(dir, "p.csv", scheme)?;
                let h = read_field(dir, "h.csv", scheme)?;
                reports.push(tw_estimate(&frame, &f, &p, &h)?.to_report());
            }
            reports
        }
    };
    println!("verify {}: {} checks", dir.display(), reports.iter().map(|r| r.checks.len()).sum::<usize>());
    verdict(print_reports(&reports))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub n: usize,
    pub error: f64,
    /// Observed order against the previous level.
    pub order: Option<f64>,
    pub residual: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub config: ConvergenceConfig,
    pub levels: Vec<ConvergenceLevel>,
}

pub fn cmd_convergence(path: &Path, out: Option<&Path>) -> Result<ConvergenceStudy, CliError> {
    let cfg: ConvergenceConfig = read_json(path)?;
    if cfg.grids.is_empty() {
        return Err(CliError::Validation("grids must not be empty".into()));
    }
    let mut levels: Vec<ConvergenceLevel> = Vec::new();
    for &n in &cfg.grids {
        let (problem, exact) = cfg.problem(n)?;
        let start = Instant::now();
        let sol = gma_solver::solve(&problem, &cfg.options)?;
        let wall = start.elapsed().as_secs_f64();
        let error = (&sol.p - &exact.remove_mean()).max_abs();
        let order = levels.last().and_then(|prev| {
            (prev.error > 0.0 && error > 0.0).then(|| (prev.error / error).ln() / (n as f64 / prev.n as f64).ln())
        });
        levels.push(ConvergenceLevel { n, error, order, residual: sol.final_residual, wall_time_s: wall });
    }
    println!("{:>6} {:>12} {:>8} {:>12} {:>8}", "n", "L∞ error", "order", "residual", "time");
    for l in &levels {
        let order = l.order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into());
        println!("{:>6} {:>12.3e} {:>8} {:>12.3e} {:>7.2}s", l.n, l.error, order, l.residual, l.wall_time_s);
    }
    let study = ConvergenceStudy { config: cfg, levels };
    if let Some(out) = out {
        let text = serde_json::to_string_pretty(&study).map_err(|e| CliError::Validation(e.to_string()))?;
        std::fs::write(out, text + "\n").map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
    }
    Ok(study)
}
