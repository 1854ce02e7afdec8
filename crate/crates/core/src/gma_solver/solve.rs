//! Damped Newton continuation from `t = 0` (where `p = 0` solves) to `t = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::{gradient_bound_check, GradientBoundReport};
use super::linear::{project, LinearOptions, LinearStats, LinearizedOperator};
use super::problem::GmaProblem;
use super::GmaError;
use crate::torus_field::TorusField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub homotopy_step_init: f64,
    pub homotopy_step_min: f64,
    pub tol_newton: f64,
    pub tol_residual: f64,
    pub tol_compat: f64,
    pub max_newton_iters: usize,
    pub max_backtracks: u32,
    pub armijo: f64,
    /// Fraction of the pre-step positivity margin that a Newton step must keep.
    pub margin_keep: f64,
    pub linear: LinearOptions,
    /// Amplitude and seed of a smooth random perturbation of the `t = 0` iterate.
    #[serde(default)]
    pub perturbation: Option<(f64, u64)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            homotopy_step_init: 0.25,
            homotopy_step_min: 1e-4,
            tol_newton: 1e-10,
            tol_residual: 1e-9,
            tol_compat: 1e-10,
            max_newton_iters: 40,
            max_backtracks: 20,
            armijo: 1e-4,
            margin_keep: 0.1,
            linear: LinearOptions::default(),
            perturbation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub min_eigen_margin: f64,
    pub linear_iters: usize,
    /// Mean of the residual at acceptance (compatibility defect of the discretization).
    pub residual_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmaSolution {
    pub p: TorusField,
    pub homotopy_trace: Vec<TraceEntry>,
    pub final_residual: f64,
    pub final_residual_mean: f64,
    pub min_eigen_margin: f64,
    pub gradient_bound_report: GradientBoundReport,
    /// Constant added to `F` by renormalization.
    pub shift: f64,
    pub dense_fallbacks: usize,
}

/// Residual measure used for convergence: sup norm after removing the mean.
fn measure(r: &TorusField) -> (f64, f64) {
    let mean = r.mean();
    (r.add_scalar(-mean).max_abs(), mean)
}

struct NewtonOutcome {
    p: TorusField,
    iters: usize,
    residual: f64,
    residual_mean: f64,
    margin: f64,
    linear_iters: usize,
    dense: usize,
}

fn newton(problem: &GmaProblem, mut p: TorusField, t: f64, opts: &SolveOptions) -> Result<NewtonOutcome, String> {
    let mut r = problem.residual_t(&p, t);
    let (mut rn, mut rmean) = measure(&r);
    let mut linear_iters = 0;
    let mut dense = 0;
    for iter in 0..=opts.max_newton_iters {
        let op = LinearizedOperator::new(problem, &p, t);
        let margin = op.matrix_field().min_eigenvalue().min();
        if margin <= 0.0 {
            return Err(format!("iterate lost positivity (margin {margin:e})"));
        }
        if rn <= opts.tol_newton {
            return Ok(NewtonOutcome { p, iters: iter, residual: rn, residual_mean: rmean, margin, linear_iters, dense });
        }
        if iter == opts.max_newton_iters {
            break;
        }
        let (delta, stats): (TorusField, LinearStats) =
            op.solve(&r.scale(-1.0), &opts.linear).map_err(|e| e.to_string())?;
        linear_iters += stats.iterations;
        dense += stats.dense as usize;
        let r2 = project(&r).l2_norm();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let cand = &p + &delta.scale(step);
            let cand_r = problem.residual_t(&cand, t);
            let cand_margin = problem.matrix_field(&cand.derivatives(), t).min_eigenvalue().min();
            let cand_r2 = project(&cand_r).l2_norm();
            if cand_margin >= opts.margin_keep * margin && cand_r2 <= (1.0 - opts.armijo * step) * r2 {
                p = cand;
                r = cand_r;
                (rn, rmean) = measure(&r);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if rn <= opts.tol_newton * 10.0 && project(&r).l2_norm() <= opts.tol_newton {
                break;
            }
            return Err(format!("line search failed at residual {rn:e}"));
        }
    }
    Err(format!("Newton did not converge at t = {t} (residual {rn:e})"))
}

fn smooth_perturbation(like: &TorusField, amplitude: f64, seed: u64) -> TorusField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for k1 in -2i32..=2 {
        for k2 in -2i32..=2 {
            if (k1, k2) != (0, 0) {
                modes.push((k1 as f64, k2 as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)));
            }
        }
    }
    let f = TorusField::from_fn(like.n1(), like.n2(), like.scheme(), |x, y| {
        modes
            .iter()
            .map(|(k1, k2, a, ph)| a * (std::f64::consts::TAU * (k1 * x + k2 * y) + ph).cos())
            .sum::<f64>()
    });
    project(&f).scale(amplitude / f.max_abs().max(1e-300))
}

/// Solves the problem by continuation in `t` with damped Newton steps.
pub fn solve(problem: &GmaProblem, opts: &SolveOptions) -> Result<GmaSolution, GmaError> {
    let (problem, report) = problem.validate(opts.tol_compat)?;
    let zero = TorusField::zeros(problem.f.n1(), problem.f.n2(), problem.f.scheme());
    let mut p = match opts.perturbation {
        Some((amp, seed)) => smooth_perturbation(&zero, amp, seed),
        None => zero,
    };
    let mut trace = Vec::new();
    let mut dense = 0;
    let start = newton(&problem, p, 0.0, opts).map_err(|msg| GmaError::Nonconvergence { message: msg, trace: vec![] })?;
    p = start.p;
    trace.push(TraceEntry {
        t: 0.0,
        newton_iters: start.iters,
        residual: start.residual,
        min_eigen_margin: start.margin,
        linear_iters: start.linear_iters,
        residual_mean: start.residual_mean,
    });
    let mut t = 0.0;
    let mut step = opts.homotopy_step_init;
    while t < 1.0 {
        let t_try = (t + step).min(1.0);
        match newton(&problem, p.clone(), t_try, opts) {
            Ok(out) => {
                log::debug!("accepted t = {t_try} after {} Newton steps", out.iters);
                t = t_try;
                p = out.p;
                dense += out.dense;
                trace.push(TraceEntry {
                    t,
                    newton_iters: out.iters,
                    residual: out.residual,
                    min_eigen_margin: out.margin,
                    linear_iters: out.linear_iters,
                    residual_mean: out.residual_mean,
                });
                step = (step * 2.0).min(opts.homotopy_step_init);
            }
            Err(msg) => {
                step *= 0.5;
                log::debug!("step to t = {t_try} failed ({msg}); halving to {step}");
                if step < opts.homotopy_step_min {
                    return Err(GmaError::Nonconvergence {
                        message: format!("continuation step underflow below t = {t_try}: {msg}"),
                        trace,
                    });
                }
            }
        }
    }
    let p = p.remove_mean();
    let r = problem.residual(&p);
    let (final_residual, final_residual_mean) = measure(&r);
    if final_residual > opts.tol_residual {
        return Err(GmaError::Nonconvergence {
            message: format!("final residual {final_residual:e} above tolerance {:e}", opts.tol_residual),
            trace,
        });
    }
    let margin = problem.matrix_field(&p.derivatives(), 1.0).min_eigenvalue().min();
    if margin <= 0.0 {
        return Err(GmaError::Numerical(format!("accepted solution violates positivity (margin {margin:e})")));
    }
    let gradient_bound_report = gradient_bound_check(&problem, &p);
    Ok(GmaSolution {
        p,
        homotopy_trace: trace,
        final_residual,
        final_residual_mean,
        min_eigen_margin: margin,
        gradient_bound_report,
        shift: report.shift,
        dense_fallbacks: dense,
    })
}

/// One linear solve of the derivative of `det M_1` at `p`, refusing iterates
/// at which the matrix is not positive definite.
pub fn linearized_solve(
    problem: &GmaProblem,
    p: &TorusField,
    rhs: &TorusField,
    opts: &LinearOptions,
) -> Result<(TorusField, LinearStats), GmaError> {
    let op = LinearizedOperator::new(problem, p, 1.0);
    let margin = op.matrix_field().min_eigenvalue().min();
    if margin <= 0.0 {
        return Err(GmaError::NotElliptic { margin });
    }
    op.solve(rhs, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub trials: usize,
    pub max_pairwise_difference: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// `min (P'_xy² - P'_xx P'_yy)` over the grid for differences of
    /// solutions; only evaluated for the pure Monge–Ampère case.
    pub lorentzian_min: Option<f64>,
    pub lorentzian_tol: f64,
}

/// Solves from `trials` distinct starts (initial step sizes and seeded
/// perturbations of the first iterate) and compares the results.
pub fn uniqueness_probe(problem: &GmaProblem, trials: usize, opts: &SolveOptions) -> Result<UniquenessReport, GmaError> {
    use rayon::prelude::*;
    let variants: Vec<SolveOptions> = (0..trials.max(1))
        .map(|i| {
            let mut o = *opts;
            if i > 0 {
                o.homotopy_step_init = [0.25, 0.5, 1.0, 0.125][i % 4];
                o.perturbation = Some((1e-3, 0x5eed + i as u64));
            }
            o
        })
        .collect();
    let sols: Vec<GmaSolution> =
        variants.par_iter().map(|o| solve(problem, o)).collect::<Result<Vec<_>, GmaError>>()?;
    let mut max_diff = 0.0f64;
    let mut lorentz: Option<f64> = None;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            let diff = (&sols[i].p - &sols[j].p).remove_mean();
            max_diff = max_diff.max(diff.max_abs());
            if !problem.has_lower_order() {
                let d = diff.derivatives();
                let q = (0..diff.len())
                    .map(|k| d.d12.values()[k].powi(2) - d.d11.values()[k] * d.d22.values()[k])
                    .fold(f64::INFINITY, f64::min);
                lorentz = Some(lorentz.map_or(q, |v| v.min(q)));
            }
        }
    }
    let tolerance = 10.0 * opts.tol_residual;
    let lorentzian_tol = 1e-9;
    let passed = max_diff <= tolerance && lorentz.is_none_or(|q| q >= -lorentzian_tol);
    if !passed {
        log::warn!("uniqueness probe disagreement: {max_diff:e}");
    }
    Ok(UniquenessReport {
        trials: sols.len(),
        max_pairwise_difference: max_diff,
        tolerance,
        passed,
        lorentzian_min: lorentz,
        lorentzian_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_field::Scheme;
    use std::f64::consts::PI;

    fn manufactured(n: usize, scheme: Scheme) -> (GmaProblem, TorusField) {
        let pstar = TorusField::from_fn(n, n, scheme, |x, y| 0.01 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let base = GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], TorusField::zeros(n, n, scheme));
        let det = base.residual(&pstar).add_scalar(1.0);
        (GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], det.map(f64::ln)), pstar)
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let pb = GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], TorusField::zeros(16, 16, Scheme::Spectral));
        let s = solve(&pb, &SolveOptions::default()).unwrap();
        assert_eq!(s.p.max_abs(), 0.0);
    }

    #[test]
    fn manufactured_spectral() {
        let (pb, pstar) = manufactured(32, Scheme::Spectral);
        let s = solve(&pb, &SolveOptions::default()).unwrap();
        assert!((&s.p - &pstar).max_abs() < 1e-10);
        assert!(s.p.mean().abs() <= 1e-14);
        assert!(s.homotopy_trace.iter().all(|e| e.residual <= 1e-10 && e.min_eigen_margin > 0.0));
    }

    #[test]
    fn refuses_non_elliptic_iterate() {
        let pb = GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], TorusField::zeros(16, 16, Scheme::Spectral));
        let p = TorusField::from_fn(16, 16, Scheme::Spectral, |x, _| (2.0 * PI * x).sin());
        let rhs = TorusField::zeros(16, 16, Scheme::Spectral);
        assert!(matches!(linearized_solve(&pb, &p, &rhs, &LinearOptions::default()), Err(GmaError::NotElliptic { .. })));
    }
}
