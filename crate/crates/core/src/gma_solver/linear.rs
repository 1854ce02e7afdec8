//! Linearized operator, its Fourier preconditioner, restarted GMRES and the
//! dense fallback.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::problem::{GmaProblem, MatrixField};
use super::GmaError;
use crate::torus_field::{spectral, Scheme, TorusField};

/// Removes the modes that are not unknowns: the mean, and for the spectral
/// scheme also the Nyquist row and column.
pub fn project(f: &TorusField) -> TorusField {
    match f.scheme() {
        Scheme::Spectral => f.project_band_limited(),
        Scheme::Fd4 => f.remove_mean(),
    }
}

/// `δ ↦ M22 δ_xx + M11 δ_yy - 2 M12 δ_xy + bx δ_x + by δ_y`, the derivative of
/// `det M_t` at `p`.
pub struct LinearizedOperator {
    m: MatrixField,
    bx: TorusField,
    by: TorusField,
    symbol: Vec<Complex64>,
    n1: usize,
    n2: usize,
    scheme: Scheme,
}

impl LinearizedOperator {
    pub fn new(problem: &GmaProblem, p: &TorusField, t: f64) -> Self {
        let m = problem.matrix_field(&p.derivatives(), t);
        let coef = |l11: f64, l22: f64, l12: f64| {
            let v: Vec<f64> = (0..m.m11.len())
                .map(|i| {
                    -t * (m.m22.values()[i] * l11 + m.m11.values()[i] * l22 - 2.0 * m.m12.values()[i] * l12)
                })
                .collect();
            m.m11.with_values(v)
        };
        let bx = coef(problem.l11(), problem.l22(), problem.l12());
        let by = coef(problem.m11(), problem.m22(), problem.m12());
        let (n1, n2, scheme) = (p.n1(), p.n2(), p.scheme());
        let (a11, a22, a12) = (m.m22.mean(), m.m11.mean(), m.m12.mean());
        let (cx, cy) = (bx.mean(), by.mean());
        let mut symbol = vec![Complex64::new(0.0, 0.0); n1 * n2];
        for j1 in 0..n1 {
            let (s1, q1) = (spectral::first_symbol(j1, n1, scheme), spectral::second_symbol(j1, n1, scheme));
            for j2 in 0..n2 {
                let (s2, q2) = (spectral::first_symbol(j2, n2, scheme), spectral::second_symbol(j2, n2, scheme));
                symbol[j1 * n2 + j2] = a11 * q1 + a22 * q2 - 2.0 * a12 * s1 * s2 + cx * s1 + cy * s2;
            }
        }
        LinearizedOperator { m, bx, by, symbol, n1, n2, scheme }
    }

    pub fn matrix_field(&self) -> &MatrixField {
        &self.m
    }

    fn is_unknown(&self, j1: usize, j2: usize) -> bool {
        if j1 == 0 && j2 == 0 {
            return false;
        }
        match self.scheme {
            Scheme::Spectral => !spectral::is_nyquist(j1, self.n1) && !spectral::is_nyquist(j2, self.n2),
            Scheme::Fd4 => true,
        }
    }

    /// Applies the operator without projecting the output.
    pub fn apply_raw(&self, delta: &TorusField) -> TorusField {
        let d = delta.derivatives();
        let v: Vec<f64> = (0..delta.len())
            .map(|i| {
                self.m.m22.values()[i] * d.d11.values()[i] + self.m.m11.values()[i] * d.d22.values()[i]
                    - 2.0 * self.m.m12.values()[i] * d.d12.values()[i]
                    + self.bx.values()[i] * d.d1.values()[i]
                    + self.by.values()[i] * d.d2.values()[i]
            })
            .collect();
        delta.with_values(v)
    }

    pub fn apply(&self, delta: &TorusField) -> TorusField {
        project(&self.apply_raw(delta))
    }

    /// Inverse of the constant-coefficient operator with mean coefficients.
    pub fn precondition(&self, r: &TorusField) -> TorusField {
        let mut spec = spectral::forward(r.values(), self.n1, self.n2);
        for j1 in 0..self.n1 {
            for j2 in 0..self.n2 {
                let k = j1 * self.n2 + j2;
                spec[k] = if self.is_unknown(j1, j2) && self.symbol[k].norm() > 0.0 {
                    spec[k] / self.symbol[k]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        r.with_values(spectral::inverse_real(&spec, self.n1, self.n2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iters: usize,
    /// Largest number of grid points for which the dense fallback is tried.
    pub dense_fallback_max: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { rel_tol: 1e-11, abs_tol: 1e-15, restart: 60, max_iters: 600, dense_fallback_max: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearStats {
    pub iterations: usize,
    pub residual: f64,
    pub dense: bool,
    /// Mean removed from the right-hand side before solving.
    pub discarded_mean: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`, starting from zero.
/// Returns the solution, iteration count, final residual norm and history.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    opts: &LinearOptions,
) -> (Vec<f64>, usize, f64, Vec<f64>, bool) {
    let n = b.len();
    let bnorm = norm2(b);
    let target = (opts.rel_tol * bnorm).max(opts.abs_tol);
    let mut x = vec![0.0; n];
    let mut history = vec![bnorm];
    if bnorm <= target {
        return (x, 0, bnorm, history, true);
    }
    let mut total = 0;
    let mut r = b.to_vec();
    let mut beta = bnorm;
    while total < opts.max_iters {
        let m = opts.restart.min(opts.max_iters - total);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        v.push(r.iter().map(|x| x / beta).collect());
        let mut k_used = 0;
        for k in 0..m {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= h[i][k] * vj;
                }
            }
            // Second Gram-Schmidt pass for stability.
            for i in 0..=k {
                let c = dot(&w, &v[i]);
                h[i][k] += c;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= c * vj;
                }
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let tmp = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = tmp;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            let hk1 = h[k + 1][k];
            h[k][k] = cs[k] * h[k][k] + sn[k] * hk1;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            history.push(g[k + 1].abs());
            if g[k + 1].abs() <= target {
                break;
            }
            let nw = norm2(&w);
            if nw == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / nw).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        beta = norm2(&r);
        if beta <= target {
            return (x, total, beta, history, true);
        }
        if k_used == 0 {
            break;
        }
    }
    (x, total, beta, history, false)
}

impl LinearizedOperator {
    /// Solves `L δ = rhs` for `δ` in the unknown subspace. The right side is
    /// projected first; the removed mean is reported.
    pub fn solve(&self, rhs: &TorusField, opts: &LinearOptions) -> Result<(TorusField, LinearStats), GmaError> {
        let discarded_mean = rhs.mean();
        let b = project(rhs);
        let like = b.clone();
        let apply = |x: &[f64]| self.apply(&like.with_values(x.to_vec())).values().to_vec();
        let pre = |x: &[f64]| self.precondition(&like.with_values(x.to_vec())).values().to_vec();
        let (x, iters, res, history, ok) = gmres(apply, pre, b.values(), opts);
        if ok {
            return Ok((
                project(&like.with_values(x)),
                LinearStats { iterations: iters, residual: res, dense: false, discarded_mean },
            ));
        }
        if b.len() <= opts.dense_fallback_max {
            log::warn!("GMRES stagnated at {res:e} after {iters} iterations; using dense LU");
            let x = self.dense_solve(&b)?;
            let res = norm2((&self.apply(&x) - &b).values());
            return Ok((x, LinearStats { iterations: iters, residual: res, dense: true, discarded_mean }));
        }
        Err(GmaError::LinearStagnation { history })
    }

    /// Direct solve of `P L P + (I - P)` with LU factorization.
    pub fn dense_solve(&self, b: &TorusField) -> Result<TorusField, GmaError> {
        let n = b.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let ej = b.with_values(unit.clone());
            let pe = project(&ej);
            let col = &self.apply(&pe) + &(&ej - &pe);
            for i in 0..n {
                a[(i, j)] = col.values()[i];
            }
            unit[j] = 0.0;
        }
        let x = a
            .lu()
            .solve(&DVector::from_column_slice(b.values()))
            .ok_or_else(|| GmaError::Numerical("dense linearized system is singular".into()))?;
        Ok(project(&b.with_values(x.as_slice().to_vec())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(n: usize) -> GmaProblem {
        GmaProblem::monge_ampere([[1.0, 0.0], [0.0, 1.0]], TorusField::zeros(n, n, Scheme::Spectral))
    }

    #[test]
    fn laplacian_at_zero() {
        let pb = flat(32);
        let p = TorusField::zeros(32, 32, Scheme::Spectral);
        let op = LinearizedOperator::new(&pb, &p, 1.0);
        let rhs = TorusField::from_fn(32, 32, Scheme::Spectral, |x, _| (2.0 * PI * x).cos());
        let (d, _) = op.solve(&rhs, &LinearOptions::default()).unwrap();
        assert!((&d - &rhs.scale(-1.0 / (4.0 * PI * PI))).max_abs() < 1e-14);
        let (z, _) = op.solve(&TorusField::zeros(32, 32, Scheme::Spectral), &LinearOptions::default()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn round_trip_with_lower_order_terms() {
        for scheme in [Scheme::Spectral, Scheme::Fd4] {
            let mut pb = flat(32);
            pb.f = pb.f.clone().with_scheme(scheme);
            pb.a = 1.3;
            pb.c = -0.2;
            pb.l = [[0.7, 0.0], [0.0, 0.0]];
            pb.m = [[0.0, 0.0], [0.0, -0.4]];
            let p = TorusField::from_fn(32, 32, scheme, |x, y| 0.01 * (2.0 * PI * x).sin() * (4.0 * PI * y).cos());
            let p = project(&p);
            let op = LinearizedOperator::new(&pb, &p, 1.0);
            let rhs = project(&TorusField::from_fn(32, 32, scheme, |x, y| (2.0 * PI * (x + y)).sin() + x * (1.0 - x)));
            let (d, st) = op.solve(&rhs, &LinearOptions::default()).unwrap();
            assert!((&op.apply(&d) - &rhs).max_abs() < 1e-9, "{scheme} {st:?}");
            let dense = op.dense_solve(&rhs).unwrap();
            assert!((&dense - &d).max_abs() < 1e-9);
        }
    }
}
