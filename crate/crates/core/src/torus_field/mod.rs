//! Biperiodic scalar fields on the unit square `[0,1)^2`.
//!
//! A [`TorusField`] stores one fundamental domain sampled at `(i/n1, j/n2)`;
//! the seam row and column are never duplicated, so periodicity is structural.
//! Values are row-major with axis 1 (the first base coordinate) as the slow index.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod io;
pub mod spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Spectral,
    Fd4,
}

impl std::str::FromStr for Scheme {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spectral" => Ok(Scheme::Spectral),
            "fd4" => Ok(Scheme::Fd4),
            other => Err(FieldError::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Spectral => write!(f, "spectral"),
            Scheme::Fd4 => write!(f, "fd4"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    One,
    Two,
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid size {0} not supported (need a power of two >= 4)")]
    InvalidGrid(usize),
    #[error("grid mismatch: {0}x{1} vs {2}x{3}")]
    GridMismatch(usize, usize, usize, usize),
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("Poisson problem on the torus needs a zero-mean source (mean = {mean:e})")]
    NonZeroMean { mean: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean tolerance accepted by [`TorusField::poisson_solve`], relative to `max(1, |q|_inf)`.
pub const POISSON_MEAN_TOL: f64 = 1e-10;

pub fn check_grid(n: usize) -> Result<(), FieldError> {
    if n >= 4 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(FieldError::InvalidGrid(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    n1: usize,
    n2: usize,
    scheme: Scheme,
    values: Vec<f64>,
}

/// First and second derivatives of one field, computed with a single transform.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub d1: TorusField,
    pub d2: TorusField,
    pub d11: TorusField,
    pub d22: TorusField,
    pub d12: TorusField,
}

impl TorusField {
    pub fn zeros(n1: usize, n2: usize, scheme: Scheme) -> Self {
        Self::constant(n1, n2, scheme, 0.0)
    }

    pub fn constant(n1: usize, n2: usize, scheme: Scheme, c: f64) -> Self {
        TorusField { n1, n2, scheme, values: vec![c; n1 * n2] }
    }

    /// Samples `f(x, y)` at the grid points `(i/n1, j/n2)`.
    pub fn from_fn(n1: usize, n2: usize, scheme: Scheme, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            let x = i as f64 / n1 as f64;
            for j in 0..n2 {
                values.push(f(x, j as f64 / n2 as f64));
            }
        }
        TorusField { n1, n2, scheme, values }
    }

    pub fn from_values(n1: usize, n2: usize, scheme: Scheme, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != n1 * n2 {
            return Err(FieldError::GridMismatch(n1, n2, values.len(), 1));
        }
        Ok(TorusField { n1, n2, scheme, values })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n2 + j]
    }
    pub fn same_grid(&self, other: &TorusField) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2
    }
    pub fn ensure_same_grid(&self, other: &TorusField) -> Result<(), FieldError> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(FieldError::GridMismatch(self.n1, self.n2, other.n1, other.n2))
        }
    }
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TorusField {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &TorusField, f: impl Fn(f64, f64) -> f64) -> TorusField {
        assert!(self.same_grid(other), "grid mismatch");
        self.with_values(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// A field on the same grid and scheme carrying `values`.
    pub fn with_values(&self, values: Vec<f64>) -> TorusField {
        assert_eq!(values.len(), self.n1 * self.n2);
        TorusField { n1: self.n1, n2: self.n2, scheme: self.scheme, values }
    }

    pub fn scale(&self, c: f64) -> TorusField {
        self.map(|v| v * c)
    }
    pub fn add_scalar(&self, c: f64) -> TorusField {
        self.map(|v| v + c)
    }
    pub fn exp(&self) -> TorusField {
        self.map(f64::exp)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Trapezoidal rule over the unit fundamental domain; on a periodic grid
    /// this is the mean of the samples and is spectrally accurate.
    /// Summed as deviations from the first sample so constants integrate exactly.
    pub fn integrate(&self) -> f64 {
        let v0 = self.values[0];
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &v in &self.values {
            let d = v - v0;
            let t = sum + d;
            comp += if sum.abs() >= d.abs() { (sum - t) + d } else { (d - t) + sum };
            sum = t;
        }
        v0 + (sum + comp) / self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.integrate()
    }

    pub fn remove_mean(&self) -> TorusField {
        let m = self.mean();
        self.add_scalar(-m)
    }

    /// Derivative of order 1 or 2 along one axis.
    pub fn derivative(&self, axis: Axis, order: u8) -> TorusField {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        match self.scheme {
            Scheme::Spectral => {
                let spec = spectral::forward(&self.values, self.n1, self.n2);
                let out = self.apply_symbol(&spec, |j1, j2| {
                    let (j, n) = match axis {
                        Axis::One => (j1, self.n1),
                        Axis::Two => (j2, self.n2),
                    };
                    if order == 1 {
                        spectral::first_symbol(j, n, Scheme::Spectral)
                    } else {
                        Complex64::new(spectral::second_symbol(j, n, Scheme::Spectral), 0.0)
                    }
                });
                self.with_values(out)
            }
            Scheme::Fd4 => self.fd4(axis, order),
        }
    }

    /// Mixed derivative along both axes.
    pub fn derivative_mixed(&self) -> TorusField {
        match self.scheme {
            Scheme::Spectral => {
                let spec = spectral::forward(&self.values, self.n1, self.n2);
                let out = self.apply_symbol(&spec, |j1, j2| {
                    spectral::first_symbol(j1, self.n1, Scheme::Spectral)
                        * spectral::first_symbol(j2, self.n2, Scheme::Spectral)
                });
                self.with_values(out)
            }
            Scheme::Fd4 => self.fd4(Axis::One, 1).fd4(Axis::Two, 1),
        }
    }

    /// All first and second derivatives.
    pub fn derivatives(&self) -> Derivatives {
        match self.scheme {
            Scheme::Spectral => {
                let spec = spectral::forward(&self.values, self.n1, self.n2);
                let (n1, n2) = (self.n1, self.n2);
                let s1 = |j: usize| spectral::first_symbol(j, n1, Scheme::Spectral);
                let s2 = |j: usize| spectral::first_symbol(j, n2, Scheme::Spectral);
                let f = |sym: &dyn Fn(usize, usize) -> Complex64| self.with_values(self.apply_symbol(&spec, sym));
                Derivatives {
                    d1: f(&|a, _| s1(a)),
                    d2: f(&|_, b| s2(b)),
                    d11: f(&|a, _| Complex64::new(spectral::second_symbol(a, n1, Scheme::Spectral), 0.0)),
                    d22: f(&|_, b| Complex64::new(spectral::second_symbol(b, n2, Scheme::Spectral), 0.0)),
                    d12: f(&|a, b| s1(a) * s2(b)),
                }
            }
            Scheme::Fd4 => {
                let d1 = self.fd4(Axis::One, 1);
                let d12 = d1.fd4(Axis::Two, 1);
                Derivatives {
                    d2: self.fd4(Axis::Two, 1),
                    d11: self.fd4(Axis::One, 2),
                    d22: self.fd4(Axis::Two, 2),
                    d1,
                    d12,
                }
            }
        }
    }

    /// Five-point Laplacian-type operator `d11 + d22` in the field's scheme.
    pub fn laplacian(&self) -> TorusField {
        &self.derivative(Axis::One, 2) + &self.derivative(Axis::Two, 2)
    }

    fn apply_symbol(&self, spec: &[Complex64], sym: impl Fn(usize, usize) -> Complex64) -> Vec<f64> {
        let mut s = spec.to_vec();
        for j1 in 0..self.n1 {
            for j2 in 0..self.n2 {
                s[j1 * self.n2 + j2] *= sym(j1, j2);
            }
        }
        spectral::inverse_real(&s, self.n1, self.n2)
    }

    fn fd4(&self, axis: Axis, order: u8) -> TorusField {
        let (n1, n2) = (self.n1, self.n2);
        let n = match axis {
            Axis::One => n1,
            Axis::Two => n2,
        };
        let h = 1.0 / n as f64;
        let at = |i: usize, j: usize, off: i64| -> f64 {
            match axis {
                Axis::One => self.values[((i as i64 + off).rem_euclid(n1 as i64) as usize) * n2 + j],
                Axis::Two => self.values[i * n2 + (j as i64 + off).rem_euclid(n2 as i64) as usize],
            }
        };
        let mut out = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                let v = if order == 1 {
                    (-at(i, j, 2) + 8.0 * at(i, j, 1) - 8.0 * at(i, j, -1) + at(i, j, -2)) / (12.0 * h)
                } else {
                    (-at(i, j, 2) + 16.0 * at(i, j, 1) - 30.0 * at(i, j, 0) + 16.0 * at(i, j, -1)
                        - at(i, j, -2))
                        / (12.0 * h * h)
                };
                out.push(v);
            }
        }
        self.with_values(out)
    }

    /// Solves `Δφ = q` with `mean(φ) = 0` by inversion on Fourier modes, using
    /// the Laplacian symbol of the field's scheme.
    pub fn poisson_solve(&self) -> Result<TorusField, FieldError> {
        if !self.is_finite() {
            return Err(FieldError::NonFinite);
        }
        let mean = self.mean();
        if mean.abs() > POISSON_MEAN_TOL * self.max_abs().max(1.0) {
            return Err(FieldError::NonZeroMean { mean });
        }
        Ok(self.poisson_solve_unchecked())
    }

    /// Like [`poisson_solve`](Self::poisson_solve) but silently drops the mean
    /// of the source, i.e. solves `Δφ = q - mean(q)`.
    pub fn poisson_solve_unchecked(&self) -> TorusField {
        let spec = spectral::forward(&self.values, self.n1, self.n2);
        let (n1, n2, scheme) = (self.n1, self.n2, self.scheme);
        let out = self.apply_symbol(&spec, |j1, j2| {
            if j1 == 0 && j2 == 0 {
                return Complex64::new(0.0, 0.0);
            }
            let sym = spectral::second_symbol(j1, n1, scheme) + spectral::second_symbol(j2, n2, scheme);
            Complex64::new(1.0 / sym, 0.0)
        });
        self.with_values(out)
    }

    /// Returns `F + s` with `s = log(target / mean(e^F))`, so that
    /// `∫ e^{F+s} = target` over the unit domain. Also returns `s`.
    pub fn normalize_rhs(&self, target: f64) -> (TorusField, f64) {
        assert!(target > 0.0, "normalization target must be positive");
        let shift = (target / self.exp().mean()).ln();
        (self.add_scalar(shift), shift)
    }

    /// Removes Fourier content at the Nyquist rows/columns and the mean.
    pub fn project_band_limited(&self) -> TorusField {
        let spec = spectral::forward(&self.values, self.n1, self.n2);
        let (n1, n2) = (self.n1, self.n2);
        let out = self.apply_symbol(&spec, |j1, j2| {
            if (j1 == 0 && j2 == 0) || spectral::is_nyquist(j1, n1) || spectral::is_nyquist(j2, n2) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        self.with_values(out)
    }

    /// Samples the field after the integer change of variables
    /// `(x, y) -> M (x, y)` (mod 1). Exact on the grid when `M` is an integer
    /// matrix and `n1 == n2`.
    pub fn compose_integer_map(&self, m: [[i64; 2]; 2]) -> TorusField {
        assert_eq!(self.n1, self.n2, "integer remapping needs a square grid");
        let n = self.n1 as i64;
        let mut out = Vec::with_capacity(self.values.len());
        for i in 0..n {
            for j in 0..n {
                let a = (m[0][0] * i + m[0][1] * j).rem_euclid(n) as usize;
                let b = (m[1][0] * i + m[1][1] * j).rem_euclid(n) as usize;
                out.push(self.values[a * self.n2 + b]);
            }
        }
        self.with_values(out)
    }

    /// Trigonometric interpolation of a spectral field at an arbitrary point.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let spec = spectral::forward(&self.values, self.n1, self.n2);
        let factor = |j: usize, n: usize, t: f64| {
            let ph = 2.0 * PI * spectral::wavenumber(j, n) as f64 * t;
            if spectral::is_nyquist(j, n) {
                Complex64::new(ph.cos(), 0.0)
            } else {
                Complex64::new(ph.cos(), ph.sin())
            }
        };
        let mut acc = 0.0;
        for j1 in 0..self.n1 {
            let f1 = factor(j1, self.n1, x);
            for j2 in 0..self.n2 {
                acc += (spec[j1 * self.n2 + j2] * f1 * factor(j2, self.n2, y)).re;
            }
        }
        acc / (self.n1 * self.n2) as f64
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<'a> $tr<&'a TorusField> for &'a TorusField {
            type Output = TorusField;
            fn $m(self, rhs: &'a TorusField) -> TorusField {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
        impl $tr<TorusField> for TorusField {
            type Output = TorusField;
            fn $m(self, rhs: TorusField) -> TorusField {
                (&self).$m(&rhs)
            }
        }
        impl $tr<f64> for &TorusField {
            type Output = TorusField;
            fn $m(self, rhs: f64) -> TorusField {
                self.map(|a| a $op rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &TorusField {
    type Output = TorusField;
    fn neg(self) -> TorusField {
        self.map(|v| -v)
    }
}
