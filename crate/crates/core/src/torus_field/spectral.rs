//! 2-D discrete Fourier transforms on the periodic grid and derivative symbols.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Scheme;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Signed integer wavenumber of index `j` on a grid of size `n`.
///
/// For even `n` the Nyquist index `n/2` is returned as `n/2` (positive).
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[inline]
pub fn is_nyquist(j: usize, n: usize) -> bool {
    n.is_multiple_of(2) && j == n / 2
}

fn fft_rows(buf: &mut [Complex64], n_rows: usize, n_cols: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), n_rows * n_cols);
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(n_cols)
        } else {
            planner.plan_fft_forward(n_cols)
        };
        fft.process(buf);
    });
}

fn transpose(src: &[Complex64], n_rows: usize, n_cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for i in 0..n_rows {
        for j in 0..n_cols {
            out[j * n_rows + i] = src[i * n_cols + j];
        }
    }
    out
}

/// Forward transform of a real row-major `n1 x n2` array. No normalization.
pub fn forward(values: &[f64], n1: usize, n2: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_rows(&mut buf, n1, n2, false);
    let mut t = transpose(&buf, n1, n2);
    fft_rows(&mut t, n2, n1, false);
    transpose(&t, n2, n1)
}

/// Inverse transform, normalized by `1/(n1 n2)`, keeping the real part.
pub fn inverse_real(spec: &[Complex64], n1: usize, n2: usize) -> Vec<f64> {
    let mut buf = spec.to_vec();
    fft_rows(&mut buf, n1, n2, true);
    let mut t = transpose(&buf, n1, n2);
    fft_rows(&mut t, n2, n1, true);
    let scale = 1.0 / (n1 * n2) as f64;
    let mut out = vec![0.0; n1 * n2];
    for j in 0..n2 {
        for i in 0..n1 {
            out[i * n2 + j] = t[j * n1 + i].re * scale;
        }
    }
    out
}

/// Fourier symbol of the first derivative along one axis of length `n`
/// (unit period), for the given scheme. Imaginary unit included.
pub fn first_symbol(j: usize, n: usize, scheme: Scheme) -> Complex64 {
    let k = wavenumber(j, n) as f64;
    match scheme {
        Scheme::Spectral => {
            if is_nyquist(j, n) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * PI * k)
            }
        }
        Scheme::Fd4 => {
            let h = 1.0 / n as f64;
            let th = 2.0 * PI * k * h;
            Complex64::new(0.0, (8.0 * th.sin() - (2.0 * th).sin()) / (6.0 * h))
        }
    }
}

/// Fourier symbol of the second derivative along one axis (real, non-positive).
pub fn second_symbol(j: usize, n: usize, scheme: Scheme) -> f64 {
    let k = wavenumber(j, n) as f64;
    match scheme {
        Scheme::Spectral => -(2.0 * PI * k).powi(2),
        Scheme::Fd4 => {
            let h = 1.0 / n as f64;
            let th = 2.0 * PI * k * h;
            (-2.0 * (2.0 * th).cos() + 32.0 * th.cos() - 30.0) / (12.0 * h * h)
        }
    }
}
