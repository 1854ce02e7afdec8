//! Laplacian estimate for `h` in the Hessian metric of the Kodaira–Thurston solution.

use serde::{Deserialize, Serialize};

use super::kt::{kt_constants, uv_gradient, uv_hessian};
use super::{CySolution, PipelineError};
use crate::lie_frame::AKFrame;
use crate::torus_field::{Axis, TorusField};
use crate::verifier::{Check, Report};

pub const TW_TOL: f64 = -1e-6;

/// `℘(B) = (tr B)² - 2 det B`, which equals `tr(B²)`.
pub fn wp(b: [[f64; 2]; 2]) -> f64 {
    let tr = b[0][0] + b[1][1];
    tr * tr - 2.0 * (b[0][0] * b[1][1] - b[0][1] * b[1][0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwReport {
    /// `min Δ̃h`, the Laplacian of `h` in the Hessian metric.
    pub min_laplacian_h: f64,
    /// `inf ΔF` in the `(u, v)` coordinates.
    pub inf_laplacian_f: f64,
    pub margin: f64,
    pub tolerance: f64,
    /// `max |2Δ̃h - ΔF - Δ_odd|` with `Δ_odd = ℘(H⁻¹H_u) + ℘(H⁻¹H_v)`.
    pub identity_residual: f64,
    pub min_wp: f64,
    pub passed: bool,
}

impl TwReport {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("Laplacian estimate");
        r.push(Check::at_least("min Δ̃h - inf ΔF", self.margin, self.tolerance));
        r.push(Check::at_least("min ℘", self.min_wp, -1e-12));
        r
    }
}

/// Checks `Δ̃h ≥ inf ΔF` on a Kodaira–Thurston solution and the pointwise
/// decomposition `2Δ̃h = ΔF + Δ_odd` with `Δ_odd ≥ 0`.
pub fn tw_estimate_check(sol: &CySolution) -> Result<TwReport, PipelineError> {
    let (Some(gma), Some(h)) = (&sol.gma, &sol.h) else {
        return Err(PipelineError::Invalid("Laplacian estimate needs a Kodaira–Thurston solution".into()));
    };
    tw_estimate(&sol.frame, &sol.f, &gma.p, h)
}

/// [`tw_estimate_check`] from the frame, `F`, the potential `p` and `h`.
pub fn tw_estimate(frame: &AKFrame, f: &TorusField, p: &TorusField, h: &TorusField) -> Result<TwReport, PipelineError> {
    let (a, _) = kt_constants(frame)?;
    let d = p.derivatives();
    let [huu, huv, hvv] = uv_hessian(&d, &a);
    let (huu, hvv) = (huu.add_scalar(1.0), hvv.add_scalar(1.0));
    let [h_uu, h_uv, h_vv] = uv_hessian(&h.derivatives(), &a);
    let [f_uu, _, f_vv] = uv_hessian(&f.derivatives(), &a);
    let lap_f = &f_uu + &f_vv;
    let derivs_uv = |g: &TorusField| uv_gradient(&g.derivative(Axis::One, 1), &g.derivative(Axis::Two, 1), &a);
    let (huu_u, huu_v) = derivs_uv(&huu);
    let (huv_u, huv_v) = derivs_uv(&huv);
    let (hvv_u, hvv_v) = derivs_uv(&hvv);

    let n = huu.len();
    let (mut min_lap, mut min_wp, mut resid) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for i in 0..n {
        let (p, q, r) = (huu.values()[i], huv.values()[i], hvv.values()[i]);
        let det = p * r - q * q;
        let inv = [[r / det, -q / det], [-q / det, p / det]];
        let mul = |m: [[f64; 2]; 2]| {
            let mut o = [[0.0; 2]; 2];
            for (x, row) in o.iter_mut().enumerate() {
                for (y, v) in row.iter_mut().enumerate() {
                    *v = inv[x][0] * m[0][y] + inv[x][1] * m[1][y];
                }
            }
            o
        };
        let hu = [[huu_u.values()[i], huv_u.values()[i]], [huv_u.values()[i], hvv_u.values()[i]]];
        let hv = [[huu_v.values()[i], huv_v.values()[i]], [huv_v.values()[i], hvv_v.values()[i]]];
        let (wu, wv) = (wp(mul(hu)), wp(mul(hv)));
        let lap_h = (r * h_uu.values()[i] - 2.0 * q * h_uv.values()[i] + p * h_vv.values()[i]) / det;
        min_lap = min_lap.min(lap_h);
        min_wp = min_wp.min(wu.min(wv));
        resid = resid.max((2.0 * lap_h - lap_f.values()[i] - wu - wv).abs());
    }
    let inf_f = lap_f.min();
    let margin = min_lap - inf_f;
    Ok(TwReport {
        min_laplacian_h: min_lap,
        inf_laplacian_f: inf_f,
        margin,
        tolerance: TW_TOL,
        identity_residual: resid,
        min_wp,
        passed: margin >= TW_TOL && min_wp >= -1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wp_is_trace_of_square_for_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (a, b, c): (f64, f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let v = wp([[a, c], [c, b]]);
            assert!(v >= 0.0);
            assert!((v - (a * a + b * b + 2.0 * c * c)).abs() <= 1e-12 * (1.0 + v));
        }
    }
}
