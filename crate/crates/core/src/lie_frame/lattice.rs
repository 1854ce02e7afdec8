//! Lattices of the Sol³ × S¹ examples.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::LieError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolLattice {
    pub n: u32,
    pub sigma: f64,
    pub delta: f64,
    /// Generators `(1, 1)` and `(σ, 1/σ)` of the lattice in the plane.
    pub lattice_vectors: [[f64; 2]; 2],
}

impl SolLattice {
    /// Largest entry of `diag(e^δ, e^-δ) - P M P⁻¹` with `P` the generator
    /// matrix and `M = (0 -1; 1 n)` the integer monodromy.
    pub fn conjugation_residual(&self) -> f64 {
        let s = self.sigma;
        let p = Matrix2::new(1.0, s, 1.0, 1.0 / s);
        let m = Matrix2::new(0.0, -1.0, 1.0, self.n as f64);
        let d = Matrix2::new(self.delta.exp(), 0.0, 0.0, (-self.delta).exp());
        let pinv = p.try_inverse().expect("generators independent");
        (d - p * m * pinv).abs().max()
    }
}

/// `σ` is the larger root of `σ² - nσ + 1 = 0` and `δ = log σ`.
pub fn sol_lattice(n: u32) -> Result<SolLattice, LieError> {
    if !(3..=5).contains(&n) {
        return Err(LieError::UnsupportedLattice(n));
    }
    let nf = n as f64;
    let sigma = (nf + (nf * nf - 4.0).sqrt()) / 2.0;
    Ok(SolLattice { n, sigma, delta: sigma.ln(), lattice_vectors: [[1.0, 1.0], [sigma, 1.0 / sigma]] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_and_conjugation() {
        let l3 = sol_lattice(3).unwrap();
        assert!((l3.sigma - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((l3.sigma - 2.6180339887).abs() < 1e-10);
        assert!((l3.delta - 0.9624236501).abs() < 1e-10);
        let l4 = sol_lattice(4).unwrap();
        assert!((l4.sigma - (2.0 + 3f64.sqrt())).abs() < 1e-15);
        for n in 3..=5 {
            assert!(sol_lattice(n).unwrap().conjugation_residual() < 1e-12);
        }
        assert!(sol_lattice(2).is_err());
        assert!(sol_lattice(6).is_err());
    }
}
