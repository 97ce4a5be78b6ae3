//! Full probe+bath density-matrix propagation for a handful of spins.
//!
//! Builds `H = |e⟩⟨e| ⊗ B − |g⟩⟨g| ⊗ B` with `B = Σ_k g⃗_k·σ⃗_k / 2` from
//! Pauli matrices, exponentiates it with the generic matrix exponential and
//! measures the probe in `|±⟩` by explicit projection and partial trace.
//! Nothing here knows about eigenvalue distributions, so agreement with the
//! engine checks the vector reduction and the factor-of-two conventions.

use super::OracleError;
use crate::measurement_kernel::ProbeOutcome;
use nalgebra::{Complex, DMatrix};

type C64 = Complex<f64>;

/// Densest bath the matrix oracle builds (`2^(N+1)` = 256 dimensional).
pub const MAX_DENSE_SPINS: usize = 7;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

fn pauli() -> [DMatrix<C64>; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    [
        DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        DMatrix::from_row_slice(2, 2, &[one, z, z, c(-1.0, 0.0)]),
    ]
}

/// `op` acting on site `k` of an `n`-site register.
fn embed(op: &DMatrix<C64>, k: usize, n: usize) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::identity(1, 1);
    for site in 0..n {
        let factor = if site == k { op.clone() } else { DMatrix::identity(2, 2) };
        out = out.kronecker(&factor);
    }
    out
}

/// Bath density matrix plus the fixed bath field operator.
#[derive(Clone, Debug)]
pub struct DenseOracle {
    n_spins: usize,
    field: DMatrix<C64>,
    rho_bath: DMatrix<C64>,
}

impl DenseOracle {
    /// Maximally mixed bath; couplings are 3-vectors in rad/s.
    pub fn thermal(couplings: &[[f64; 3]]) -> Result<Self, OracleError> {
        let n = couplings.len();
        if n == 0 {
            return Err(OracleError::Empty);
        }
        if n > MAX_DENSE_SPINS {
            return Err(OracleError::TooLarge { n, max: MAX_DENSE_SPINS });
        }
        let dim = 1usize << n;
        let sigma = pauli();
        let mut field = DMatrix::<C64>::zeros(dim, dim);
        for (k, g) in couplings.iter().enumerate() {
            for (axis, s) in sigma.iter().enumerate() {
                if g[axis] != 0.0 {
                    field += embed(s, k, n) * c(0.5 * g[axis], 0.0);
                }
            }
        }
        let rho_bath = DMatrix::<C64>::identity(dim, dim) / c(dim as f64, 0.0);
        Ok(DenseOracle { n_spins: n, field, rho_bath })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn bath_state(&self) -> &DMatrix<C64> {
        &self.rho_bath
    }

    /// Joint propagator `exp(−iHt)` over probe ⊗ bath, probe first.
    fn propagator(&self, t: f64) -> DMatrix<C64> {
        let probe_z = &pauli()[2];
        let h = probe_z.kronecker(&self.field);
        (h * c(0.0, -t)).exp()
    }

    /// Probe in `|+⟩`, bath in the current state, evolved for `t`.
    fn evolved(&self, t: f64) -> DMatrix<C64> {
        let half = c(0.5, 0.0);
        let plus = DMatrix::from_element(2, 2, half);
        let joint = plus.kronecker(&self.rho_bath);
        let u = self.propagator(t);
        &u * joint * u.adjoint()
    }

    /// `⟨σ_x⟩` of the probe after free evolution for each time.
    pub fn fid(&self, times: &[f64]) -> Vec<f64> {
        let sx = embed(&pauli()[0], 0, 1).kronecker(&DMatrix::identity(self.dim(), self.dim()));
        times.iter().map(|&t| (&sx * self.evolved(t)).trace().re).collect()
    }

    fn dim(&self) -> usize {
        1 << self.n_spins
    }

    /// Evolves for `tau`, projects the probe on the outcome, traces it out
    /// and returns the outcome probability.
    pub fn measure(&mut self, tau: f64, outcome: ProbeOutcome) -> Result<f64, OracleError> {
        let sign = match outcome {
            ProbeOutcome::Plus => 1.0,
            ProbeOutcome::Minus => -1.0,
        };
        let proj = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5 * sign, 0.0), c(0.5 * sign, 0.0), c(0.5, 0.0)]);
        let d = self.dim();
        let p_full = proj.kronecker(&DMatrix::identity(d, d));
        let projected = &p_full * self.evolved(tau) * &p_full;
        let mut reduced = DMatrix::<C64>::zeros(d, d);
        for a in 0..2 {
            reduced += projected.view((a * d, a * d), (d, d));
        }
        let p = reduced.trace().re;
        if !(p > 1e-300) {
            return Err(OracleError::Forbidden);
        }
        self.rho_bath = reduced / c(p, 0.0);
        Ok(p)
    }

    /// `Tr ρ_B²`.
    pub fn purity(&self) -> f64 {
        (&self.rho_bath * &self.rho_bath).trace().re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spin_precession() {
        let o = DenseOracle::thermal(&[[0.0, 0.0, 2.0]]).unwrap();
        let times = [0.0, 0.4, 1.3];
        for (t, c) in times.iter().zip(o.fid(&times)) {
            // ω = ±1, splitting 2
            assert!((c - (2.0 * t).cos()).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn transverse_coupling_is_equivalent() {
        let z = DenseOracle::thermal(&[[0.0, 0.0, 1.5], [0.0, 0.0, 0.7]]).unwrap();
        let tilted = DenseOracle::thermal(&[[1.5, 0.0, 0.0], [0.0, 0.42, 0.56]]).unwrap();
        let times: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
        for (a, b) in z.fid(&times).iter().zip(tilted.fid(&times)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_probabilities_sum_to_one() {
        let base = DenseOracle::thermal(&[[0.3, 0.0, 1.0], [0.0, 0.0, 0.8]]).unwrap();
        let mut a = base.clone();
        let mut b = base.clone();
        let pa = a.measure(0.9, ProbeOutcome::Plus).unwrap();
        let pb = b.measure(0.9, ProbeOutcome::Minus).unwrap();
        assert!((pa + pb - 1.0).abs() < 1e-12);
        assert!(a.purity() > base.purity());
        assert!((a.bath_state().trace().re - 1.0).abs() < 1e-12);
    }
}
