//! Homogeneous baths labelled by collective magnetization `j`.

use super::{Bin, BathError, FrequencyDistribution, Multiplicity};
use serde::{Deserialize, Serialize};

/// Weights over `j ∈ {-N/2, …, N/2}` for a bath of `N` spins sharing one
/// coupling `g`. Level `j` has degeneracy `binomial(N, N/2 + j)` and bath
/// field eigenvalue `g·j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveDistribution {
    n_spins: usize,
    coupling: f64,
    /// Indexed by `k = j + N/2`.
    weights: Vec<f64>,
}

impl CollectiveDistribution {
    /// Exact depolarized bath: `P_j = binomial(N, N/2 + j) / 2^N`.
    pub fn binomial(n_spins: usize, coupling: f64) -> Result<Self, BathError> {
        check_coupling(n_spins, coupling)?;
        let ln_total = n_spins as f64 * std::f64::consts::LN_2;
        let weights = (0..=n_spins as u64)
            .map(|k| match Multiplicity::binomial(n_spins as u64, k) {
                Multiplicity::Exact(c) => c as f64 * 2f64.powi(-(n_spins as i32)),
                m => (m.ln() - ln_total).exp(),
            })
            .collect();
        Ok(CollectiveDistribution { n_spins, coupling, weights })
    }

    /// Arbitrary non-negative weights, renormalized.
    pub fn from_weights(n_spins: usize, coupling: f64, weights: Vec<f64>) -> Result<Self, BathError> {
        check_coupling(n_spins, coupling)?;
        if weights.len() != n_spins + 1 {
            return Err(BathError::InvalidDistribution(format!(
                "expected {} weights, got {}",
                n_spins + 1,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BathError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(BathError::InvalidDistribution("total weight is zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(CollectiveDistribution { n_spins, coupling, weights })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Magnetization label of index `k`.
    pub fn j(&self, k: usize) -> f64 {
        k as f64 - 0.5 * self.n_spins as f64
    }

    pub fn degeneracy(&self, k: usize) -> Multiplicity {
        Multiplicity::binomial(self.n_spins as u64, k as u64)
    }

    pub fn mean_j(&self) -> f64 {
        self.weights.iter().enumerate().map(|(k, w)| w * self.j(k)).sum()
    }

    pub fn variance_j(&self) -> f64 {
        let mean = self.mean_j();
        self.weights.iter().enumerate().map(|(k, w)| w * (self.j(k) - mean).powi(2)).sum()
    }

    pub fn to_frequency_distribution(&self) -> FrequencyDistribution {
        let bins = self
            .weights
            .iter()
            .enumerate()
            .map(|(k, &weight)| Bin {
                omega: self.coupling * self.j(k),
                weight,
                multiplicity: self.degeneracy(k),
            })
            .collect();
        FrequencyDistribution::from_canonical(
            bins,
            self.n_spins,
            self.coupling * (self.n_spins as f64).sqrt(),
            0.0,
            Multiplicity::Exact(0),
        )
    }
}

fn check_coupling(n_spins: usize, coupling: f64) -> Result<(), BathError> {
    if n_spins == 0 {
        return Err(BathError::EmptyCouplings);
    }
    if !(coupling.is_finite() && coupling > 0.0) {
        return Err(BathError::InvalidCoupling { index: 0, value: coupling });
    }
    Ok(())
}

/// Gaussian approximation to the depolarized collective distribution,
/// renormalized on the discrete `j` grid.
///
/// The weights are `exp(-(2j)²/2N)`: the exponent is written for the
/// Pauli-scale magnetization `2j`, whose variance over the depolarized
/// bath is `N`. With spin-1/2 labels the variance of `j` is `N/4`.
pub fn gaussian_j_distribution(n_spins: usize, coupling: f64) -> Result<CollectiveDistribution, BathError> {
    if n_spins < 2 || !n_spins.is_multiple_of(2) {
        return Err(BathError::InvalidSpinCount(n_spins));
    }
    let n = n_spins as f64;
    let weights = (0..=n_spins)
        .map(|k| {
            let pauli_j = 2.0 * (k as f64 - 0.5 * n);
            (-pauli_j * pauli_j / (2.0 * n)).exp()
        })
        .collect();
    CollectiveDistribution::from_weights(n_spins, coupling, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_small() {
        assert_eq!(gaussian_j_distribution(3, 1.0), Err(BathError::InvalidSpinCount(3)));
        assert_eq!(gaussian_j_distribution(0, 1.0), Err(BathError::InvalidSpinCount(0)));
        assert!(gaussian_j_distribution(2, 1.0).is_ok());
    }

    #[test]
    fn gaussian_is_symmetric_and_normalized() {
        let cd = gaussian_j_distribution(100, 1.0).unwrap();
        let w = cd.weights();
        let (argmax, _) = w.iter().enumerate().fold((0, 0.0), |a, (k, &v)| if v > a.1 { (k, v) } else { a });
        assert_eq!(cd.j(argmax), 0.0);
        for k in 0..=100 {
            assert_eq!(w[k], w[100 - k]);
        }
        let small = gaussian_j_distribution(4, 1.0).unwrap();
        assert!((small.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_spin_mapping() {
        let fd = CollectiveDistribution::binomial(2, 5.0).unwrap().to_frequency_distribution();
        let omegas: Vec<f64> = fd.omegas().collect();
        assert_eq!(omegas, vec![-5.0, 0.0, 5.0]);
        assert_eq!(fd.bins()[1].multiplicity, Multiplicity::Exact(2));
    }

    #[test]
    fn from_weights_validates_length() {
        assert!(CollectiveDistribution::from_weights(2, 1.0, vec![1.0, 1.0]).is_err());
        assert!(CollectiveDistribution::from_weights(2, 1.0, vec![1.0, -1.0, 1.0]).is_err());
    }
}
