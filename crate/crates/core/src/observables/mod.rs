//! Probe-visible quantities computed from a diagonal bath state.
//!
//! Frequency convention: the probe's `|e⟩` and `|g⟩` branches see bath
//! fields `±ω`, so the coherence rotates at the splitting `2ω`. Every
//! frequency reported as a probe oscillation (`omega_B`, spectra) is a
//! splitting.

mod fit;
mod spectrum;

pub use fit::{fit_aze, fit_gaussian_decay, AzeFitResult, FitError, GaussianFitResult};
pub use spectrum::{
    decoherence_exponent, kk_decoherence, splitting_spectrum, FilterFunction, KkError, SpectrumFunction,
};

use crate::bath_model::{FrequencyDistribution, Multiplicity};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Provenance of a curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    /// Measurement interval of the conditioning string, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Fitted Gaussian decay time, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_fit: Option<f64>,
}

/// Probe coherence `C(t) = ⟨σ_x⟩(t)` sampled on a time grid (seconds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidCurve {
    pub times: Vec<f64>,
    pub coherence: Vec<f64>,
    pub metadata: CurveMetadata,
}

impl FidCurve {
    /// Probability of finding the probe back in `|+⟩`.
    pub fn p_plus(&self) -> impl Iterator<Item = f64> + '_ {
        self.coherence.iter().map(|c| 0.5 * (1.0 + c))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t_us,coherence,p_plus`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_us,coherence,p_plus\n");
        for (t, c) in self.times.iter().zip(&self.coherence) {
            let _ = writeln!(out, "{},{},{}", t * 1e6, c, 0.5 * (1.0 + c));
        }
        out
    }
}

/// `C(t) = Σ w·cos(2ωt)`.
pub fn fid(dist: &FrequencyDistribution, times: &[f64]) -> FidCurve {
    let coherence = times
        .iter()
        .map(|&t| dist.bins().iter().map(|b| b.weight * (2.0 * b.omega * t).cos()).sum())
        .collect();
    FidCurve { times: times.to_vec(), coherence, metadata: CurveMetadata::default() }
}

/// Uniform grid of `points` samples on `[0, t_max]`.
pub fn time_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect(),
    }
}

/// `Tr ρ² = Σ w²/d` for a state maximally mixed inside each eigenspace.
pub fn purity(dist: &FrequencyDistribution) -> f64 {
    dist.bins().iter().map(|b| b.weight * b.weight * (-b.multiplicity.ln()).exp()).sum()
}

/// Von Neumann entropy in bits, `Σ w·log2(d/w)`.
pub fn entropy_bits(dist: &FrequencyDistribution) -> f64 {
    dist.bins()
        .iter()
        .filter(|b| b.weight > 0.0)
        .map(|b| b.weight * (b.multiplicity.log2() - b.weight.log2()))
        .sum()
}

pub(crate) fn purity_of(weights: &[f64], multiplicities: &[Multiplicity]) -> f64 {
    weights
        .iter()
        .zip(multiplicities)
        .map(|(w, m)| w * w * (-m.ln()).exp())
        .sum()
}

pub(crate) fn entropy_bits_of(weights: &[f64], multiplicities: &[Multiplicity]) -> f64 {
    weights
        .iter()
        .zip(multiplicities)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, m)| w * (m.log2() - w.log2()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath_model::{build_thermal_distribution, Bin, CouplingSet};

    fn thermal(n: usize) -> FrequencyDistribution {
        let c = CouplingSet::new((0..n).map(|k| 1.0 + 0.37 * k as f64).collect()).unwrap();
        build_thermal_distribution(&c, None).unwrap()
    }

    #[test]
    fn fid_starts_at_one() {
        let curve = fid(&thermal(6), &[0.0, 0.1]);
        assert!((curve.coherence[0] - 1.0).abs() < 1e-15);
        assert!(curve.coherence[1].abs() <= 1.0);
    }

    #[test]
    fn single_bin_is_pure_cosine() {
        let omega_b = 2.0 * std::f64::consts::PI * 200e3;
        let d = FrequencyDistribution::single(omega_b / 2.0, Multiplicity::ONE, 1, 1.0);
        let times = time_grid(20e-6, 101);
        let curve = fid(&d, &times);
        for (t, c) in times.iter().zip(&curve.coherence) {
            assert!((c - (omega_b * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_purity_and_entropy() {
        let d = thermal(10);
        assert!((purity(&d) - 2f64.powi(-10)).abs() < 1e-18);
        assert!((entropy_bits(&d) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_configuration_state() {
        let bins = vec![
            Bin { omega: -1.0, weight: 0.5, multiplicity: Multiplicity::ONE },
            Bin { omega: 1.0, weight: 0.5, multiplicity: Multiplicity::ONE },
        ];
        let d = FrequencyDistribution::from_bins(bins, 4, 1.0).unwrap();
        assert_eq!(purity(&d), 0.5);
        assert_eq!(entropy_bits(&d), 1.0);
        let pure = FrequencyDistribution::single(0.3, Multiplicity::ONE, 4, 1.0);
        assert_eq!(purity(&pure), 1.0);
        assert_eq!(entropy_bits(&pure), 0.0);
    }

    #[test]
    fn csv_has_units_header() {
        let d = FrequencyDistribution::single(0.0, Multiplicity::ONE, 1, 1.0);
        let csv = fid(&d, &[0.0, 1e-6]).to_csv();
        assert_eq!(csv, "t_us,coherence,p_plus\n0,1,1\n1,1,1\n");
    }
}
