//! Brute-force reference implementations for small baths.
//!
//! [`ConfigurationState`] tracks one probability per spin configuration
//! (`2^N` of them, no degeneracy bookkeeping); [`dense`] propagates the full
//! probe+bath density matrix. Neither shares code with the distribution
//! engine beyond the final coarse-graining used for comparisons.

pub mod dense;
mod selfcheck;

pub use selfcheck::{run_selfcheck, CheckResult, SelfCheckOptions, SELFCHECK_LENGTH, SELFCHECK_SPINS};

use crate::bath_model::{Bin, FrequencyDistribution, Multiplicity};
use crate::measurement_kernel::ProbeOutcome;
use crate::observables::{CurveMetadata, FidCurve};
use thiserror::Error;

/// Largest bath the configuration oracle accepts.
pub const MAX_SPINS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle handles at most {max} spins, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("outcome has zero probability")]
    Forbidden,
    #[error("no couplings")]
    Empty,
}

/// Probability of every sign configuration `s ∈ {±1}^N`, bit `k` of the
/// index set meaning `s_k = +1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationState {
    couplings: Vec<f64>,
    probabilities: Vec<f64>,
    omegas: Vec<f64>,
}

impl ConfigurationState {
    /// Uniform distribution over all configurations.
    pub fn thermal(couplings: &[f64]) -> Result<Self, OracleError> {
        let n = couplings.len();
        if n == 0 {
            return Err(OracleError::Empty);
        }
        if n > MAX_SPINS {
            return Err(OracleError::TooLarge { n, max: MAX_SPINS });
        }
        let count = 1usize << n;
        let omegas = (0..count)
            .map(|c| {
                couplings
                    .iter()
                    .enumerate()
                    .map(|(k, g)| if c >> k & 1 == 1 { 0.5 * g } else { -0.5 * g })
                    .sum()
            })
            .collect();
        Ok(ConfigurationState {
            couplings: couplings.to_vec(),
            probabilities: vec![1.0 / count as f64; count],
            omegas,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.couplings.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Groups configurations with equal eigenvalue into bins.
    pub fn coarse_grain(&self) -> FrequencyDistribution {
        let g_bar = self.couplings.iter().map(|g| g * g).sum::<f64>().sqrt();
        let bins = self
            .omegas
            .iter()
            .zip(&self.probabilities)
            .map(|(&omega, &weight)| Bin { omega, weight, multiplicity: Multiplicity::ONE })
            .collect();
        FrequencyDistribution::from_bins(bins, self.n_spins(), g_bar).expect("oracle state is valid")
    }
}

/// Per-configuration `cos²`/`sin²` weighting and renormalization.
pub fn oracle_update(
    state: &ConfigurationState,
    tau: f64,
    outcome: ProbeOutcome,
) -> Result<(ConfigurationState, f64), OracleError> {
    let weighted: Vec<f64> = state
        .probabilities
        .iter()
        .zip(&state.omegas)
        .map(|(p, w)| {
            let phase = w * tau;
            let amp = match outcome {
                ProbeOutcome::Plus => phase.cos(),
                ProbeOutcome::Minus => phase.sin(),
            };
            p * amp * amp
        })
        .collect();
    let total: f64 = weighted.iter().sum();
    if !(total > 0.0) {
        return Err(OracleError::Forbidden);
    }
    Ok((
        ConfigurationState {
            couplings: state.couplings.clone(),
            probabilities: weighted.into_iter().map(|p| p / total).collect(),
            omegas: state.omegas.clone(),
        },
        total,
    ))
}

/// Applies a whole string, returning the product of step probabilities.
pub fn oracle_trajectory(
    state: &ConfigurationState,
    tau: f64,
    outcomes: &[ProbeOutcome],
) -> Result<(ConfigurationState, f64), OracleError> {
    let mut current = state.clone();
    let mut probability = 1.0;
    for &o in outcomes {
        let (next, p) = oracle_update(&current, tau, o)?;
        current = next;
        probability *= p;
    }
    Ok((current, probability))
}

/// `C(t) = Σ_c p_c cos(2ω_c t)`.
pub fn oracle_fid(state: &ConfigurationState, times: &[f64]) -> FidCurve {
    let coherence = times
        .iter()
        .map(|&t| {
            state
                .probabilities
                .iter()
                .zip(&state.omegas)
                .map(|(p, w)| p * (2.0 * w * t).cos())
                .sum()
        })
        .collect();
    FidCurve {
        times: times.to_vec(),
        coherence,
        metadata: CurveMetadata { source: "configuration oracle".into(), ..Default::default() },
    }
}

/// `Σ_c p_c²`.
pub fn oracle_purity(state: &ConfigurationState) -> f64 {
    state.probabilities.iter().map(|p| p * p).sum()
}
