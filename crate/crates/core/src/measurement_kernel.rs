//! Selective probe measurements as diagonal Kraus maps on the bath.
//!
//! The probe starts in `|+⟩`, evolves for `τ` under the conditional
//! propagator and is projected onto `|±⟩`. On the bath eigenspace with
//! eigenvalue `ω` the two Kraus operators act as `cos(ωτ)` (outcome 0,
//! `|+⟩`) and `i·sin(ωτ)` (outcome 1, `|−⟩`). Because they are diagonal in
//! the same basis they commute, so a string of outcomes depends only on its
//! counts.

use crate::bath_model::{Bin, FrequencyDistribution, Multiplicity};
use crate::observables;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Weights below this after renormalization are dropped.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Two eigenvalues are steady-state survivors together when their
/// single-step weights differ by less than this.
pub const SURVIVOR_TIE_TOLERANCE: f64 = 1e-9;

/// Result of one projective probe measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbeOutcome {
    /// `'0'`: projection onto `|+⟩`.
    #[serde(rename = "0")]
    Plus,
    /// `'1'`: projection onto `|−⟩`.
    #[serde(rename = "1")]
    Minus,
}

impl ProbeOutcome {
    pub fn bit(self) -> u8 {
        match self {
            ProbeOutcome::Plus => 0,
            ProbeOutcome::Minus => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(ProbeOutcome::Plus),
            1 => Some(ProbeOutcome::Minus),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ProbeOutcome::Plus => ProbeOutcome::Minus,
            ProbeOutcome::Minus => ProbeOutcome::Plus,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutcomeStringError {
    #[error("measurement interval must be positive and finite, got {0}")]
    InvalidInterval(f64),
    #[error("outcome strings contain only '0' and '1', found {0:?}")]
    InvalidSymbol(char),
    #[error("class with {ones} ones does not fit in {len} measurements")]
    InvalidClass { ones: usize, len: usize },
}

/// Ordered probe outcomes recorded at a fixed interval `tau` (seconds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeString {
    outcomes: Vec<ProbeOutcome>,
    tau: f64,
}

impl OutcomeString {
    pub fn new(outcomes: Vec<ProbeOutcome>, tau: f64) -> Result<Self, OutcomeStringError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(OutcomeStringError::InvalidInterval(tau));
        }
        Ok(OutcomeString { outcomes, tau })
    }

    /// Parses a string such as `"0010"`.
    pub fn parse(symbols: &str, tau: f64) -> Result<Self, OutcomeStringError> {
        let outcomes = symbols
            .chars()
            .map(|c| match c {
                '0' => Ok(ProbeOutcome::Plus),
                '1' => Ok(ProbeOutcome::Minus),
                other => Err(OutcomeStringError::InvalidSymbol(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(outcomes, tau)
    }

    pub fn uniform(outcome: ProbeOutcome, len: usize, tau: f64) -> Result<Self, OutcomeStringError> {
        Self::new(vec![outcome; len], tau)
    }

    /// Representative of the class with `ones` ones among `len` outcomes:
    /// the ones first, then the zeros.
    pub fn class(ones: usize, len: usize, tau: f64) -> Result<Self, OutcomeStringError> {
        if ones > len {
            return Err(OutcomeStringError::InvalidClass { ones, len });
        }
        let mut outcomes = vec![ProbeOutcome::Minus; ones];
        outcomes.resize(len, ProbeOutcome::Plus);
        Self::new(outcomes, tau)
    }

    pub fn outcomes(&self) -> &[ProbeOutcome] {
        &self.outcomes
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Number of `'1'` results.
    pub fn ones(&self) -> usize {
        self.outcomes.iter().filter(|&&o| o == ProbeOutcome::Minus).count()
    }

    pub fn zeros(&self) -> usize {
        self.len() - self.ones()
    }
}

impl fmt::Display for OutcomeString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            write!(f, "{}", o.bit())?;
        }
        Ok(())
    }
}

/// `cos²(ωτ)` for outcome 0, `sin²(ωτ)` for outcome 1.
pub fn kraus_weight(omega: f64, tau: f64, outcome: ProbeOutcome) -> f64 {
    let phase = omega * tau;
    match outcome {
        ProbeOutcome::Plus => phase.cos().powi(2),
        ProbeOutcome::Minus => phase.sin().powi(2),
    }
}

/// `ln kraus_weight`, `-inf` where the weight vanishes.
fn ln_kraus_weight(omega: f64, tau: f64, outcome: ProbeOutcome) -> f64 {
    let phase = omega * tau;
    let amplitude = match outcome {
        ProbeOutcome::Plus => phase.cos(),
        ProbeOutcome::Minus => phase.sin(),
    };
    2.0 * amplitude.abs().ln()
}

/// An outcome the current bath state cannot produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forbidden {
    /// Zero-based position in the string.
    pub step: usize,
    pub outcome: ProbeOutcome,
}

/// Renormalized post-measurement bath state with the Born probability of
/// the observed outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioned {
    pub distribution: FrequencyDistribution,
    pub probability: f64,
}

pub fn conditional_update(
    dist: &FrequencyDistribution,
    tau: f64,
    outcome: ProbeOutcome,
) -> Result<Conditioned, Forbidden> {
    let mut bins: Vec<Bin> = dist
        .bins()
        .iter()
        .map(|b| Bin { weight: b.weight * kraus_weight(b.omega, tau, outcome), ..*b })
        .collect();
    let probability: f64 = bins.iter().map(|b| b.weight).sum();
    if !(probability > 0.0) {
        return Err(Forbidden { step: 0, outcome });
    }
    let mut pruned = dist.pruned();
    bins.retain_mut(|b| {
        b.weight /= probability;
        if b.weight < UNDERFLOW_FLOOR {
            pruned = pruned + b.multiplicity;
            false
        } else {
            true
        }
    });
    Ok(Conditioned {
        distribution: FrequencyDistribution::from_canonical(
            bins,
            dist.n_spins(),
            dist.scale(),
            dist.ln_norm() + probability.ln(),
            pruned,
        ),
        probability,
    })
}

/// Outcome of conditioning on a whole string.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryResult {
    /// Final state, or the last valid state when a step was forbidden.
    pub distribution: FrequencyDistribution,
    /// Zero when a step was forbidden.
    pub success_probability: f64,
    pub ln_success_probability: f64,
    pub step_probabilities: Vec<f64>,
    pub forbidden: Option<Forbidden>,
}

impl TrajectoryResult {
    pub fn is_forbidden(&self) -> bool {
        self.forbidden.is_some()
    }
}

/// Sequential conditioning on every outcome of `string`.
pub fn apply_trajectory(dist: &FrequencyDistribution, string: &OutcomeString) -> TrajectoryResult {
    let mut current = dist.clone();
    let mut step_probabilities = Vec::with_capacity(string.len());
    let mut ln_p = 0.0;
    for (step, &outcome) in string.outcomes().iter().enumerate() {
        match conditional_update(&current, string.tau(), outcome) {
            Ok(c) => {
                ln_p += c.probability.ln();
                step_probabilities.push(c.probability);
                current = c.distribution;
            }
            Err(_) => {
                step_probabilities.push(0.0);
                return TrajectoryResult {
                    distribution: current,
                    success_probability: 0.0,
                    ln_success_probability: f64::NEG_INFINITY,
                    step_probabilities,
                    forbidden: Some(Forbidden { step, outcome }),
                };
            }
        }
    }
    TrajectoryResult {
        distribution: current,
        success_probability: ln_p.exp(),
        ln_success_probability: ln_p,
        step_probabilities,
        forbidden: None,
    }
}

/// Weights after a string with `ones` ones and `len - ones` zeros, aligned
/// with `dist.bins()` and normalized, together with the natural log of the
/// probability of any single such string. Computed in one shot in log space
/// as `cos^{2(len-ones)}(ωτ)·sin^{2·ones}(ωτ)`, so long strings cannot
/// underflow the intermediate products.
///
/// Returns `None` when the class is impossible.
pub fn class_weights(
    dist: &FrequencyDistribution,
    tau: f64,
    ones: usize,
    len: usize,
) -> Option<(Vec<f64>, f64)> {
    assert!(ones <= len, "class with {ones} ones in {len} measurements");
    let zeros = (len - ones) as f64;
    let ones_f = ones as f64;
    let log_terms: Vec<f64> = dist
        .bins()
        .iter()
        .map(|b| {
            if b.weight <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let mut acc = b.weight.ln();
            if zeros > 0.0 {
                acc += zeros * ln_kraus_weight(b.omega, tau, ProbeOutcome::Plus);
            }
            if ones_f > 0.0 {
                acc += ones_f * ln_kraus_weight(b.omega, tau, ProbeOutcome::Minus);
            }
            acc
        })
        .collect();
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let scaled: Vec<f64> = log_terms.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    let ln_p = max + total.ln();
    Some((scaled.into_iter().map(|w| w / total).collect(), ln_p))
}

/// Direct (non-sequential) conditioning on a class; see [`class_weights`].
pub fn condition_on_class(
    dist: &FrequencyDistribution,
    tau: f64,
    ones: usize,
    len: usize,
) -> Option<(FrequencyDistribution, f64)> {
    if len == 0 {
        return Some((dist.clone(), 0.0));
    }
    let (weights, ln_p) = class_weights(dist, tau, ones, len)?;
    let mut pruned = dist.pruned();
    let bins = dist
        .bins()
        .iter()
        .zip(weights)
        .filter_map(|(b, weight)| {
            if weight < UNDERFLOW_FLOOR {
                pruned = pruned + b.multiplicity;
                None
            } else {
                Some(Bin { weight, ..*b })
            }
        })
        .collect();
    let d = FrequencyDistribution::from_canonical(bins, dist.n_spins(), dist.scale(), dist.ln_norm() + ln_p, pruned);
    Some((d, ln_p))
}

/// `P_{0,m} = Σ w·cos^{2m}(ωτ)`.
pub fn success_probability(dist: &FrequencyDistribution, tau: f64, m: usize) -> f64 {
    if m == 0 {
        return dist.weights().sum();
    }
    dist.bins()
        .iter()
        .map(|b| b.weight * kraus_weight(b.omega, tau, ProbeOutcome::Plus).powi(m as i32))
        .sum()
}

/// Log of [`success_probability`], evaluated without underflow.
pub fn ln_success_probability(dist: &FrequencyDistribution, tau: f64, m: usize) -> f64 {
    class_weights(dist, tau, 0, m).map_or(f64::NEG_INFINITY, |(_, ln_p)| ln_p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateOptions {
    /// Stop once the total-variation change of one step falls below this.
    pub convergence_eps: f64,
    pub max_iterations: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions { convergence_eps: 1e-12, max_iterations: 100_000 }
    }
}

/// Limit of repeating one outcome at a fixed interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub outcome: ProbeOutcome,
    pub tau: f64,
    /// Input bins with maximal single-step weight, renormalized.
    pub surviving_bins: Vec<Bin>,
    pub purity: f64,
    pub entropy_bits: f64,
    pub cumulative_success_probability: f64,
    pub ln_cumulative_success_probability: f64,
    pub iterations_to_converge: usize,
    pub converged: bool,
    /// False if the purity of the conditional state ever dropped by more
    /// than 1e-12 between steps.
    pub purity_monotone: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyStateError {
    #[error("convergence threshold must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("outcome {0:?} is impossible for this bath state")]
    Forbidden(ProbeOutcome),
}

pub fn steady_state(
    dist: &FrequencyDistribution,
    tau: f64,
    outcome: ProbeOutcome,
    convergence_eps: f64,
) -> Result<SteadyStateReport, SteadyStateError> {
    steady_state_with(
        dist,
        tau,
        outcome,
        &SteadyStateOptions { convergence_eps, ..Default::default() },
    )
}

pub fn steady_state_with(
    dist: &FrequencyDistribution,
    tau: f64,
    outcome: ProbeOutcome,
    options: &SteadyStateOptions,
) -> Result<SteadyStateReport, SteadyStateError> {
    let eps = options.convergence_eps;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SteadyStateError::InvalidEpsilon(eps));
    }
    let kernel: Vec<f64> = dist.omegas().map(|w| kraus_weight(w, tau, outcome)).collect();
    let multiplicities: Vec<Multiplicity> = dist.bins().iter().map(|b| b.multiplicity).collect();
    let mut weights: Vec<f64> = dist.weights().collect();
    let mut next = vec![0.0; weights.len()];

    let mut ln_cumulative = 0.0;
    let mut purity = observables::purity_of(&weights, &multiplicities);
    let mut purity_monotone = true;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        let mut p = 0.0;
        for ((n, w), k) in next.iter_mut().zip(&weights).zip(&kernel) {
            *n = w * k;
            p += *n;
        }
        if !(p > 0.0) {
            return Err(SteadyStateError::Forbidden(outcome));
        }
        ln_cumulative += p.ln();
        let mut change = 0.0;
        for (n, w) in next.iter_mut().zip(&weights) {
            *n /= p;
            if *n < UNDERFLOW_FLOOR {
                *n = 0.0;
            }
            change += (*n - w).abs();
        }
        std::mem::swap(&mut weights, &mut next);
        iterations += 1;

        let new_purity = observables::purity_of(&weights, &multiplicities);
        if new_purity < purity - 1e-12 {
            purity_monotone = false;
        }
        purity = new_purity;
        if 0.5 * change < eps {
            converged = true;
            break;
        }
    }

    let k_max = dist
        .bins()
        .iter()
        .zip(&kernel)
        .filter(|(b, _)| b.weight > 0.0)
        .map(|(_, &k)| k)
        .fold(f64::NEG_INFINITY, f64::max);
    let survivors: Vec<usize> = (0..kernel.len())
        .filter(|&i| dist.bins()[i].weight > 0.0 && kernel[i] >= k_max - SURVIVOR_TIE_TOLERANCE)
        .collect();
    let survivor_mass: f64 = survivors.iter().map(|&i| weights[i]).sum();
    let surviving_bins: Vec<Bin> = survivors
        .iter()
        .map(|&i| Bin { weight: weights[i] / survivor_mass, ..dist.bins()[i] })
        .collect();
    let (w, m): (Vec<f64>, Vec<Multiplicity>) =
        surviving_bins.iter().map(|b| (b.weight, b.multiplicity)).unzip();

    Ok(SteadyStateReport {
        outcome,
        tau,
        purity: observables::purity_of(&w, &m),
        entropy_bits: observables::entropy_bits_of(&w, &m),
        surviving_bins,
        cumulative_success_probability: ln_cumulative.exp(),
        ln_cumulative_success_probability: ln_cumulative,
        iterations_to_converge: iterations,
        converged,
        purity_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath_model::{build_thermal_distribution, CouplingSet};
    use std::f64::consts::PI;

    fn thermal(n: usize, g: f64) -> FrequencyDistribution {
        build_thermal_distribution(&CouplingSet::homogeneous(n, g).unwrap(), None).unwrap()
    }

    #[test]
    fn kraus_weight_edge_values() {
        for omega in [-3.0, 0.0, 1.7e6] {
            assert_eq!(kraus_weight(omega, 0.0, ProbeOutcome::Plus), 1.0);
            assert_eq!(kraus_weight(omega, 0.0, ProbeOutcome::Minus), 0.0);
        }
        let tau = 2.5e-7;
        assert!((kraus_weight(PI / (2.0 * tau), tau, ProbeOutcome::Minus) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_spin_half_period_collapses_to_center() {
        let g = 1.3;
        let tau = PI / (2.0 * g);
        let c = conditional_update(&thermal(2, g), tau, ProbeOutcome::Plus).unwrap();
        assert!((c.probability - 0.5).abs() < 1e-15);
        let d = &c.distribution;
        let center = d.bins().iter().find(|b| b.omega == 0.0).unwrap();
        assert!((center.weight - 1.0).abs() < 1e-15);
        assert!(d.bins().iter().filter(|b| b.omega != 0.0).all(|b| b.weight < 1e-30));
    }

    #[test]
    fn single_zero_bin_forbids_outcome_one() {
        let d = FrequencyDistribution::single(0.0, Multiplicity::ONE, 1, 1.0);
        assert_eq!(
            conditional_update(&d, 0.3, ProbeOutcome::Minus),
            Err(Forbidden { step: 0, outcome: ProbeOutcome::Minus })
        );
        let s = OutcomeString::parse("001", 0.3).unwrap();
        let r = apply_trajectory(&d, &s);
        assert_eq!(r.forbidden, Some(Forbidden { step: 2, outcome: ProbeOutcome::Minus }));
        assert_eq!(r.success_probability, 0.0);
        assert_eq!(r.distribution, d);
        assert_eq!(r.step_probabilities, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_string_is_identity() {
        let d = thermal(3, 1.0);
        let r = apply_trajectory(&d, &OutcomeString::new(vec![], 1.0).unwrap());
        assert_eq!(r.distribution, d);
        assert_eq!(r.success_probability, 1.0);
    }

    #[test]
    fn outcome_string_parsing() {
        let s = OutcomeString::parse("0110", 1e-6).unwrap();
        assert_eq!((s.ones(), s.zeros(), s.len()), (2, 2, 4));
        assert_eq!(s.to_string(), "0110");
        assert_eq!(OutcomeString::parse("012", 1.0), Err(OutcomeStringError::InvalidSymbol('2')));
        assert_eq!(OutcomeString::parse("0", 0.0), Err(OutcomeStringError::InvalidInterval(0.0)));
        assert_eq!(OutcomeString::class(2, 5, 1.0).unwrap().to_string(), "11000");
        assert!(OutcomeString::class(6, 5, 1.0).is_err());
    }

    #[test]
    fn success_probability_edges() {
        let d = thermal(5, 0.7);
        assert_eq!(success_probability(&d, 0.4, 0), 1.0);
        let tau = 0.25;
        let spike = FrequencyDistribution::single(PI / tau, Multiplicity::ONE, 1, 1.0);
        for m in [1, 5, 40] {
            assert!((success_probability(&spike, tau, m) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_success_probability_survives_long_strings() {
        let d = thermal(40, 1.0);
        let tau = 0.9;
        let ln_p = ln_success_probability(&d, tau, 5000);
        assert!(ln_p.is_finite());
        for m in [1, 10, 50] {
            let direct = success_probability(&d, tau, m).ln();
            assert!((ln_success_probability(&d, tau, m) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn steady_state_of_single_bin_is_immediate() {
        let d = FrequencyDistribution::single(0.0, Multiplicity::Exact(6), 4, 1.0);
        let r = steady_state(&d, 0.8, ProbeOutcome::Plus, 1e-12).unwrap();
        assert_eq!(r.iterations_to_converge, 1);
        assert!(r.converged);
        assert!((r.purity - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.cumulative_success_probability, 1.0);
    }

    #[test]
    fn steady_state_rejects_bad_eps_and_forbidden() {
        let d = thermal(2, 1.0);
        assert!(matches!(
            steady_state(&d, 0.1, ProbeOutcome::Plus, 0.0),
            Err(SteadyStateError::InvalidEpsilon(_))
        ));
        let z = FrequencyDistribution::single(0.0, Multiplicity::ONE, 1, 1.0);
        assert_eq!(
            steady_state(&z, 0.1, ProbeOutcome::Minus, 1e-9),
            Err(SteadyStateError::Forbidden(ProbeOutcome::Minus))
        );
    }

    #[test]
    fn steady_state_flags_iteration_cap() {
        let d = thermal(10, 1.0);
        let opts = SteadyStateOptions { convergence_eps: 1e-12, max_iterations: 3 };
        let r = steady_state_with(&d, 0.05, ProbeOutcome::Plus, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations_to_converge, 3);
    }
}
