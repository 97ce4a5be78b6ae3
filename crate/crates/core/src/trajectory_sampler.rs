//! Outcome trajectories: Born-rule sampling, exhaustive class enumeration
//! and the outcome-averaging identity.
//!
//! Every trajectory draws from its own ChaCha stream selected by
//! `(master seed, trajectory index)`, so a parallel batch is bit-identical
//! to the sequential one regardless of scheduling.

use crate::bath_model::FrequencyDistribution;
use crate::measurement_kernel::{self, OutcomeString, ProbeOutcome};
use crate::observables;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

/// Longest string [`enumerate_trajectories`] accepts by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("string length {m} exceeds the enumeration cap {cap}")]
    CapExceeded { m: usize, cap: usize },
    #[error("trajectories need at least one measurement")]
    EmptyTrajectory,
    #[error("measurement interval must be positive and finite, got {0}")]
    InvalidInterval(f64),
}

/// One conditional trajectory and its Born weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub outcome_string: OutcomeString,
    /// Probability of this exact string.
    pub probability: f64,
    pub ln_probability: f64,
    pub per_step_probabilities: Vec<f64>,
    pub final_distribution: FrequencyDistribution,
    /// Number of strings sharing these counts; 1 for sampled records.
    pub class_multiplicity: f64,
}

impl TrajectoryRecord {
    /// Total probability of all strings in the class.
    pub fn class_probability(&self) -> f64 {
        self.class_multiplicity * self.probability
    }
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `m` outcomes with Born probabilities, updating the bath after
/// each. Stream 0 of `seed`.
pub fn sample_trajectory(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
    seed: u64,
) -> Result<TrajectoryRecord, SamplerError> {
    sample_indexed(dist, tau, m, seed, 0)
}

/// Trajectory number `index` of a batch seeded with `seed`.
pub fn sample_indexed(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord, SamplerError> {
    if m == 0 {
        return Err(SamplerError::EmptyTrajectory);
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SamplerError::InvalidInterval(tau));
    }
    let mut rng = stream_rng(seed, index);
    let mut current = dist.clone();
    let mut outcomes = Vec::with_capacity(m);
    let mut steps = Vec::with_capacity(m);
    let mut ln_p = 0.0;
    for _ in 0..m {
        let p_plus = measurement_kernel::success_probability(&current, tau, 1);
        let u: f64 = rng.random();
        // u ∈ [0, 1): a branch with zero probability is never chosen
        let outcome = if u < p_plus { ProbeOutcome::Plus } else { ProbeOutcome::Minus };
        let c = measurement_kernel::conditional_update(&current, tau, outcome)
            .expect("Born sampling selects an allowed outcome");
        ln_p += c.probability.ln();
        steps.push(c.probability);
        outcomes.push(outcome);
        current = c.distribution;
    }
    Ok(TrajectoryRecord {
        outcome_string: OutcomeString::new(outcomes, tau).expect("interval validated"),
        probability: ln_p.exp(),
        ln_probability: ln_p,
        per_step_probabilities: steps,
        final_distribution: current,
        class_multiplicity: 1.0,
    })
}

/// `count` independent trajectories, computed in parallel.
pub fn sample_batch(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>, SamplerError> {
    (0..count as u64)
        .into_par_iter()
        .map(|index| sample_indexed(dist, tau, m, seed, index))
        .collect()
}

/// Outcome strings only, without keeping every final distribution.
pub fn sample_strings(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<OutcomeString>, SamplerError> {
    (0..count as u64)
        .into_par_iter()
        .map(|index| sample_indexed(dist, tau, m, seed, index).map(|r| r.outcome_string))
        .collect()
}

/// One record per class `n = 0..=m` (number of `'1'` results). Outcome
/// order is irrelevant, so each class stands for `binomial(m, n)` strings.
pub fn enumerate_trajectories(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
) -> Result<Vec<TrajectoryRecord>, SamplerError> {
    enumerate_with_cap(dist, tau, m, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_with_cap(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
    cap: usize,
) -> Result<Vec<TrajectoryRecord>, SamplerError> {
    if m > cap {
        return Err(SamplerError::CapExceeded { m, cap });
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SamplerError::InvalidInterval(tau));
    }
    let records = (0..=m)
        .map(|ones| {
            let string = OutcomeString::class(ones, m, tau).expect("class fits");
            let sequential = measurement_kernel::apply_trajectory(dist, &string);
            let (final_distribution, ln_probability) =
                match measurement_kernel::condition_on_class(dist, tau, ones, m) {
                    Some((d, ln_p)) => (d, ln_p),
                    None => (sequential.distribution.clone(), f64::NEG_INFINITY),
                };
            TrajectoryRecord {
                outcome_string: string,
                probability: ln_probability.exp(),
                ln_probability,
                per_step_probabilities: sequential.step_probabilities,
                final_distribution,
                class_multiplicity: binomial(m, ones),
            }
        })
        .collect();
    Ok(records)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Total-variation distance between the outcome-averaged conditional bath
/// state after `m` measurements and the unmeasured state.
pub fn ergodicity_check(dist: &FrequencyDistribution, tau: f64, m: usize) -> Result<f64, SamplerError> {
    let mixture = averaged_weights(dist, tau, m)?;
    Ok(0.5 * mixture.iter().zip(dist.weights()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `Σ_n binomial(m, n)·p_n·w_n`, aligned with `dist.bins()`.
pub fn averaged_weights(dist: &FrequencyDistribution, tau: f64, m: usize) -> Result<Vec<f64>, SamplerError> {
    if m > DEFAULT_ENUMERATION_CAP {
        return Err(SamplerError::CapExceeded { m, cap: DEFAULT_ENUMERATION_CAP });
    }
    let mut mixture = vec![0.0; dist.len()];
    for ones in 0..=m {
        if let Some((weights, ln_p)) = measurement_kernel::class_weights(dist, tau, ones, m) {
            let class_p = binomial(m, ones) * ln_p.exp();
            for (acc, w) in mixture.iter_mut().zip(weights) {
                *acc += class_p * w;
            }
        }
    }
    Ok(mixture)
}

/// `Σ_n binomial(m, n)·p_n·C_n(t)`: the FID averaged over every outcome
/// string of length `m`.
pub fn averaged_fid(
    dist: &FrequencyDistribution,
    tau: f64,
    m: usize,
    times: &[f64],
) -> Result<observables::FidCurve, SamplerError> {
    let records = enumerate_trajectories(dist, tau, m)?;
    let mut coherence = vec![0.0; times.len()];
    for r in &records {
        if r.probability == 0.0 {
            continue;
        }
        let curve = observables::fid(&r.final_distribution, times);
        for (acc, c) in coherence.iter_mut().zip(curve.coherence) {
            *acc += r.class_probability() * c;
        }
    }
    Ok(observables::FidCurve {
        times: times.to_vec(),
        coherence,
        metadata: observables::CurveMetadata {
            source: format!("average over all {m}-outcome strings"),
            tau: Some(tau),
            ..Default::default()
        },
    })
}

/// Compact per-line form for trajectory logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub index: u64,
    pub string: String,
    pub tau_s: f64,
    pub probability: f64,
    pub ln_probability: f64,
    pub per_step_probabilities: Vec<f64>,
    pub class_multiplicity: f64,
    pub final_bins: usize,
}

impl TrajectoryLine {
    pub fn from_record(index: u64, r: &TrajectoryRecord) -> Self {
        TrajectoryLine {
            index,
            string: r.outcome_string.to_string(),
            tau_s: r.outcome_string.tau(),
            probability: r.probability,
            ln_probability: r.ln_probability,
            per_step_probabilities: r.per_step_probabilities.clone(),
            class_multiplicity: r.class_multiplicity,
            final_bins: r.final_distribution.len(),
        }
    }
}

/// JSON-lines, one record per line.
pub fn write_jsonl<W: Write>(mut out: W, records: &[TrajectoryRecord]) -> io::Result<()> {
    for (i, r) in records.iter().enumerate() {
        serde_json::to_writer(&mut out, &TrajectoryLine::from_record(i as u64, r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
