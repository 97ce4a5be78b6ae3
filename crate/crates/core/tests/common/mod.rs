#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinbath::bath_model::FrequencyDistribution;
use spinbath::measurement_kernel::ProbeOutcome;
use std::path::PathBuf;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Couplings in rad/s spread over a factor of five.
pub fn random_couplings(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2e5 * (0.2 + rng.random::<f64>())).collect()
}

pub fn random_outcomes(rng: &mut ChaCha8Rng, len: usize) -> Vec<ProbeOutcome> {
    (0..len).map(|_| if rng.random::<bool>() { ProbeOutcome::Minus } else { ProbeOutcome::Plus }).collect()
}

pub fn g_bar(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Largest per-bin weight gap after aligning by eigenvalue.
pub fn max_weight_gap(a: &FrequencyDistribution, b: &FrequencyDistribution) -> f64 {
    let tol = 1e-9 * a.scale().max(b.scale());
    let mut worst: f64 = 0.0;
    for x in a.bins() {
        let w = b.bins().iter().filter(|y| (y.omega - x.omega).abs() <= tol).map(|y| y.weight).sum::<f64>();
        worst = worst.max((x.weight - w).abs());
    }
    for y in b.bins() {
        if !a.bins().iter().any(|x| (y.omega - x.omega).abs() <= tol) {
            worst = worst.max(y.weight);
        }
    }
    worst
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}
