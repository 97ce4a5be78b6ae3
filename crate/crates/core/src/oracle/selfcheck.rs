//! Quick engine-vs-oracle comparison at N = 8, m = 4 over every outcome
//! string, plus the outcome-averaging identities.

use super::{oracle_fid, oracle_purity, oracle_trajectory, ConfigurationState};
use crate::bath_model::{build_thermal_distribution, CouplingSet};
use crate::measurement_kernel::{apply_trajectory, OutcomeString, ProbeOutcome};
use crate::observables::{fid, purity, time_grid};
use crate::trajectory_sampler::{averaged_fid, ergodicity_check};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const SELFCHECK_SPINS: usize = 8;
pub const SELFCHECK_LENGTH: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelfCheckOptions {
    pub seed: u64,
    /// Test hook: hand the engine a coupling 1% off from the oracle's.
    pub corrupt_coupling: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest deviation observed.
    pub deviation: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, deviation: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: deviation <= tolerance, deviation, tolerance }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn run_selfcheck(options: SelfCheckOptions) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let g: Vec<f64> = (0..SELFCHECK_SPINS).map(|_| 2e5 * (0.2 + rng.random::<f64>())).collect();
    let g_bar = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tau = 1.3 / g_bar;
    let times = time_grid(6.0 / g_bar, 64);

    let mut engine_g = g.clone();
    if options.corrupt_coupling {
        engine_g[0] *= 1.01;
    }
    let thermal = build_thermal_distribution(&CouplingSet::new(engine_g).expect("positive couplings"), None)
        .expect("small bath");
    let oracle = ConfigurationState::thermal(&g).expect("small bath");

    let mut worst = [0.0f64; 6];
    let mut total_probability = 0.0;
    for bits in 0..1u32 << SELFCHECK_LENGTH {
        let outcomes: Vec<ProbeOutcome> = (0..SELFCHECK_LENGTH)
            .map(|k| ProbeOutcome::from_bit((bits >> k & 1) as u8).expect("bit"))
            .collect();
        let string = OutcomeString::new(outcomes.clone(), tau).expect("tau > 0");
        let engine = apply_trajectory(&thermal, &string);
        let (reference, p_ref) = oracle_trajectory(&oracle, tau, &outcomes).expect("random couplings allow every string");
        total_probability += engine.success_probability;

        worst[0] = worst[0].max(relative(engine.success_probability, p_ref));
        worst[1] = worst[1].max(engine.distribution.total_variation(&reference.coarse_grain()));
        let a = fid(&engine.distribution, &times);
        let b = oracle_fid(&reference, &times);
        for (x, y) in a.coherence.iter().zip(&b.coherence) {
            worst[2] = worst[2].max((x - y).abs());
        }
        worst[3] = worst[3].max(relative(purity(&engine.distribution), oracle_purity(&reference)));
        // Kraus completeness at every prefix
        let mut current = thermal.clone();
        for &o in &outcomes {
            let plus = crate::measurement_kernel::conditional_update(&current, tau, ProbeOutcome::Plus);
            let minus = crate::measurement_kernel::conditional_update(&current, tau, ProbeOutcome::Minus);
            let sum = plus.as_ref().map_or(0.0, |c| c.probability) + minus.as_ref().map_or(0.0, |c| c.probability);
            worst[4] = worst[4].max((sum - 1.0).abs());
            current = if o == ProbeOutcome::Plus { plus } else { minus }.expect("allowed").distribution;
        }
    }
    worst[5] = (total_probability - 1.0).abs();

    let ergodic_tv = ergodicity_check(&thermal, tau, SELFCHECK_LENGTH).unwrap_or(f64::INFINITY);
    let unmeasured = fid(&thermal, &times);
    let averaged_gap = averaged_fid(&thermal, tau, SELFCHECK_LENGTH, &times).map_or(f64::INFINITY, |c| {
        c.coherence.iter().zip(&unmeasured.coherence).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    });

    vec![
        check("thermal distribution matches oracle", thermal.total_variation(&oracle.coarse_grain()), 1e-12),
        check("trajectory probabilities match oracle", worst[0], 1e-10),
        check("conditional distributions match oracle", worst[1], 1e-10),
        check("conditional FIDs match oracle", worst[2], 1e-10),
        check("purity matches oracle", worst[3], 1e-10),
        check("Kraus completeness", worst[4], 1e-12),
        check("string probabilities sum to one", worst[5], 1e-12),
        check("ergodicity: averaged bath state", ergodic_tv, 1e-10),
        check("ergodicity: averaged FID", averaged_gap, 1e-9),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        for r in run_selfcheck(SelfCheckOptions::default()) {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn corruption_is_named() {
        let failed: Vec<&str> = run_selfcheck(SelfCheckOptions { corrupt_coupling: true, ..Default::default() })
            .into_iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect();
        assert!(failed.contains(&"thermal distribution matches oracle"), "{failed:?}");
        assert!(failed.contains(&"trajectory probabilities match oracle"));
    }
}
