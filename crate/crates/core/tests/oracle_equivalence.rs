//! Engine against brute force: configuration enumeration for N ≤ 12 and
//! full density matrices for N ≤ 4 with vector couplings.

mod common;

use common::*;
use rand::Rng;
use spinbath::bath_model::{build_thermal_distribution, CouplingSet};
use spinbath::measurement_kernel::{apply_trajectory, conditional_update, OutcomeString, ProbeOutcome};
use spinbath::observables::{fid, purity, time_grid};
use spinbath::oracle::dense::DenseOracle;
use spinbath::oracle::{oracle_fid, oracle_purity, oracle_trajectory, oracle_update, ConfigurationState};

#[test]
fn conditioned_states_match_configuration_oracle() {
    let mut r = rng(11);
    for n in [1, 2, 4, 8, 10, 12] {
        for trial in 0..6 {
            // every third trial homogeneous, to exercise degenerate bins
            let g = if trial % 3 == 0 { vec![1.7e5; n] } else { random_couplings(&mut r, n) };
            let gb = g_bar(&g);
            let tau = r.random_range(0.05..3.0) / gb;
            let len = r.random_range(1..=8);
            let outcomes = random_outcomes(&mut r, len);
            let times = time_grid(8.0 / gb, 50);

            let thermal = build_thermal_distribution(&CouplingSet::new(g.clone()).unwrap(), None).unwrap();
            let oracle = ConfigurationState::thermal(&g).unwrap();
            let engine = apply_trajectory(&thermal, &OutcomeString::new(outcomes.clone(), tau).unwrap());
            let (reference, p) = oracle_trajectory(&oracle, tau, &outcomes).unwrap();
            let ctx = format!("n={n} trial={trial}");

            assert!(rel(engine.success_probability, p) < 1e-10, "{ctx}: {} vs {p}", engine.success_probability);
            let grained = reference.coarse_grain();
            assert!(engine.distribution.total_variation(&grained) < 1e-10, "{ctx}");
            assert!(max_weight_gap(&engine.distribution, &grained) < 1e-10, "{ctx}");
            let gap = max_abs_diff(&fid(&engine.distribution, &times).coherence, &oracle_fid(&reference, &times).coherence);
            assert!(gap < 1e-10, "{ctx}: fid gap {gap}");
            assert!(rel(purity(&engine.distribution), oracle_purity(&reference)) < 1e-10, "{ctx}");
        }
    }
}

#[test]
fn step_probabilities_match() {
    let mut r = rng(12);
    let g = random_couplings(&mut r, 9);
    let tau = 1.1 / g_bar(&g);
    let outcomes = random_outcomes(&mut r, 8);
    let thermal = build_thermal_distribution(&CouplingSet::new(g.clone()).unwrap(), None).unwrap();
    let engine = apply_trajectory(&thermal, &OutcomeString::new(outcomes.clone(), tau).unwrap());
    let mut state = ConfigurationState::thermal(&g).unwrap();
    for (k, &o) in outcomes.iter().enumerate() {
        let (next, p) = oracle_update(&state, tau, o).unwrap();
        assert!(rel(engine.step_probabilities[k], p) < 1e-12, "step {k}");
        state = next;
    }
}

#[test]
fn binning_commutes_with_updates() {
    let mut r = rng(13);
    for n in [3, 6, 10] {
        let g = random_couplings(&mut r, n);
        let tau = 0.9 / g_bar(&g);
        let mut state = ConfigurationState::thermal(&g).unwrap();
        for o in random_outcomes(&mut r, 6) {
            let bin_then_update = conditional_update(&state.coarse_grain(), tau, o).unwrap();
            let (next, p) = oracle_update(&state, tau, o).unwrap();
            let update_then_bin = next.coarse_grain();
            assert!(rel(bin_then_update.probability, p) < 1e-12);
            assert!(bin_then_update.distribution.total_variation(&update_then_bin) < 1e-12);
            state = next;
        }
    }
}

#[test]
fn thermal_oracle_purity() {
    for n in [1, 5, 12] {
        let s = ConfigurationState::thermal(&vec![1.0; n]).unwrap();
        assert!(rel(oracle_purity(&s), 2f64.powi(-(n as i32))) < 1e-14);
        let d = build_thermal_distribution(&CouplingSet::homogeneous(n, 1.0).unwrap(), None).unwrap();
        assert!(rel(purity(&d), oracle_purity(&s)) < 1e-12);
    }
}

fn random_vectors(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let v = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            v.map(|x| 2e5 * x)
        })
        .collect()
}

#[test]
fn density_matrix_oracle_agrees() {
    let mut r = rng(14);
    for n in 1..=4 {
        let vectors = random_vectors(&mut r, n);
        let couplings = CouplingSet::from_vectors(&vectors).unwrap();
        let gb = couplings.g_bar();
        let mut dist = build_thermal_distribution(&couplings, None).unwrap();
        let mut dense = DenseOracle::thermal(&vectors).unwrap();
        let times = time_grid(6.0 / gb, 25);
        let tau = 1.2 / gb;

        let gap = max_abs_diff(&fid(&dist, &times).coherence, &dense.fid(&times));
        assert!(gap < 1e-10, "n={n} thermal fid gap {gap}");
        for o in random_outcomes(&mut r, 3) {
            let c = conditional_update(&dist, tau, o).unwrap();
            let p = dense.measure(tau, o).unwrap();
            assert!(rel(c.probability, p) < 1e-10, "n={n}: {} vs {p}", c.probability);
            dist = c.distribution;
            assert!(rel(purity(&dist), dense.purity()) < 1e-10, "n={n}");
        }
        let gap = max_abs_diff(&fid(&dist, &times).coherence, &dense.fid(&times));
        assert!(gap < 1e-10, "n={n} conditioned fid gap {gap}");
    }
}

#[test]
fn dense_oracle_respects_kraus_completeness() {
    let mut r = rng(15);
    let vectors = random_vectors(&mut r, 3);
    let base = DenseOracle::thermal(&vectors).unwrap();
    let (mut a, mut b) = (base.clone(), base);
    let p = a.measure(4e-6, ProbeOutcome::Plus).unwrap() + b.measure(4e-6, ProbeOutcome::Minus).unwrap();
    assert!((p - 1.0).abs() < 1e-12);
}
