//! Steady states of repeated '0' results on homogeneous baths, compared
//! against the surviving-mixture prediction computed from binomial weights.

use spinbath::bath_model::{build_thermal_distribution, CouplingSet, Multiplicity};
use spinbath::measurement_kernel::{steady_state, ProbeOutcome};
use std::f64::consts::{PI, TAU};

fn homogeneous(n: usize, g: f64) -> spinbath::bath_model::FrequencyDistribution {
    build_thermal_distribution(&CouplingSet::homogeneous(n, g).unwrap(), None).unwrap()
}

#[test]
fn only_zero_magnetization_survives_below_the_edge_condition() {
    // gτ·N = π: ωτ = jπ/N ∈ (−π/2, π/2] so cos² = 1 only at j = 0
    let (n, g) = (100, TAU * 50e3);
    let tau = PI / (n as f64 * g);
    let ss = steady_state(&homogeneous(n, g), tau, ProbeOutcome::Plus, 1e-12).unwrap();
    assert!(ss.converged);
    assert_eq!(ss.surviving_bins.len(), 1);
    assert_eq!(ss.surviving_bins[0].omega, 0.0);
    let predicted = 1.0 / Multiplicity::binomial(n as u64, n as u64 / 2).to_f64();
    assert!((ss.purity - predicted).abs() / predicted < 1e-6, "{} vs {predicted}", ss.purity);
}

#[test]
fn unit_g_bar_tau_keeps_only_zero_magnetization() {
    // ḡ = g√N, so ωτ = j/√N = j/10 never hits a nonzero multiple of π
    let (n, g) = (100, TAU * 50e3);
    let g_bar = g * (n as f64).sqrt();
    let tau = 1.0 / g_bar;
    let ss = steady_state(&homogeneous(n, g), tau, ProbeOutcome::Plus, 1e-12).unwrap();
    assert_eq!(ss.surviving_bins.len(), 1);
    assert_eq!(ss.surviving_bins[0].omega, 0.0);
    // the pure collective picture would give purity 1/2; the j = 0
    // eigenspace is C(100,50)-fold degenerate instead
    let predicted = 1.0 / Multiplicity::binomial(n as u64, n as u64 / 2).to_f64();
    assert!(ss.converged, "{} iterations", ss.iterations_to_converge);
    assert!((ss.purity - predicted).abs() / predicted < 1e-6, "{} vs {predicted}", ss.purity);
    assert!(ss.purity < 1e-20);
}

#[test]
fn odd_bath_at_edge_condition_keeps_the_extremal_pair() {
    // N odd has no j = 0; with gτ·N/2 = π the survivors are j = ±N/2,
    // two non-degenerate states: purity 1/2, entropy 1 bit
    let (n, g) = (11, TAU * 50e3);
    let tau = 2.0 * PI / (n as f64 * g);
    let ss = steady_state(&homogeneous(n, g), tau, ProbeOutcome::Plus, 1e-12).unwrap();
    assert!(ss.converged);
    assert_eq!(ss.surviving_bins.len(), 2);
    assert!((ss.purity - 0.5).abs() < 1e-6, "{}", ss.purity);
    assert!((ss.entropy_bits - 1.0).abs() < 1e-6, "{}", ss.entropy_bits);
}
