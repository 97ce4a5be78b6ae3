use super::{summary_artifact, table_artifact, Artifact, CurveFormat, ProtocolConfig, ProtocolError};
use crate::measurement_kernel::{self, apply_trajectory};
use crate::observables::purity;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LifetimePoint {
    pub wait_s: f64,
    /// Weight of the thermal state mixed back in.
    pub epsilon: f64,
    /// `P(0)` at interval τ on the relaxed state.
    pub p0: f64,
    /// `(1 − ε)·P_prepared + ε·P_thermal`.
    pub p0_closed_form: f64,
    pub purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LifetimeReport {
    pub label: String,
    pub tau_s: f64,
    /// `None` when the bath does not relax.
    pub t1_b_s: Option<f64>,
    pub preparation_probability: f64,
    pub p0_prepared: f64,
    pub p0_thermal: f64,
    pub points: Vec<LifetimePoint>,
    /// Largest `|p0 − p0_closed_form|`.
    pub max_closed_form_deviation: f64,
    #[serde(skip)]
    seed: u64,
}

/// Prepares the target string, then relaxes the bath toward thermal with
/// `ε = 1 − exp(−t_wait/T1_b)` and probes `P(0)` after each wait.
pub fn run_lifetime(config: &ProtocolConfig) -> Result<LifetimeReport, ProtocolError> {
    config.validate()?;
    let spec = config
        .lifetime
        .as_ref()
        .ok_or_else(|| ProtocolError::Config("lifetime needs a [lifetime] section".into()))?;
    let thermal = config.bath.thermal()?;
    let tau = config.tau();
    let string = config.target_string()?;
    let label = super::class_label(config.ones, config.m);
    let prepared = apply_trajectory(&thermal, &string);
    if let Some(f) = prepared.forbidden {
        return Err(ProtocolError::Forbidden { label, step: f.step, outcome: f.outcome });
    }
    let p0_prepared = measurement_kernel::success_probability(&prepared.distribution, tau, 1);
    let p0_thermal = measurement_kernel::success_probability(&thermal, tau, 1);

    let points: Vec<LifetimePoint> = spec
        .wait_times_s
        .iter()
        .map(|&wait| {
            let epsilon = spec.t1_b_s.map_or(0.0, |t1| -(-wait / t1).exp_m1());
            let relaxed = prepared.distribution.mix(&thermal, epsilon);
            LifetimePoint {
                wait_s: wait,
                epsilon,
                p0: measurement_kernel::success_probability(&relaxed, tau, 1),
                p0_closed_form: (1.0 - epsilon) * p0_prepared + epsilon * p0_thermal,
                purity: purity(&relaxed),
            }
        })
        .collect();
    let max_closed_form_deviation = points.iter().map(|p| (p.p0 - p.p0_closed_form).abs()).fold(0.0, f64::max);
    Ok(LifetimeReport {
        label,
        tau_s: tau,
        t1_b_s: spec.t1_b_s,
        preparation_probability: prepared.success_probability,
        p0_prepared,
        p0_thermal,
        points,
        max_closed_form_deviation,
        seed: config.seed,
    })
}

impl LifetimeReport {
    pub fn artifacts(&self, format: CurveFormat) -> Vec<Artifact> {
        let column = |f: fn(&LifetimePoint) -> f64| self.points.iter().map(f).collect::<Vec<f64>>();
        let table = [
            ("wait_s", column(|p| p.wait_s)),
            ("epsilon", column(|p| p.epsilon)),
            ("p0", column(|p| p.p0)),
            ("p0_closed_form", column(|p| p.p0_closed_form)),
            ("purity", column(|p| p.purity)),
        ];
        vec![summary_artifact("lifetime", self.seed, self), table_artifact("lifetime", &table, format)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(t1: &str) -> ProtocolConfig {
        ProtocolConfig::from_toml(&format!(
            "tau_ns = 600.0\nm = 4\n[bath]\nn_spins = 20\ng_homogeneous_hz = 60e3\n[lifetime]\n{t1}\nwait_times_s = [0.0, 1e-3, 1.0, 1e3]"
        ))
        .unwrap()
    }

    #[test]
    fn no_relaxation_is_stationary() {
        let r = run_lifetime(&config("")).unwrap();
        assert!(r.points.iter().all(|p| p.p0 == r.p0_prepared));
        assert!(r.p0_prepared > r.p0_thermal);
    }

    #[test]
    fn relaxation_returns_to_thermal() {
        let r = run_lifetime(&config("t1_b_s = 0.01")).unwrap();
        assert!(r.max_closed_form_deviation < 1e-12);
        assert!((r.points.last().unwrap().p0 - r.p0_thermal).abs() < 1e-12);
        assert!(r.points.windows(2).all(|w| w[1].p0 <= w[0].p0));
    }
}
