use super::{
    class_label, curve_artifact, spectrum_width, splitting_table, summary_artifact, table_artifact, Artifact,
    CurveFormat, ProtocolConfig, ProtocolError,
};
use crate::bath_model::FrequencyDistribution;
use crate::measurement_kernel::{self, conditional_update, ProbeOutcome};
use crate::observables::{self, entropy_bits, fid, fit_gaussian_decay, purity, FidCurve, GaussianFitResult};
use crate::trajectory_sampler::{self, TrajectoryRecord};
use serde::Serialize;

/// State after the first `k` outcomes of the target string.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PurificationStep {
    pub k: usize,
    /// `None` for the initial state.
    pub outcome: Option<ProbeOutcome>,
    pub purity: f64,
    pub entropy_bits: f64,
    /// Probability of outcome `k` given the previous ones; 1 at `k = 0`.
    pub step_probability: f64,
    pub cumulative_probability: f64,
    pub ln_cumulative_probability: f64,
    /// Product of single-step thermal probabilities, as if the
    /// measurements were uncorrelated.
    pub baseline_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingSummary {
    pub count: usize,
    /// Fraction of sampled strings in the target class.
    pub class_frequency: f64,
    /// Exact Born probability of the target class.
    pub class_probability: f64,
    /// Binomial standard error of `class_frequency`.
    pub standard_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PurificationReport {
    pub label: String,
    pub string: String,
    pub tau_s: f64,
    pub n_spins: usize,
    /// rad/s
    pub g_bar: f64,
    /// `√2/ḡ`, s.
    pub reference_t2_s: f64,
    pub thermal_p0: f64,
    pub steps: Vec<PurificationStep>,
    pub success_probability: f64,
    pub ln_success_probability: f64,
    pub t2_before: GaussianFitResult,
    pub t2_after: GaussianFitResult,
    pub t2_ratio: f64,
    pub sampling: Option<SamplingSummary>,
    #[serde(skip)]
    pub fid_before: FidCurve,
    #[serde(skip)]
    pub fid_after: FidCurve,
    #[serde(skip)]
    pub initial: FrequencyDistribution,
    #[serde(skip)]
    pub conditioned: FrequencyDistribution,
    #[serde(skip)]
    pub trajectories: Vec<TrajectoryRecord>,
    #[serde(skip)]
    seed: u64,
    #[serde(skip)]
    spectrum_width: f64,
}

pub fn run_purification(config: &ProtocolConfig) -> Result<PurificationReport, ProtocolError> {
    config.validate()?;
    let thermal = config.bath.thermal()?;
    let tau = config.tau();
    let string = config.target_string()?;
    let label = class_label(config.ones, config.m);

    let thermal_p0 = measurement_kernel::success_probability(&thermal, tau, 1);
    let single_step = |o: ProbeOutcome| conditional_update(&thermal, tau, o).map_or(0.0, |c| c.probability);
    let p1 = [single_step(ProbeOutcome::Plus), single_step(ProbeOutcome::Minus)];

    let mut steps = vec![PurificationStep {
        k: 0,
        outcome: None,
        purity: purity(&thermal),
        entropy_bits: entropy_bits(&thermal),
        step_probability: 1.0,
        cumulative_probability: 1.0,
        ln_cumulative_probability: 0.0,
        baseline_probability: 1.0,
    }];
    let mut current = thermal.clone();
    let (mut ln_p, mut baseline) = (0.0, 1.0);
    for (step, &outcome) in string.outcomes().iter().enumerate() {
        let c = conditional_update(&current, tau, outcome)
            .map_err(|_| ProtocolError::Forbidden { label: label.clone(), step, outcome })?;
        ln_p += c.probability.ln();
        baseline *= p1[outcome.bit() as usize];
        current = c.distribution;
        steps.push(PurificationStep {
            k: step + 1,
            outcome: Some(outcome),
            purity: purity(&current),
            entropy_bits: entropy_bits(&current),
            step_probability: c.probability,
            cumulative_probability: ln_p.exp(),
            ln_cumulative_probability: ln_p,
            baseline_probability: baseline,
        });
    }

    let times = config.times();
    let mut fid_before = fid(&thermal, &times);
    let mut fid_after = fid(&current, &times);
    let t2_before = fit_gaussian_decay(&fid_before)?;
    let t2_after = fit_gaussian_decay(&fid_after)?;
    fid_before.metadata = observables::CurveMetadata {
        source: "thermal".into(),
        t2_fit: Some(t2_before.t2),
        ..Default::default()
    };
    fid_after.metadata = observables::CurveMetadata {
        source: "conditioned".into(),
        trajectory: Some(string.to_string()),
        tau: Some(tau),
        t2_fit: Some(t2_after.t2),
    };

    let (trajectories, sampling) = if config.samples > 0 && config.m > 0 {
        let records = trajectory_sampler::sample_batch(&thermal, tau, config.m, config.seed, config.samples)?;
        let hits = records.iter().filter(|r| r.outcome_string.ones() == config.ones).count();
        let class_probability = binomial(config.m, config.ones) * ln_p.exp();
        let n = records.len() as f64;
        let summary = SamplingSummary {
            count: records.len(),
            class_frequency: hits as f64 / n,
            class_probability,
            standard_error: (class_probability * (1.0 - class_probability) / n).sqrt(),
        };
        (records, Some(summary))
    } else {
        (Vec::new(), None)
    };

    let g_bar = thermal.scale();
    Ok(PurificationReport {
        label,
        string: string.to_string(),
        tau_s: tau,
        n_spins: thermal.n_spins(),
        g_bar,
        reference_t2_s: std::f64::consts::SQRT_2 / g_bar,
        thermal_p0,
        success_probability: ln_p.exp(),
        ln_success_probability: ln_p,
        t2_ratio: t2_after.t2 / t2_before.t2,
        t2_before,
        t2_after,
        steps,
        sampling,
        fid_before,
        fid_after,
        spectrum_width: spectrum_width(config, &thermal),
        initial: thermal,
        conditioned: current,
        trajectories,
        seed: config.seed,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl PurificationReport {
    pub fn artifacts(&self, format: CurveFormat) -> Vec<Artifact> {
        let column = |f: fn(&PurificationStep) -> f64| self.steps.iter().map(f).collect::<Vec<f64>>();
        let steps = [
            ("k", column(|s| s.k as f64)),
            ("outcome", column(|s| s.outcome.map_or(f64::NAN, |o| o.bit() as f64))),
            ("purity", column(|s| s.purity)),
            ("entropy_bits", column(|s| s.entropy_bits)),
            ("step_probability", column(|s| s.step_probability)),
            ("cumulative_probability", column(|s| s.cumulative_probability)),
            ("baseline_probability", column(|s| s.baseline_probability)),
        ];
        let spectrum = splitting_table(
            &self.initial,
            &[("before", &self.initial), ("after", &self.conditioned)],
            self.spectrum_width,
        );
        let spectrum: Vec<(&str, Vec<f64>)> = spectrum.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        let mut out = vec![
            summary_artifact("purify", self.seed, self),
            curve_artifact("fid_before", &self.fid_before, format),
            curve_artifact("fid_after", &self.fid_after, format),
            table_artifact("purification_steps", &steps, format),
            table_artifact("spectrum", &spectrum, format),
        ];
        if !self.trajectories.is_empty() {
            let mut bytes = Vec::new();
            trajectory_sampler::write_jsonl(&mut bytes, &self.trajectories).expect("writing to memory");
            out.push(Artifact { name: "trajectories.jsonl".into(), bytes });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(m: usize, ones: usize) -> ProtocolConfig {
        ProtocolConfig::from_toml(&format!(
            "tau_ns = 300.0\nm = {m}\nones = {ones}\nsamples = 200\n[bath]\nn_spins = 12\ng_homogeneous_hz = 100e3\n[fid]\nt_max_us = 4.0\npoints = 81"
        ))
        .unwrap()
    }

    #[test]
    fn empty_string_changes_nothing() {
        let r = run_purification(&config(0, 0)).unwrap();
        assert_eq!(r.fid_before.coherence, r.fid_after.coherence);
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.t2_ratio, 1.0);
        assert!(r.sampling.is_none());
    }

    #[test]
    fn zeros_slow_the_decay() {
        let r = run_purification(&config(4, 0)).unwrap();
        assert!(r.t2_ratio > 1.0, "{}", r.t2_ratio);
        assert!(r.steps.windows(2).all(|w| w[1].purity >= w[0].purity));
        let last = r.steps.last().unwrap();
        assert!(last.cumulative_probability > last.baseline_probability);
        let s = r.sampling.as_ref().unwrap();
        assert!((s.class_frequency - s.class_probability).abs() < 5.0 * s.standard_error.max(1e-3));
    }

    #[test]
    fn forbidden_string_is_reported() {
        // two spins with gτ = π/2: ωτ ∈ {-π/2, 0, π/2}; repeated zeros prune
        // the outer bins, after which a '1' is impossible
        let mut c = config(13, 1);
        c.bath = crate::bath_model::BathSpec::list(vec![100e3, 100e3]);
        c.tau_ns = 1e9 / (4.0 * 100e3);
        c.string = Some(format!("{}1", "0".repeat(12)));
        let err = run_purification(&c).unwrap_err();
        assert!(err.is_forbidden(), "{err}");
    }

    #[test]
    fn artifacts_are_named() {
        let r = run_purification(&config(4, 0)).unwrap();
        let names: Vec<String> = r.artifacts(CurveFormat::Csv).into_iter().map(|a| a.name).collect();
        assert_eq!(
            names,
            ["summary.json", "fid_before.csv", "fid_after.csv", "purification_steps.csv", "spectrum.csv", "trajectories.jsonl"]
        );
    }
}
