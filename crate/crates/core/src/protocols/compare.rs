use super::{
    class_label, curve_artifact, dominant_splitting, summary_artifact, Artifact, CurveFormat, ProtocolConfig,
    ProtocolError,
};
use crate::measurement_kernel::{self, OutcomeString};
use crate::observables::{fid, fit_aze, fit_gaussian_decay, AzeFitResult, CurveMetadata, FidCurve, GaussianFitResult};
use crate::trajectory_sampler;
use serde::Serialize;

/// One conditioned class at one interval.
#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub label: String,
    pub ones: usize,
    pub len: usize,
    /// Probability of any single string of the class.
    pub string_probability: f64,
    pub ln_string_probability: f64,
    pub t2_fit: GaussianFitResult,
    /// Conditioned over unconditioned fitted `T2`.
    pub t2_ratio: f64,
    /// `2|ω|` of the heaviest conditioned bin, rad/s.
    pub dominant_splitting: f64,
    /// Damped-cosine fit, for the all-ones class only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aze_fit: Option<AzeFitResult>,
    /// `|ω_B − 2ω*| / 2ω*`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aze_relative_error: Option<f64>,
    #[serde(skip)]
    pub curve: FidCurve,
}

#[derive(Clone, Debug, Serialize)]
pub struct TauComparison {
    pub tau_s: f64,
    pub unconditioned_t2: GaussianFitResult,
    pub classes: Vec<ClassReport>,
    /// Largest pointwise gap between the outcome-averaged FID and the
    /// unmeasured one.
    pub averaged_max_deviation: f64,
    #[serde(skip)]
    pub unconditioned: FidCurve,
    #[serde(skip)]
    pub averaged: FidCurve,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub n_spins: usize,
    pub m: usize,
    pub taus: Vec<TauComparison>,
    #[serde(skip)]
    seed: u64,
}

/// Conditioned FIDs for each configured class at each configured interval,
/// plus the average over every string of length `m`.
pub fn run_zeno_aze_comparison(config: &ProtocolConfig) -> Result<CompareReport, ProtocolError> {
    config.validate()?;
    let spec = config
        .compare
        .as_ref()
        .ok_or_else(|| ProtocolError::Config("compare needs a [compare] section".into()))?;
    if config.m == 0 {
        return Err(ProtocolError::Config("compare needs m ≥ 1".into()));
    }
    let thermal = config.bath.thermal()?;
    let times = config.times();
    let mut taus = Vec::with_capacity(spec.taus_ns.len());
    for &tau_ns in &spec.taus_ns {
        let tau = tau_ns * 1e-9;
        let mut unconditioned = fid(&thermal, &times);
        let unconditioned_t2 = fit_gaussian_decay(&unconditioned)?;
        unconditioned.metadata = CurveMetadata {
            source: "thermal".into(),
            t2_fit: Some(unconditioned_t2.t2),
            ..Default::default()
        };

        let mut classes = Vec::with_capacity(spec.ones.len());
        for &ones in &spec.ones {
            let label = class_label(ones, config.m);
            let representative = OutcomeString::class(ones, config.m, tau)?;
            let (dist, ln_p) = measurement_kernel::condition_on_class(&thermal, tau, ones, config.m).ok_or_else(
                || {
                    let r = measurement_kernel::apply_trajectory(&thermal, &representative);
                    let f = r.forbidden.unwrap_or(measurement_kernel::Forbidden {
                        step: 0,
                        outcome: representative.outcomes()[0],
                    });
                    ProtocolError::Forbidden { label: label.clone(), step: f.step, outcome: f.outcome }
                },
            )?;
            let mut curve = fid(&dist, &times);
            let t2_fit = fit_gaussian_decay(&curve)?;
            let dominant = dominant_splitting(&dist);
            let aze_fit = if ones == config.m { Some(fit_aze(&curve)?) } else { None };
            let aze_relative_error = aze_fit
                .as_ref()
                .filter(|_| dominant > 0.0)
                .map(|f| (f.omega_b - dominant).abs() / dominant);
            curve.metadata = CurveMetadata {
                source: label.clone(),
                trajectory: Some(representative.to_string()),
                tau: Some(tau),
                t2_fit: Some(t2_fit.t2),
            };
            classes.push(ClassReport {
                label,
                ones,
                len: config.m,
                string_probability: ln_p.exp(),
                ln_string_probability: ln_p,
                t2_ratio: t2_fit.t2 / unconditioned_t2.t2,
                t2_fit,
                dominant_splitting: dominant,
                aze_fit,
                aze_relative_error,
                curve,
            });
        }

        let mut averaged = trajectory_sampler::averaged_fid(&thermal, tau, config.m, &times)?;
        averaged.metadata.source = "average over all strings".into();
        let averaged_max_deviation = averaged
            .coherence
            .iter()
            .zip(&unconditioned.coherence)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        taus.push(TauComparison { tau_s: tau, unconditioned_t2, classes, averaged_max_deviation, unconditioned, averaged });
    }
    Ok(CompareReport { n_spins: thermal.n_spins(), m: config.m, taus, seed: config.seed })
}

impl CompareReport {
    pub fn artifacts(&self, format: CurveFormat) -> Vec<Artifact> {
        let mut out = vec![summary_artifact("compare", self.seed, self)];
        for t in &self.taus {
            let tag = format!("tau{}ns", (t.tau_s * 1e9).round() as u64);
            out.push(curve_artifact(&format!("fid_unconditioned_{tag}"), &t.unconditioned, format));
            out.push(curve_artifact(&format!("fid_averaged_{tag}"), &t.averaged, format));
            for c in &t.classes {
                let stem = format!("fid_M{}_{}_{tag}", c.ones, c.len - c.ones);
                out.push(curve_artifact(&stem, &c.curve, format));
            }
        }
        out
    }
}
