//! End-to-end runs producing data files: bath purification, the
//! Zeno/anti-Zeno comparison and the purified-state lifetime.
//!
//! Every run is a pure function of its [`ProtocolConfig`] (seed included).
//! Reports render to [`Artifact`]s — named byte buffers — and leave the
//! filesystem to the caller.
//!
//! Strings are labelled `M_{n,m}` with `n` ones and `m` zeros, so `M_{0,4}`
//! is four `'0'` results and `M_{4,0}` four `'1'` results.

mod compare;
mod lifetime;
mod purification;

pub use compare::{run_zeno_aze_comparison, ClassReport, CompareReport, TauComparison};
pub use lifetime::{run_lifetime, LifetimePoint, LifetimeReport};
pub use purification::{run_purification, PurificationReport, PurificationStep, SamplingSummary};

use crate::bath_model::{BathError, BathSpec, FrequencyDistribution};
use crate::measurement_kernel::{OutcomeString, OutcomeStringError, ProbeOutcome};
use crate::observables::{time_grid, FidCurve, FitError};
use crate::trajectory_sampler::SamplerError;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error("{label} is impossible for this bath: outcome {outcome:?} at step {step} has zero probability")]
    Forbidden { label: String, step: usize, outcome: ProbeOutcome },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("fit failed: {0}")]
    Fit(#[from] FitError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ProtocolError {
    pub fn is_forbidden(&self) -> bool {
        matches!(self, ProtocolError::Forbidden { .. })
    }
}

impl From<OutcomeStringError> for ProtocolError {
    fn from(e: OutcomeStringError) -> Self {
        ProtocolError::Config(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidGrid {
    pub t_max_us: f64,
    pub points: usize,
}

impl Default for FidGrid {
    fn default() -> Self {
        FidGrid { t_max_us: 10.0, points: 201 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub taus_ns: Vec<f64>,
    /// Number of `'1'` results of each compared class; every class has
    /// length `m`.
    pub ones: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeSpec {
    /// Bath depolarization time; absent means no relaxation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_b_s: Option<f64>,
    pub wait_times_s: Vec<f64>,
}

/// Run description as read from a TOML file. Human units: Hz, ns, µs, s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default)]
    pub seed: u64,
    pub bath: BathSpec,
    pub tau_ns: f64,
    /// String length.
    pub m: usize,
    /// Number of `'1'` results in the target string, placed first.
    #[serde(default)]
    pub ones: usize,
    /// Explicit target string such as `"0010"`; must agree with `m` and
    /// `ones`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub string: Option<String>,
    #[serde(default)]
    pub fid: FidGrid,
    /// Trajectories sampled for the trajectory log.
    #[serde(default)]
    pub samples: usize,
    /// Column width of the splitting histogram; defaults to `ḡ/16`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_bin_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<LifetimeSpec>,
    /// Output directory; the command line may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn positive(name: &str, v: f64) -> Result<(), ProtocolError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ProtocolError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ProtocolConfig {
    pub fn from_toml(text: &str) -> Result<Self, ProtocolError> {
        let config: ProtocolConfig = toml::from_str(text).map_err(|e| ProtocolError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ProtocolError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProtocolError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// `m = 0` is accepted as the identity string.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        positive("tau_ns", self.tau_ns)?;
        positive("fid.t_max_us", self.fid.t_max_us)?;
        if self.fid.points < 8 {
            return Err(ProtocolError::Config(format!("fid.points must be at least 8, got {}", self.fid.points)));
        }
        if self.ones > self.m {
            return Err(ProtocolError::Config(format!("ones = {} exceeds m = {}", self.ones, self.m)));
        }
        if let Some(symbols) = &self.string {
            let parsed = OutcomeString::parse(symbols, self.tau())?;
            if parsed.len() != self.m || parsed.ones() != self.ones {
                return Err(ProtocolError::Config(format!(
                    "string {symbols:?} does not match m = {} and ones = {}",
                    self.m, self.ones
                )));
            }
        }
        if let Some(w) = self.spectrum_bin_hz {
            positive("spectrum_bin_hz", w)?;
        }
        if let Some(c) = &self.compare {
            if c.taus_ns.is_empty() || c.ones.is_empty() {
                return Err(ProtocolError::Config("compare needs at least one tau and one class".into()));
            }
            for &t in &c.taus_ns {
                positive("compare.taus_ns", t)?;
            }
            if let Some(&n) = c.ones.iter().find(|&&n| n > self.m) {
                return Err(ProtocolError::Config(format!("compare class with {n} ones exceeds m = {}", self.m)));
            }
        }
        if let Some(l) = &self.lifetime {
            if let Some(t1) = l.t1_b_s {
                positive("lifetime.t1_b_s", t1)?;
            }
            if let Some(&w) = l.wait_times_s.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                return Err(ProtocolError::Config(format!("wait times must be non-negative, got {w}")));
            }
        }
        self.bath.couplings()?;
        self.bath.build_options()?;
        Ok(())
    }

    /// Seconds.
    pub fn tau(&self) -> f64 {
        self.tau_ns * 1e-9
    }

    pub fn times(&self) -> Vec<f64> {
        time_grid(self.fid.t_max_us * 1e-6, self.fid.points)
    }

    pub fn target_string(&self) -> Result<OutcomeString, ProtocolError> {
        Ok(match &self.string {
            Some(symbols) => OutcomeString::parse(symbols, self.tau())?,
            None => OutcomeString::class(self.ones, self.m, self.tau())?,
        })
    }
}

/// `M_{n,m}` label with `n` ones and `m` zeros.
pub fn class_label(ones: usize, len: usize) -> String {
    format!("M_{{{},{}}}", ones, len - ones)
}

/// How curve files are written. Summaries are always JSON.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveFormat {
    #[default]
    Csv,
    Json,
}

impl CurveFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CurveFormat::Csv => "csv",
            CurveFormat::Json => "json",
        }
    }
}

/// One output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
        bytes.push(b'\n');
        Artifact { name: name.to_string(), bytes }
    }

    fn text(name: String, text: String) -> Self {
        Artifact { name, bytes: text.into_bytes() }
    }
}

/// Envelope shared by every `summary.json`.
#[derive(Clone, Debug, Serialize)]
struct Summary<'a, R: Serialize> {
    protocol: &'static str,
    engine_version: &'static str,
    seed: u64,
    results: &'a R,
}

fn summary_artifact<R: Serialize>(protocol: &'static str, seed: u64, results: &R) -> Artifact {
    Artifact::json("summary.json", &Summary { protocol, engine_version: ENGINE_VERSION, seed, results })
}

fn curve_artifact(stem: &str, curve: &FidCurve, format: CurveFormat) -> Artifact {
    let name = format!("{stem}.{}", format.extension());
    match format {
        CurveFormat::Csv => Artifact::text(name, curve.to_csv()),
        CurveFormat::Json => Artifact::json(&name, curve),
    }
}

/// Columns of equal-length numeric series as CSV or as a JSON object of
/// arrays.
fn table_artifact(stem: &str, columns: &[(&str, Vec<f64>)], format: CurveFormat) -> Artifact {
    let name = format!("{stem}.{}", format.extension());
    match format {
        CurveFormat::Csv => {
            let mut out = columns.iter().map(|c| c.0).collect::<Vec<_>>().join(",");
            out.push('\n');
            let rows = columns.first().map_or(0, |c| c.1.len());
            for i in 0..rows {
                let row: Vec<String> = columns.iter().map(|c| c.1[i].to_string()).collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
            Artifact::text(name, out)
        }
        CurveFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                columns.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect();
            Artifact::json(&name, &map)
        }
    }
}

/// Splitting histograms of several states on the grid of `reference`
/// (whose support must contain theirs), in 1/kHz against kHz.
fn splitting_table(
    reference: &FrequencyDistribution,
    states: &[(&str, &FrequencyDistribution)],
    width: f64,
) -> Vec<(String, Vec<f64>)> {
    let cell = |omega: f64| (2.0 * omega / width).round() as i64;
    let lo = reference.bins().first().map_or(0, |b| cell(b.omega));
    let hi = reference.bins().last().map_or(0, |b| cell(b.omega));
    let count = (hi - lo + 1) as usize;
    let khz_per_rad = 1e-3 / std::f64::consts::TAU;
    let mut table = vec![(
        "splitting_khz".to_string(),
        (lo..=hi).map(|c| c as f64 * width * khz_per_rad).collect(),
    )];
    for (name, dist) in states {
        let mut density = vec![0.0; count];
        for b in dist.bins() {
            let k = (cell(b.omega) - lo).clamp(0, count as i64 - 1) as usize;
            density[k] += b.weight / (width * khz_per_rad);
        }
        table.push((format!("density_{name}_per_khz"), density));
    }
    table
}

fn spectrum_width(config: &ProtocolConfig, dist: &FrequencyDistribution) -> f64 {
    config.spectrum_bin_hz.map_or(dist.scale() / 16.0, |hz| std::f64::consts::TAU * hz)
}

/// `2|ω|` of the heaviest bin.
fn dominant_splitting(dist: &FrequencyDistribution) -> f64 {
    dist.bins()
        .iter()
        .fold((f64::NEG_INFINITY, 0.0), |best, b| {
            if b.weight > best.0 * (1.0 + 1e-12) {
                (b.weight, 2.0 * b.omega.abs())
            } else {
                best
            }
        })
        .1
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        tau_ns = 600.0
        m = 4
        [bath]
        n_spins = 10
        g_homogeneous_hz = 50e3
    "#;

    #[test]
    fn parses_minimal_config() {
        let c = ProtocolConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.fid, FidGrid::default());
        assert!((c.tau() - 600e-9).abs() < 1e-20);
        assert_eq!(c.target_string().unwrap().to_string(), "0000");
    }

    #[test]
    fn rejects_bad_values() {
        let unknown = format!("{MINIMAL}\nbogus = 1");
        assert!(matches!(ProtocolConfig::from_toml(&unknown), Err(ProtocolError::Config(_))));
        let bad_tau = MINIMAL.replace("600.0", "-1.0");
        assert!(ProtocolConfig::from_toml(&bad_tau).is_err());
        let too_many = MINIMAL.replace("m = 4", "m = 4\nones = 5");
        assert!(ProtocolConfig::from_toml(&too_many).is_err());
        let mismatch = MINIMAL.replace("m = 4", "m = 4\nstring = \"0100\"");
        assert!(ProtocolConfig::from_toml(&mismatch).is_err());
        let ok = MINIMAL.replace("m = 4", "m = 4\nones = 1\nstring = \"0100\"");
        assert_eq!(ProtocolConfig::from_toml(&ok).unwrap().target_string().unwrap().to_string(), "0100");
        let no_bath = MINIMAL.replace("g_homogeneous_hz = 50e3", "");
        assert!(matches!(ProtocolConfig::from_toml(&no_bath), Err(ProtocolError::Bath(_))));
    }

    #[test]
    fn labels_follow_ones_then_zeros() {
        assert_eq!(class_label(0, 4), "M_{0,4}");
        assert_eq!(class_label(4, 4), "M_{4,0}");
    }

    #[test]
    fn csv_table_layout() {
        let a = table_artifact("t", &[("x", vec![1.0, 2.0]), ("y", vec![0.5, 0.25])], CurveFormat::Csv);
        assert_eq!(a.name, "t.csv");
        assert_eq!(String::from_utf8(a.bytes).unwrap(), "x,y\n1,0.5\n2,0.25\n");
    }
}
