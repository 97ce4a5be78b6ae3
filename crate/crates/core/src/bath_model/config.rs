//! Bath description as it appears in run configs. Frequencies are in Hz.

use super::{BathError, BuildOptions, CouplingSet, FrequencyDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Random coupling generator for synthetic inhomogeneous baths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSampler {
    /// `ln g` normal with median `median_hz` and log-space spread `sigma`.
    Lognormal { n_spins: usize, median_hz: f64, sigma: f64, seed: u64 },
    Uniform { n_spins: usize, min_hz: f64, max_hz: f64, seed: u64 },
}

impl CouplingSampler {
    fn sample_hz(&self) -> Result<Vec<f64>, BathError> {
        match *self {
            CouplingSampler::Lognormal { n_spins, median_hz, sigma, seed } => {
                if !(median_hz > 0.0) {
                    return Err(BathError::Config(format!("lognormal median must be positive, got {median_hz}")));
                }
                let dist = LogNormal::new(median_hz.ln(), sigma)
                    .map_err(|e| BathError::Config(format!("lognormal params: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..n_spins).map(|_| dist.sample(&mut rng)).collect())
            }
            CouplingSampler::Uniform { n_spins, min_hz, max_hz, seed } => {
                if !(min_hz > 0.0 && max_hz >= min_hz) {
                    return Err(BathError::Config(format!("uniform range [{min_hz}, {max_hz}] invalid")));
                }
                let dist = Uniform::new_inclusive(min_hz, max_hz)
                    .map_err(|e| BathError::Config(format!("uniform params: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..n_spins).map(|_| dist.sample(&mut rng)).collect())
            }
        }
    }
}

/// Exactly one of the coupling forms must be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_spins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_homogeneous_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_list_hz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_vectors_hz: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<CouplingSampler>,
    /// Bin width for coarse-grained builds, Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_hz: Option<f64>,
}

impl BathSpec {
    pub fn homogeneous(n_spins: usize, g_hz: f64) -> Self {
        BathSpec { n_spins: Some(n_spins), g_homogeneous_hz: Some(g_hz), ..Default::default() }
    }

    pub fn list(g_hz: Vec<f64>) -> Self {
        BathSpec { g_list_hz: Some(g_hz), ..Default::default() }
    }

    /// Couplings in rad/s.
    pub fn couplings(&self) -> Result<CouplingSet, BathError> {
        let forms = [
            self.g_homogeneous_hz.is_some(),
            self.g_list_hz.is_some(),
            self.g_vectors_hz.is_some(),
            self.sampler.is_some(),
        ];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(BathError::Config(
                "give exactly one of g_homogeneous_hz, g_list_hz, g_vectors_hz, sampler".into(),
            ));
        }
        if let Some(g) = self.g_homogeneous_hz {
            let n = self
                .n_spins
                .ok_or_else(|| BathError::Config("g_homogeneous_hz needs n_spins".into()))?;
            return CouplingSet::homogeneous(n, TAU * g);
        }
        let hz = if let Some(list) = &self.g_list_hz {
            list.clone()
        } else if let Some(vectors) = &self.g_vectors_hz {
            let scaled: Vec<[f64; 3]> =
                vectors.iter().map(|v| [TAU * v[0], TAU * v[1], TAU * v[2]]).collect();
            return self.check_count(CouplingSet::from_vectors(&scaled)?);
        } else {
            self.sampler.as_ref().expect("one form present").sample_hz()?
        };
        self.check_count(CouplingSet::new(hz.into_iter().map(|g| TAU * g).collect())?)
    }

    fn check_count(&self, set: CouplingSet) -> Result<CouplingSet, BathError> {
        match self.n_spins {
            Some(n) if n != set.n_spins() => Err(BathError::Config(format!(
                "n_spins = {n} but {} couplings given",
                set.n_spins()
            ))),
            _ => Ok(set),
        }
    }

    pub fn build_options(&self) -> Result<BuildOptions, BathError> {
        let resolution = match self.resolution_hz {
            Some(r) if !(r.is_finite() && r > 0.0) => return Err(BathError::InvalidResolution(r)),
            Some(r) => Some(TAU * r),
            None => None,
        };
        Ok(BuildOptions { resolution, ..Default::default() })
    }

    pub fn thermal(&self) -> Result<FrequencyDistribution, BathError> {
        super::build_thermal_distribution_with(&self.couplings()?, &self.build_options()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_form() {
        let spec: BathSpec = toml::from_str("n_spins = 3\ng_homogeneous_hz = 1000.0").unwrap();
        let c = spec.couplings().unwrap();
        assert_eq!(c.n_spins(), 3);
        assert_eq!(c.magnitudes()[0], TAU * 1000.0);
    }

    #[test]
    fn sampler_is_seeded() {
        let text = "[sampler]\nkind = \"lognormal\"\nn_spins = 6\nmedian_hz = 5e3\nsigma = 0.5\nseed = 9\n";
        let spec: BathSpec = toml::from_str(text).unwrap();
        let a = spec.couplings().unwrap();
        let b = spec.couplings().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_spins(), 6);
        let uniform = "[sampler]\nkind = \"uniform\"\nn_spins = 4\nmin_hz = 1e3\nmax_hz = 2e3\nseed = 1\n";
        let spec: BathSpec = toml::from_str(uniform).unwrap();
        let c = spec.couplings().unwrap();
        assert!(c.magnitudes().iter().all(|&g| (TAU * 1e3..=TAU * 2e3).contains(&g)));
    }

    #[test]
    fn ambiguous_or_missing_forms_rejected() {
        let spec = BathSpec { g_homogeneous_hz: Some(1.0), g_list_hz: Some(vec![1.0]), ..Default::default() };
        assert!(matches!(spec.couplings(), Err(BathError::Config(_))));
        assert!(BathSpec::default().couplings().is_err());
        let spec = BathSpec { g_homogeneous_hz: Some(1.0), ..Default::default() };
        assert!(spec.couplings().is_err());
        let spec = BathSpec { n_spins: Some(2), g_list_hz: Some(vec![1.0]), ..Default::default() };
        assert!(spec.couplings().is_err());
    }

    #[test]
    fn vector_form() {
        let spec: BathSpec = toml::from_str("g_vectors_hz = [[3.0, 0.0, 4.0]]").unwrap();
        assert!((spec.couplings().unwrap().magnitudes()[0] - TAU * 5.0).abs() < 1e-9);
    }
}
