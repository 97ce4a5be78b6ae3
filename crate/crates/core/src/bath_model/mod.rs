//! Exact diagonal representation of a star-coupled spin-1/2 bath.
//!
//! Every bath spin contributes `±g_k/2` to the bath field operator, so the
//! fully depolarized bath is a discrete distribution over the eigenvalues
//! `ω = Σ_k s_k g_k / 2` with `s_k = ±1`. Only products `ω·t` are physical;
//! the probe coherence between its two branches rotates at the splitting
//! `2ω`.

mod collective;
mod config;
mod multiplicity;

pub use collective::{gaussian_j_distribution, CollectiveDistribution};
pub use config::{BathSpec, CouplingSampler};
pub use multiplicity::Multiplicity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance (in units of `g_bar`) below which two eigenvalues are
/// treated as one degenerate level.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Default ceiling on the number of bins an exact build may produce.
pub const DEFAULT_BIN_CAP: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("coupling set is empty")]
    EmptyCouplings,
    #[error("coupling {index} is not a finite positive magnitude: {value}")]
    InvalidCoupling { index: usize, value: f64 },
    #[error("bin resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("exact build needs {bins} bins, above the cap of {cap}; pass a resolution")]
    TooManyBins { bins: usize, cap: usize },
    #[error("collective distribution needs an even spin count >= 2, got {0}")]
    InvalidSpinCount(usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid bath config: {0}")]
    Config(String),
}

/// Probe–bath coupling magnitudes in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    magnitudes: Vec<f64>,
}

impl CouplingSet {
    pub fn new(magnitudes: Vec<f64>) -> Result<Self, BathError> {
        if magnitudes.is_empty() {
            return Err(BathError::EmptyCouplings);
        }
        for (index, &value) in magnitudes.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(BathError::InvalidCoupling { index, value });
            }
        }
        let set = CouplingSet { magnitudes };
        if !(set.g_bar().is_finite() && set.g_bar() > 0.0) {
            return Err(BathError::InvalidCoupling { index: 0, value: set.g_bar() });
        }
        Ok(set)
    }

    pub fn homogeneous(n_spins: usize, g: f64) -> Result<Self, BathError> {
        Self::new(vec![g; n_spins])
    }

    /// Vector couplings reduce to their Euclidean norms: each spin is
    /// diagonalized along its own coupling direction.
    pub fn from_vectors(vectors: &[[f64; 3]]) -> Result<Self, BathError> {
        Self::new(
            vectors
                .iter()
                .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
                .collect(),
        )
    }

    pub fn n_spins(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    /// `sqrt(Σ g_k²)`.
    pub fn g_bar(&self) -> f64 {
        self.magnitudes.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// One eigenvalue of the bath field operator with its probability mass and
/// the dimension of the eigenspace carrying it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// rad/s
    pub omega: f64,
    pub weight: f64,
    pub multiplicity: Multiplicity,
}

/// Diagonal bath state: weighted, multiplicity-tagged eigenvalues in
/// strictly increasing `omega` order. Within each bin the state is
/// maximally mixed over the degenerate eigenspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDistribution {
    bins: Vec<Bin>,
    n_spins: usize,
    /// Coupling scale `g_bar` that sets the merge tolerance.
    scale: f64,
    /// Natural log of the product of all normalization factors removed by
    /// conditioning since the distribution was built.
    ln_norm: f64,
    /// Eigenspace dimension dropped by underflow pruning.
    pruned: Multiplicity,
}

impl FrequencyDistribution {
    /// Builds a canonical distribution: sorted, equal eigenvalues merged,
    /// weights normalized to one.
    pub fn from_bins(mut bins: Vec<Bin>, n_spins: usize, scale: f64) -> Result<Self, BathError> {
        if bins.is_empty() {
            return Err(BathError::InvalidDistribution("no bins".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(BathError::InvalidDistribution(format!("scale {scale}")));
        }
        for b in &bins {
            if !b.omega.is_finite() || !b.weight.is_finite() || b.weight < 0.0 {
                return Err(BathError::InvalidDistribution(format!(
                    "bin at omega={} has weight {}",
                    b.omega, b.weight
                )));
            }
            if b.multiplicity.ln() < 0.0 || b.multiplicity == Multiplicity::Exact(0) {
                return Err(BathError::InvalidDistribution("multiplicity below one".into()));
            }
        }
        bins.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let tol = MERGE_TOLERANCE * scale;
        let mut merged = Vec::with_capacity(bins.len());
        for b in bins {
            push_merged(&mut merged, b, tol);
        }
        let total: f64 = merged.iter().map(|b| b.weight).sum();
        if total <= 0.0 {
            return Err(BathError::InvalidDistribution("total weight is zero".into()));
        }
        for b in &mut merged {
            b.weight /= total;
        }
        Ok(FrequencyDistribution {
            bins: merged,
            n_spins,
            scale,
            ln_norm: 0.0,
            pruned: Multiplicity::Exact(0),
        })
    }

    /// Assembles an already canonical, normalized distribution.
    pub(crate) fn from_canonical(
        bins: Vec<Bin>,
        n_spins: usize,
        scale: f64,
        ln_norm: f64,
        pruned: Multiplicity,
    ) -> Self {
        debug_assert!(bins.windows(2).all(|w| w[0].omega < w[1].omega));
        FrequencyDistribution { bins, n_spins, scale, ln_norm, pruned }
    }

    /// A single eigenvalue carrying all the weight.
    pub fn single(omega: f64, multiplicity: Multiplicity, n_spins: usize, scale: f64) -> Self {
        Self::from_canonical(
            vec![Bin { omega, weight: 1.0, multiplicity }],
            n_spins,
            scale,
            0.0,
            Multiplicity::Exact(0),
        )
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn ln_norm(&self) -> f64 {
        self.ln_norm
    }

    pub fn pruned(&self) -> Multiplicity {
        self.pruned
    }

    pub fn merge_tolerance(&self) -> f64 {
        MERGE_TOLERANCE * self.scale
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|b| b.omega)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|b| b.weight)
    }

    pub fn total_multiplicity(&self) -> Multiplicity {
        self.bins.iter().map(|b| b.multiplicity).sum()
    }

    pub fn mean(&self) -> f64 {
        self.bins.iter().map(|b| b.weight * b.omega).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.bins.iter().map(|b| b.weight * (b.omega - mean).powi(2)).sum()
    }

    /// Bins whose weight is strictly positive.
    pub fn populated(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| b.weight > 0.0)
    }

    /// Merges bins onto a grid of the given width anchored at zero. The
    /// representative eigenvalue of a cell is the weight average.
    pub fn rebin(&self, width: f64) -> Result<Self, BathError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(BathError::InvalidResolution(width));
        }
        Ok(FrequencyDistribution {
            bins: coarsen(&self.bins, width),
            ..self.clone()
        })
    }

    /// `(1 - eps)·self + eps·other`, aligned by eigenvalue.
    pub fn mix(&self, other: &FrequencyDistribution, eps: f64) -> Self {
        let eps = eps.clamp(0.0, 1.0);
        let tol = self.merge_tolerance().max(other.merge_tolerance());
        let mut out = Vec::with_capacity(self.len() + other.len());
        let scaled = |bins: &[Bin], f: f64| -> Vec<Bin> {
            bins.iter().map(|b| Bin { weight: b.weight * f, ..*b }).collect()
        };
        let a = scaled(&self.bins, 1.0 - eps);
        let b = scaled(&other.bins, eps);
        for bin in merge_sorted(&a, &b) {
            push_aligned(&mut out, bin, tol);
        }
        FrequencyDistribution {
            bins: out,
            n_spins: self.n_spins.max(other.n_spins),
            scale: self.scale,
            ln_norm: 0.0,
            pruned: Multiplicity::Exact(0),
        }
    }

    /// Total-variation distance `½ Σ |p - q|` with bins aligned by eigenvalue.
    pub fn total_variation(&self, other: &FrequencyDistribution) -> f64 {
        let tol = self.merge_tolerance().max(other.merge_tolerance());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.bins, &other.bins);
        let mut acc = 0.0;
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].omega < b[j].omega - tol) {
                acc += a[i].weight;
                i += 1;
            } else if i == a.len() || b[j].omega < a[i].omega - tol {
                acc += b[j].weight;
                j += 1;
            } else {
                acc += (a[i].weight - b[j].weight).abs();
                i += 1;
                j += 1;
            }
        }
        0.5 * acc
    }
}

/// Appends `bin`, folding it into the last bin when the eigenvalues agree
/// within `tol`.
fn push_merged(out: &mut Vec<Bin>, bin: Bin, tol: f64) {
    match out.last_mut() {
        Some(last) if bin.omega - last.omega <= tol => {
            let w = last.weight + bin.weight;
            if bin.omega != last.omega && w > 0.0 {
                last.omega = (last.weight * last.omega + bin.weight * bin.omega) / w;
            }
            last.weight = w;
            last.multiplicity = last.multiplicity + bin.multiplicity;
        }
        _ => out.push(bin),
    }
}

/// Like [`push_merged`] for two views of the same eigenspace: weights add,
/// the multiplicity is shared rather than summed.
fn push_aligned(out: &mut Vec<Bin>, bin: Bin, tol: f64) {
    match out.last_mut() {
        Some(last) if bin.omega - last.omega <= tol => {
            last.weight += bin.weight;
            if bin.multiplicity > last.multiplicity {
                last.multiplicity = bin.multiplicity;
            }
        }
        _ => out.push(bin),
    }
}

fn merge_sorted(a: &[Bin], b: &[Bin]) -> Vec<Bin> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].omega <= b[j].omega {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn coarsen(bins: &[Bin], width: f64) -> Vec<Bin> {
    let mut out: Vec<Bin> = Vec::new();
    let mut current_cell = None;
    for b in bins {
        let cell = (b.omega / width).round() as i64;
        if current_cell == Some(cell) {
            let last = out.last_mut().expect("cell opened");
            let w = last.weight + b.weight;
            if w > 0.0 {
                last.omega = (last.weight * last.omega + b.weight * b.omega) / w;
            }
            last.weight = w;
            last.multiplicity = last.multiplicity + b.multiplicity;
        } else {
            out.push(*b);
            current_cell = Some(cell);
        }
    }
    out
}

/// Options for [`build_thermal_distribution_with`].
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Bin width in rad/s; `None` keeps the build exact.
    pub resolution: Option<f64>,
    pub bin_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { resolution: None, bin_cap: DEFAULT_BIN_CAP }
    }
}

/// Depolarized bath: every spin independently `±g_k/2` with probability ½.
pub fn build_thermal_distribution(
    couplings: &CouplingSet,
    resolution: Option<f64>,
) -> Result<FrequencyDistribution, BathError> {
    build_thermal_distribution_with(couplings, &BuildOptions { resolution, ..Default::default() })
}

pub fn build_thermal_distribution_with(
    couplings: &CouplingSet,
    options: &BuildOptions,
) -> Result<FrequencyDistribution, BathError> {
    if let Some(r) = options.resolution {
        if !(r.is_finite() && r > 0.0) {
            return Err(BathError::InvalidResolution(r));
        }
    }
    let scale = couplings.g_bar();
    let tol = MERGE_TOLERANCE * scale;

    // Canonical order makes the result independent of the input order.
    let mut order: Vec<f64> = couplings.magnitudes().to_vec();
    order.sort_by(|a, b| b.total_cmp(a));

    let mut bins = vec![Bin { omega: 0.0, weight: 1.0, multiplicity: Multiplicity::ONE }];
    for g in order {
        let half = 0.5 * g;
        let lower: Vec<Bin> = bins
            .iter()
            .map(|b| Bin { omega: b.omega - half, weight: 0.5 * b.weight, ..*b })
            .collect();
        let upper: Vec<Bin> = bins
            .iter()
            .map(|b| Bin { omega: b.omega + half, weight: 0.5 * b.weight, ..*b })
            .collect();
        let mut next = Vec::with_capacity(2 * bins.len());
        for b in merge_sorted(&lower, &upper) {
            push_merged(&mut next, b, tol);
        }
        if let Some(width) = options.resolution {
            next = coarsen(&next, width);
        }
        if next.len() > options.bin_cap {
            return Err(BathError::TooManyBins { bins: next.len(), cap: options.bin_cap });
        }
        bins = next;
    }

    let total: f64 = bins.iter().map(|b| b.weight).sum();
    for b in &mut bins {
        b.weight /= total;
    }
    Ok(FrequencyDistribution::from_canonical(
        bins,
        couplings.n_spins(),
        scale,
        0.0,
        Multiplicity::Exact(0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_spin_has_two_half_weight_levels() {
        let g = 2.0 * PI * 100e3;
        let d = build_thermal_distribution(&CouplingSet::homogeneous(1, g).unwrap(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.bins()[0].omega, -PI * 100e3);
        assert_eq!(d.bins()[1].omega, PI * 100e3);
        assert!(d.bins().iter().all(|b| b.weight == 0.5 && b.multiplicity == Multiplicity::ONE));
    }

    #[test]
    fn two_homogeneous_spins() {
        let g = 3.0;
        let d = build_thermal_distribution(&CouplingSet::homogeneous(2, g).unwrap(), None).unwrap();
        let expected = [(-g, 0.25, 1), (0.0, 0.5, 2), (g, 0.25, 1)];
        assert_eq!(d.len(), 3);
        for (b, (o, w, m)) in d.bins().iter().zip(expected) {
            assert_eq!(b.omega, o);
            assert_eq!(b.weight, w);
            assert_eq!(b.multiplicity, Multiplicity::Exact(m));
        }
    }

    #[test]
    fn rejects_bad_couplings() {
        assert_eq!(CouplingSet::new(vec![]), Err(BathError::EmptyCouplings));
        assert!(matches!(
            CouplingSet::new(vec![1.0, 0.0]),
            Err(BathError::InvalidCoupling { index: 1, .. })
        ));
        assert!(CouplingSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn rejects_bad_resolution() {
        let c = CouplingSet::homogeneous(3, 1.0).unwrap();
        assert_eq!(build_thermal_distribution(&c, Some(0.0)), Err(BathError::InvalidResolution(0.0)));
        assert!(build_thermal_distribution(&c, Some(-1.0)).is_err());
    }

    #[test]
    fn bin_cap_demands_resolution() {
        let c = CouplingSet::new((1..=12).map(|k| 1.0 + 0.1 * (k as f64).sqrt()).collect()).unwrap();
        let opts = BuildOptions { resolution: None, bin_cap: 1000 };
        assert!(matches!(
            build_thermal_distribution_with(&c, &opts),
            Err(BathError::TooManyBins { cap: 1000, .. })
        ));
        let opts = BuildOptions { resolution: Some(0.05), bin_cap: 1000 };
        let d = build_thermal_distribution_with(&c, &opts).unwrap();
        assert!(d.len() <= 1000);
        assert!((d.weights().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(d.total_multiplicity(), Multiplicity::Exact(4096));
    }

    #[test]
    fn vector_couplings_reduce_to_magnitudes() {
        let c = CouplingSet::from_vectors(&[[3.0, 4.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(c.magnitudes(), &[5.0, 2.0]);
    }

    #[test]
    fn mix_and_total_variation() {
        let c = CouplingSet::homogeneous(2, 1.0).unwrap();
        let thermal = build_thermal_distribution(&c, None).unwrap();
        let spike = FrequencyDistribution::single(0.0, Multiplicity::Exact(2), 2, c.g_bar());
        let mixed = spike.mix(&thermal, 0.5);
        let w: Vec<f64> = mixed.weights().collect();
        assert_eq!(w, vec![0.125, 0.75, 0.125]);
        assert_eq!(mixed.bins()[1].multiplicity, Multiplicity::Exact(2));
        assert!((spike.total_variation(&thermal) - 0.5).abs() < 1e-15);
        assert_eq!(thermal.total_variation(&thermal), 0.0);
    }

    #[test]
    fn rebin_keeps_mass_and_multiplicity() {
        let c = CouplingSet::new(vec![1.0, 1.1, 1.3]).unwrap();
        let d = build_thermal_distribution(&c, None).unwrap();
        assert_eq!(d.len(), 8);
        let r = d.rebin(1.0).unwrap();
        assert!(r.len() < 8);
        assert!((r.weights().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(r.total_multiplicity(), Multiplicity::Exact(8));
        assert!((r.mean() - d.mean()).abs() < 1e-14);
    }
}
