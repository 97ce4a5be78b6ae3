//! Bath spectra, control filter functions and the filter-function
//! decoherence integral `exp(-∫ G(ω) F(t, ω) dω)`.
//!
//! Normalization: `∫ G dω` is the variance of the probe splitting field
//! (rad²/s²) and the free-evolution filter is `½ t² sinc²(ωt/2)`, so a
//! quasi-static spectrum of power `P` yields `exp(-P t²/2)`.

use crate::bath_model::FrequencyDistribution;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const QUAD_RTOL: f64 = 1e-6;
const MAX_DEPTH: u32 = 48;
const MAX_WINDOW_DOUBLINGS: u32 = 40;
const MAX_PANELS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumFunction {
    /// Tabulated `G`, linearly interpolated, zero outside the grid.
    Grid { omega: Vec<f64>, density: Vec<f64> },
    /// Symmetric pair of Gaussians at `±center` with total power `power`.
    Gaussian { power: f64, width: f64, center: f64 },
    /// Symmetric pair of Lorentzians at `±center` with total power `power`.
    Lorentzian { power: f64, width: f64, center: f64 },
}

impl SpectrumFunction {
    /// Slowly fluctuating version of a static bath: Gaussian spectrum whose
    /// power is the variance of the splitting `2ω` and whose width is the
    /// bath correlation rate.
    pub fn quasi_static(dist: &FrequencyDistribution, correlation_rate: f64) -> Self {
        SpectrumFunction::Gaussian { power: 4.0 * dist.variance(), width: correlation_rate, center: 0.0 }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            SpectrumFunction::Grid { omega: grid, density } => interpolate(grid, density, omega),
            SpectrumFunction::Gaussian { power, width, center } => {
                let norm = power / (2.0 * (2.0 * PI).sqrt() * width);
                let a = (omega - center) / width;
                let b = (omega + center) / width;
                norm * ((-0.5 * a * a).exp() + (-0.5 * b * b).exp())
            }
            SpectrumFunction::Lorentzian { power, width, center } => {
                let norm = power * width / (2.0 * PI);
                norm * (1.0 / ((omega - center).powi(2) + width * width)
                    + 1.0 / ((omega + center).powi(2) + width * width))
            }
        }
    }

    /// Points inside the tabulated support, or `None` for closed forms.
    fn grid(&self) -> Option<&[f64]> {
        match self {
            SpectrumFunction::Grid { omega, .. } => Some(omega),
            _ => None,
        }
    }

    /// Center and width of each lobe for closed forms.
    fn lobes(&self) -> Option<(f64, f64, bool)> {
        match *self {
            SpectrumFunction::Gaussian { width, center, .. } => Some((center, width, false)),
            SpectrumFunction::Lorentzian { width, center, .. } => Some((center, width, true)),
            SpectrumFunction::Grid { .. } => None,
        }
    }

    /// Trapezoid integral of a grid, closed-form power otherwise.
    pub fn total_power(&self) -> f64 {
        match self {
            SpectrumFunction::Grid { omega, density } => omega
                .windows(2)
                .zip(density.windows(2))
                .map(|(w, d)| 0.5 * (w[1] - w[0]) * (d[0] + d[1]))
                .sum(),
            SpectrumFunction::Gaussian { power, .. } | SpectrumFunction::Lorentzian { power, .. } => *power,
        }
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if grid.is_empty() || x < grid[0] || x > grid[grid.len() - 1] {
        return 0.0;
    }
    let i = grid.partition_point(|&g| g <= x);
    if i == 0 {
        return values[0];
    }
    if i == grid.len() {
        return values[grid.len() - 1];
    }
    let (x0, x1) = (grid[i - 1], grid[i]);
    let s = (x - x0) / (x1 - x0);
    values[i - 1] * (1.0 - s) + values[i] * s
}

/// Control power spectrum `F(t, ω)` applied to the probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterFunction {
    FreeEvolution,
    /// Projective measurements every `tau` seconds: each interval is an
    /// independent free-evolution segment.
    Measurements { tau: f64 },
    /// Carr–Purcell–Meiboom–Gill with `pulses` π pulses at `t(k - ½)/n`.
    Cpmg { pulses: usize },
    /// Tabulated at a fixed time; linearly interpolated, zero outside.
    Tabulated { omega: Vec<f64>, values: Vec<f64> },
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn free_segment(duration: f64, omega: f64) -> f64 {
    let s = sinc(0.5 * omega * duration);
    0.5 * duration * duration * s * s
}

impl FilterFunction {
    pub fn eval(&self, t: f64, omega: f64) -> f64 {
        match self {
            FilterFunction::FreeEvolution => free_segment(t, omega),
            FilterFunction::Measurements { tau } => {
                let full = (t / tau + 1e-12).floor();
                let rest = (t - full * tau).max(0.0);
                full * free_segment(*tau, omega) + free_segment(rest, omega)
            }
            FilterFunction::Cpmg { pulses } => cpmg(*pulses, t, omega),
            FilterFunction::Tabulated { omega: grid, values } => interpolate(grid, values, omega),
        }
    }

    fn grid(&self) -> Option<&[f64]> {
        match self {
            FilterFunction::Tabulated { omega, .. } => Some(omega),
            _ => None,
        }
    }

    /// Frequency scale on which `F(t, ·)` oscillates.
    fn oscillation_scale(&self, t: f64) -> f64 {
        match self {
            FilterFunction::FreeEvolution => 2.0 * PI / t.max(f64::MIN_POSITIVE),
            FilterFunction::Measurements { tau } => 2.0 * PI / t.max(*tau),
            FilterFunction::Cpmg { pulses } => 2.0 * PI / t.max(f64::MIN_POSITIVE) * (*pulses as f64 + 1.0).recip(),
            FilterFunction::Tabulated { .. } => f64::INFINITY,
        }
    }
}

/// `½|Σ_s sign_s ∫_{segment} e^{iωu} du|²` for the CPMG sign pattern.
fn cpmg(pulses: usize, t: f64, omega: f64) -> f64 {
    let n = pulses as f64;
    let mut edges = Vec::with_capacity(pulses + 2);
    edges.push(0.0);
    edges.extend((1..=pulses).map(|k| t * (k as f64 - 0.5) / n));
    edges.push(t);
    let (mut re, mut im) = (0.0, 0.0);
    let mut sign = 1.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = b - a;
        // ∫_a^b e^{iωu} du = d·sinc(ωd/2)·e^{iω(a+b)/2}
        let amp = d * sinc(0.5 * omega * d);
        let phase = 0.5 * omega * (a + b);
        re += sign * amp * phase.cos();
        im += sign * amp * phase.sin();
        sign = -sign;
    }
    0.5 * (re * re + im * im)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KkError {
    #[error("spectrum and filter grids do not overlap")]
    NonOverlappingGrids,
    #[error("decoherence integral does not converge (last estimate {0})")]
    Divergent(f64),
    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
}

/// `exp(-∫ G(ω) F(t, ω) dω)`, integrated by adaptive Simpson to a relative
/// tolerance of 1e-6.
pub fn kk_decoherence(g: &SpectrumFunction, f: &FilterFunction, t: f64) -> Result<f64, KkError> {
    Ok((-decoherence_exponent(g, f, t)?).exp())
}

/// The integral `∫ G(ω) F(t, ω) dω` itself.
pub fn decoherence_exponent(g: &SpectrumFunction, f: &FilterFunction, t: f64) -> Result<f64, KkError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(KkError::InvalidTime(t));
    }
    let integrand = |w: f64| g.eval(w) * f.eval(t, w);
    let scale = f.oscillation_scale(t);

    let grids: Vec<&[f64]> = [g.grid(), f.grid()].into_iter().flatten().collect();
    if grids.iter().any(|grid| grid.len() < 2) {
        return Err(KkError::NonOverlappingGrids);
    }
    let value = if grids.is_empty() {
        let (center, width, heavy_tail) = g.lobes().expect("closed-form spectrum");
        integrate_extending(&integrand, center, width, heavy_tail, scale)?
    } else {
        let lo = grids.iter().map(|grid| grid[0]).fold(f64::NEG_INFINITY, f64::max);
        let hi = grids.iter().map(|grid| grid[grid.len() - 1]).fold(f64::INFINITY, f64::min);
        if lo >= hi {
            return Err(KkError::NonOverlappingGrids);
        }
        let knots: Vec<f64> = grids.iter().flat_map(|grid| grid.iter().copied()).collect();
        let edges = panel_edges(lo, hi, g.lobes(), scale, &knots);
        integrate_panels(&integrand, &edges)?
    };
    if !value.is_finite() {
        return Err(KkError::Divergent(value));
    }
    Ok(value)
}

/// Panel boundaries on `[lo, hi]`: every knot, a fine uniform mesh over
/// `±8` widths of each spectral lobe, and geometrically growing panels
/// elsewhere.
fn panel_edges(lo: f64, hi: f64, lobes: Option<(f64, f64, bool)>, scale: f64, knots: &[f64]) -> Vec<f64> {
    let mut edges: Vec<f64> = vec![lo, hi];
    edges.extend(knots.iter().copied().filter(|x| *x > lo && *x < hi));
    let mut fine = 0.25 * scale;
    let mut focus = Vec::new();
    if let Some((center, width, _)) = lobes {
        fine = fine.min(0.5 * width);
        focus.push((-center - 8.0 * width, -center + 8.0 * width));
        if center != 0.0 {
            focus.push((center - 8.0 * width, center + 8.0 * width));
        }
    }
    for &(a, b) in &focus {
        let a = a.max(lo);
        let b = b.min(hi);
        if a >= b {
            continue;
        }
        let step = fine.max((b - a) / MAX_PANELS as f64);
        let n = ((b - a) / step).ceil() as usize;
        edges.extend((0..=n).map(|i| a + (b - a) * i as f64 / n as f64));
        // geometric tails away from the lobe
        let mut d = step;
        while b + d < hi || a - d > lo {
            if b + d < hi {
                edges.push(b + d);
            }
            if a - d > lo {
                edges.push(a - d);
            }
            d *= 1.5;
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    // split long knot intervals so oscillations of F are sampled
    let mut out = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let pieces = if focus.is_empty() {
            (((w[1] - w[0]) / fine).ceil() as usize).clamp(1, MAX_PANELS / edges.len().max(1) + 1)
        } else {
            1
        };
        out.extend((0..pieces).map(|i| w[0] + (w[1] - w[0]) * i as f64 / pieces as f64));
    }
    out.push(hi);
    out
}

/// Integrates over `[-L, L]` around both lobes, doubling `L` until the
/// estimate stops changing.
fn integrate_extending(
    f: &impl Fn(f64) -> f64,
    center: f64,
    width: f64,
    heavy_tail: bool,
    scale: f64,
) -> Result<f64, KkError> {
    let lobes = Some((center, width, heavy_tail));
    let mut half = center.abs() + 8.0 * width;
    let mut previous = integrate_panels(f, &panel_edges(-half, half, lobes, scale, &[]))?;
    for _ in 0..MAX_WINDOW_DOUBLINGS {
        half *= 2.0;
        let current = integrate_panels(f, &panel_edges(-half, half, lobes, scale, &[]))?;
        let settled = (current - previous).abs() <= QUAD_RTOL * current.abs().max(f64::MIN_POSITIVE);
        if settled && (!heavy_tail || half > center.abs() + 1e3 * width) {
            return Ok(current);
        }
        if current == 0.0 && previous == 0.0 {
            return Ok(0.0);
        }
        previous = current;
    }
    Err(KkError::Divergent(previous))
}

fn integrate_panels(f: &impl Fn(f64) -> f64, edges: &[f64]) -> Result<f64, KkError> {
    // first pass fixes the absolute tolerance scale
    let coarse: f64 = edges.windows(2).map(|w| simpson(f, w[0], w[1]).abs()).sum();
    if coarse == 0.0 {
        return Ok(0.0);
    }
    let tol = QUAD_RTOL * coarse / (edges.len() as f64).sqrt();
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += adaptive(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    }
    Ok(total)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Normalized histogram of the probe splitting `2ω` with columns of width
/// `bin_width` centred on multiples of `bin_width`.
pub fn splitting_spectrum(dist: &FrequencyDistribution, bin_width: f64) -> SpectrumFunction {
    assert!(bin_width > 0.0 && bin_width.is_finite(), "bin width must be positive");
    let cells: Vec<(i64, f64)> = dist
        .bins()
        .iter()
        .map(|b| ((2.0 * b.omega / bin_width).round() as i64, b.weight))
        .collect();
    let lo = cells.iter().map(|c| c.0).min().unwrap_or(0);
    let hi = cells.iter().map(|c| c.0).max().unwrap_or(0);
    let mut density = vec![0.0; (hi - lo + 1) as usize];
    for (cell, w) in cells {
        density[(cell - lo) as usize] += w / bin_width;
    }
    let omega = (lo..=hi).map(|c| c as f64 * bin_width).collect();
    SpectrumFunction::Grid { omega, density }
}
