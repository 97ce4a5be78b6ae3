//! Nonlinear least squares for probe coherence curves.

use super::FidCurve;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const MAX_ITERATIONS: usize = 2000;
const MIN_SAMPLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("times and values differ in length")]
    LengthMismatch,
}

/// A model `y = f(t; p)` with analytic parameter gradient.
trait Model {
    fn n_params(&self) -> usize;
    fn value(&self, t: f64, p: &[f64]) -> f64;
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]);
}

struct LmOutcome {
    params: Vec<f64>,
    rss: f64,
    iterations: usize,
    converged: bool,
}

fn rss<M: Model>(model: &M, times: &[f64], data: &[f64], p: &[f64]) -> f64 {
    times.iter().zip(data).map(|(&t, &y)| (y - model.value(t, p)).powi(2)).sum()
}

/// Marquardt's damped normal equations
/// `(JᵀJ + λ·diag(JᵀJ)) δ = Jᵀr`, with `λ` shrunk after accepted steps and
/// grown after rejected ones.
fn levenberg_marquardt<M: Model>(model: &M, times: &[f64], data: &[f64], start: &[f64]) -> LmOutcome {
    let n = model.n_params();
    let mut p = start.to_vec();
    let mut cost = rss(model, times, data, &p);
    let mut lambda = 1e-3;
    let mut grad = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = DMatrix::<f64>::zeros(n, n);
        let mut jtr = DVector::<f64>::zeros(n);
        for (&t, &y) in times.iter().zip(data) {
            model.gradient(t, &p, &mut grad);
            let r = y - model.value(t, &p);
            for i in 0..n {
                jtr[i] += grad[i] * r;
                for j in 0..n {
                    jtj[(i, j)] += grad[i] * grad[j];
                }
            }
        }
        if jtr.amax() <= 1e-30 {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            let trial_cost = rss(model, times, data, &trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(d, a)| d.abs() <= 1e-13 * (a.abs() + 1e-13));
                let small_gain = cost - trial_cost <= 1e-15 * cost;
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill direction left at any damping: a local minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmOutcome { params: p, rss: cost, iterations, converged }
}

/// `offset + a·exp(-(t/T)²)·cos(ω_B t)`; parameters `[offset, a, T, ω_B]`.
struct DampedCosine;

impl Model for DampedCosine {
    fn n_params(&self) -> usize {
        4
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * (-(t / p[2]).powi(2)).exp() * (p[3] * t).cos()
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let envelope = (-(t / p[2]).powi(2)).exp();
        let (sin, cos) = (p[3] * t).sin_cos();
        out[0] = 1.0;
        out[1] = envelope * cos;
        out[2] = p[1] * envelope * cos * 2.0 * t * t / p[2].powi(3);
        out[3] = -p[1] * envelope * t * sin;
    }
}

/// `exp(-(t/T)²)`; parameter `[T]`.
struct GaussianDecay;

impl Model for GaussianDecay {
    fn n_params(&self) -> usize {
        1
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        (-(t / p[0]).powi(2)).exp()
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        out[0] = (-(t / p[0]).powi(2)).exp() * 2.0 * t * t / p[0].powi(3);
    }
}

/// Parameters of `C(t) = offset + a·exp(-(t/T)²)·cos(ω_B t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AzeFitResult {
    pub offset: f64,
    pub a: f64,
    /// Decay time `T`, s.
    pub t_decay: f64,
    /// Oscillation frequency, rad/s.
    pub omega_b: f64,
    /// RMS of the fit residuals.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The curve carries no resolvable oscillation.
    pub degenerate: bool,
}

fn check_samples(curve: &FidCurve) -> Result<(), FitError> {
    if curve.times.len() != curve.coherence.len() {
        return Err(FitError::LengthMismatch);
    }
    if curve.times.len() < MIN_SAMPLES {
        return Err(FitError::TooFewSamples(curve.times.len()));
    }
    Ok(())
}

/// Strongest nonzero frequency of the mean-subtracted curve, from a
/// 16×-oversampled discrete spectrum refined by a parabola through the peak.
fn spectral_peak(times: &[f64], values: &[f64]) -> Option<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    if centered.iter().all(|v| v.abs() < 1e-12) {
        return None;
    }
    let span = times[times.len() - 1] - times[0];
    let dt = span / (times.len() - 1) as f64;
    let step = 2.0 * PI / (16.0 * span);
    let count = ((PI / dt) / step).floor() as usize;
    let power = |omega: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &v) in times.iter().zip(&centered) {
            let (s, c) = (omega * t).sin_cos();
            re += v * c;
            im -= v * s;
        }
        re * re + im * im
    };
    let spectrum: Vec<f64> = (0..=count).map(|k| power(k as f64 * step)).collect();
    // skip the zero-frequency lobe left by the envelope
    let first_min = (1..spectrum.len()).find(|&k| spectrum[k] > spectrum[k - 1]).unwrap_or(1).max(1) - 1;
    let (k, _) = spectrum
        .iter()
        .enumerate()
        .skip(first_min.max(1))
        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best });
    if k == 0 {
        return None;
    }
    let shift = if k + 1 < spectrum.len() {
        let (l, c, r) = (spectrum[k - 1], spectrum[k], spectrum[k + 1]);
        let denom = l - 2.0 * c + r;
        if denom.abs() > 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Some((k as f64 + shift) * step)
}

/// Fits the damped-cosine form with the oscillation frequency seeded from
/// the discrete spectrum and the decay time restarted at ½, 2 and 4 times
/// its first guess.
pub fn fit_aze(curve: &FidCurve) -> Result<AzeFitResult, FitError> {
    check_samples(curve)?;
    let (times, data) = (&curve.times, &curve.coherence);
    let span = times[times.len() - 1] - times[0];
    let mean = data.iter().sum::<f64>() / data.len() as f64;

    let Some(omega0) = spectral_peak(times, data) else {
        let residual = (data.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / data.len() as f64).sqrt();
        return Ok(AzeFitResult {
            offset: mean,
            a: 0.0,
            t_decay: f64::INFINITY,
            omega_b: 0.0,
            residual,
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    };

    let a0 = data[0] - mean;
    let t0 = span / 3.0;
    let best = [1.0, 0.5, 2.0, 4.0]
        .iter()
        .map(|f| levenberg_marquardt(&DampedCosine, times, data, &[mean, a0, f * t0, omega0]))
        .min_by(|x, y| x.rss.total_cmp(&y.rss))
        .expect("at least one start");

    let p = &best.params;
    let (mut a, mut omega_b) = (p[1], p[3]);
    if omega_b < 0.0 {
        omega_b = -omega_b;
    }
    let degenerate = a.abs() < 1e-8 || omega_b * span < 2.0 * PI * 0.1;
    if a.is_nan() {
        a = 0.0;
    }
    Ok(AzeFitResult {
        offset: p[0],
        a,
        t_decay: p[2].abs(),
        omega_b,
        residual: (best.rss / data.len() as f64).sqrt(),
        iterations: best.iterations,
        converged: best.converged,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFitResult {
    /// s
    pub t2: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Least-squares `T2` of `C(t) = exp(-(t/T2)²)`.
pub fn fit_gaussian_decay(curve: &FidCurve) -> Result<GaussianFitResult, FitError> {
    check_samples(curve)?;
    let (times, data) = (&curve.times, &curve.coherence);
    let span = times[times.len() - 1] - times[0];
    let threshold = (-1.0f64).exp();
    let t0 = times
        .iter()
        .zip(data)
        .find(|(_, &c)| c < threshold)
        .map(|(&t, _)| t)
        .filter(|&t| t > 0.0)
        .unwrap_or(span);
    let best = [1.0, 0.5, 2.0]
        .iter()
        .map(|f| levenberg_marquardt(&GaussianDecay, times, data, &[f * t0]))
        .min_by(|x, y| x.rss.total_cmp(&y.rss))
        .expect("at least one start");
    Ok(GaussianFitResult {
        t2: best.params[0].abs(),
        residual: (best.rss / data.len() as f64).sqrt(),
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{time_grid, CurveMetadata};

    fn synthetic(offset: f64, a: f64, t_decay: f64, omega_b: f64, t_max: f64, n: usize) -> FidCurve {
        let times = time_grid(t_max, n);
        let coherence = times
            .iter()
            .map(|&t| offset + a * (-(t / t_decay).powi(2)).exp() * (omega_b * t).cos())
            .collect();
        FidCurve { times, coherence, metadata: CurveMetadata::default() }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn recovers_200_khz() {
        let omega_b = 2.0 * PI * 200e3;
        let curve = synthetic(0.5, 1.0, 10e-6, omega_b, 20e-6, 401);
        let fit = fit_aze(&curve).unwrap();
        assert!(rel(fit.a, 1.0) < 1e-3, "{fit:?}");
        assert!(rel(fit.t_decay, 10e-6) < 1e-3, "{fit:?}");
        assert!(rel(fit.omega_b, omega_b) < 1e-3, "{fit:?}");
        assert!(fit.converged && !fit.degenerate);
    }

    #[test]
    fn recovers_80_khz() {
        let omega_b = 2.0 * PI * 80e3;
        let curve = synthetic(0.5, 1.0, 10e-6, omega_b, 25e-6, 301);
        let fit = fit_aze(&curve).unwrap();
        assert!(rel(fit.a, 1.0) < 1e-3, "{fit:?}");
        assert!(rel(fit.t_decay, 10e-6) < 1e-3, "{fit:?}");
        assert!(rel(fit.omega_b, omega_b) < 1e-3, "{fit:?}");
    }

    #[test]
    fn constant_curve_is_degenerate() {
        let times = time_grid(1e-5, 50);
        let curve = FidCurve { coherence: vec![1.0; 50], times, metadata: CurveMetadata::default() };
        let fit = fit_aze(&curve).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.a, 0.0);
    }

    #[test]
    fn too_few_samples() {
        let curve = synthetic(0.0, 1.0, 1.0, 1.0, 1.0, 5);
        assert_eq!(fit_aze(&curve), Err(FitError::TooFewSamples(5)));
        assert!(fit_gaussian_decay(&curve).is_err());
    }

    #[test]
    fn gaussian_decay_recovered() {
        let times = time_grid(30e-6, 200);
        let coherence = times.iter().map(|t| (-(t / 7e-6f64).powi(2)).exp()).collect();
        let fit = fit_gaussian_decay(&FidCurve { times, coherence, metadata: CurveMetadata::default() }).unwrap();
        assert!(rel(fit.t2, 7e-6) < 1e-9, "{fit:?}");
    }
}
