//! Normalized-trace estimation from momentum samples.
//!
//! At `tau = 1` the mean of `exp(i p_E)` over the squeezed-input mixture is
//! `exp(-1/(4 s0^2)) Tr(U)/2^n`, so the sample mean rescaled by
//! `exp(+1/(4 s0^2))` estimates the normalized trace.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qumode::{momentum_distribution, GaussianMixture, QumodeWavefunction};
use crate::spectrum::PhaseSpectrum;

fn check_s0(s0: f64) -> Result<()> {
    if s0 >= 1.0 && s0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("s0 must be >= 1, got {s0}")))
    }
}

/// Sample-count overhead `F(s0) = sinh(1/(2 s0^2)) + exp(-1/(2 s0^2))`.
pub fn f_overhead(s0: f64) -> Result<f64> {
    check_s0(s0)?;
    let a = 0.5 / (s0 * s0);
    Ok(a.sinh() + (-a).exp())
}

/// `ceil(F(s0) / min(Re delta, Im delta)^2)`.
pub fn required_samples(delta: Complex64, s0: f64) -> Result<u64> {
    if !(delta.re > 0.0 && delta.im > 0.0) {
        return Err(Error::invalid(format!(
            "both components of delta must be positive, got {delta}"
        )));
    }
    let d = delta.re.min(delta.im);
    Ok((f_overhead(s0)? / (d * d)).ceil() as u64)
}

/// Damping `exp(-1/(4 s0^2))` of the trace at `tau = 1`.
pub fn correction_factor(s0: f64) -> Result<f64> {
    check_s0(s0)?;
    Ok((-0.25 / (s0 * s0)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    /// Estimate of `Tr(U)/2^n`; equal to `raw_mean` when `corrected` is false.
    pub value: Complex64,
    pub raw_mean: Complex64,
    pub samples_used: usize,
    pub correction: f64,
    pub corrected: bool,
    pub target_delta: Option<Complex64>,
    /// Sample count the CLT budget asks for at `target_delta`.
    pub required_samples: Option<u64>,
    pub f_overhead: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub correct: bool,
    pub target_delta: Option<Complex64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            correct: true,
            target_delta: None,
        }
    }
}

fn mean_phase(samples: &[f64], t: f64) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to estimate from"));
    }
    let sum = samples
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &p| acc + Complex64::from_polar(1.0, t * p));
    Ok(sum / samples.len() as f64)
}

/// Trace estimate from samples taken at `tau = 1`.
pub fn estimate_trace(samples: &[f64], s0: f64) -> Result<TraceEstimate> {
    estimate_trace_with(samples, s0, TraceOptions::default())
}

pub fn estimate_trace_with(samples: &[f64], s0: f64, opts: TraceOptions) -> Result<TraceEstimate> {
    let correction = correction_factor(s0)?;
    let raw_mean = mean_phase(samples, 1.0)?;
    let required = opts
        .target_delta
        .map(|d| required_samples(d, s0))
        .transpose()?;
    Ok(TraceEstimate {
        value: if opts.correct { raw_mean / correction } else { raw_mean },
        raw_mean,
        samples_used: samples.len(),
        correction,
        corrected: opts.correct,
        target_delta: opts.target_delta,
        required_samples: required,
        f_overhead: f_overhead(s0)?,
    })
}

/// Estimate of `sum_m c_m/2^n exp(i t phi_m)` from samples taken at any
/// `tau`. The mean of `exp(i t p_E)` is damped by `exp(-t^2/(4 (s0 tau)^2))`;
/// `t = 1` gives `Tr(exp(iH))/2^n`, `t = tau` gives `Tr(exp(iH tau))/2^n`
/// with damping `exp(-1/(4 s0^2))` independent of `tau`.
pub fn estimate_characteristic(samples: &[f64], s0: f64, tau: f64, t: f64) -> Result<Complex64> {
    check_s0(s0)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let st = s0 * tau;
    Ok(mean_phase(samples, t)? * (t * t / (4.0 * st * st)).exp())
}

/// Squeezed-input mixture at `tau = 1`.
pub fn trace_mixture(spec: &PhaseSpectrum, s0: f64) -> Result<GaussianMixture> {
    momentum_distribution(spec, &QumodeWavefunction::squeezed(s0)?, 1.0)
}

/// Exact `E[exp(i p_E)]` of the mixture at `tau = 1`.
pub fn analytic_raw_mean(spec: &PhaseSpectrum, s0: f64) -> Result<Complex64> {
    Ok(trace_mixture(spec, s0)?.characteristic(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBounds {
    pub sigma_r2: f64,
    pub sigma_i2: f64,
    /// `exp(-1/(2 s0^2)) F(s0)`.
    pub bound: f64,
    pub holds: bool,
}

/// Exact variances of `cos p_E` and `sin p_E` at `tau = 1`, next to the bound.
pub fn variance_bounds(spec: &PhaseSpectrum, s0: f64) -> Result<VarianceBounds> {
    let sigma = 1.0 / (SQRT_2 * s0);
    check_s0(s0)?;
    let (mut c1, mut s1, mut c2) = (0.0, 0.0, 0.0);
    for (phi, w) in spec.weighted_phases() {
        c1 += w * phi.cos();
        s1 += w * phi.sin();
        c2 += w * (2.0 * phi).cos();
    }
    let v = sigma * sigma;
    let d1 = (-v / 2.0).exp();
    let d2 = (-2.0 * v).exp();
    let mean_c = d1 * c1;
    let mean_s = d1 * s1;
    let sigma_r2 = ((1.0 + d2 * c2) / 2.0 - mean_c * mean_c).max(0.0);
    let sigma_i2 = ((1.0 - d2 * c2) / 2.0 - mean_s * mean_s).max(0.0);
    let bound = (-0.5 / (s0 * s0)).exp() * f_overhead(s0)?;
    Ok(VarianceBounds {
        sigma_r2,
        sigma_i2,
        bound,
        holds: sigma_r2 <= bound && sigma_i2 <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qumode::sample_momentum;
    use crate::spectrum::{exact_normalized_trace, modular_spectrum, random_spectrum};

    #[test]
    fn overhead_examples() {
        assert!((f_overhead(1.0).unwrap() - 1.1276259652063807).abs() < 1e-14);
        assert!((f_overhead(2.0).unwrap() - 1.0078226778257109).abs() < 1e-14);
        assert!((f_overhead(1e6).unwrap() - 1.0).abs() < 1e-12);
        assert!(f_overhead(0.5).is_err());
    }

    #[test]
    fn sample_count_examples() {
        let d = Complex64::new(0.1, 0.1);
        assert_eq!(required_samples(d, 1.0).unwrap(), 113);
        assert_eq!(required_samples(d, 2.0).unwrap(), 101);
        assert_eq!(required_samples(d, 1e9).unwrap(), 100);
        assert_eq!(required_samples(Complex64::new(0.05, 0.05), 1.0).unwrap(), 452);
        assert_eq!(required_samples(Complex64::new(0.1, 0.05), 1e9).unwrap(), 400);
        assert!(required_samples(Complex64::new(0.1, 0.0), 1.0).is_err());
    }

    #[test]
    fn identity_trace() {
        let spec = PhaseSpectrum::degenerate(3, 0.0).unwrap();
        for s0 in [1.0, 3.0] {
            let samples = sample_momentum(&trace_mixture(&spec, s0).unwrap(), 10_000, 2).unwrap();
            let est = estimate_trace(&samples, s0).unwrap();
            assert!((est.value.re - 1.0).abs() < 0.05 && est.value.im.abs() < 0.05, "{est:?}");
        }
    }

    #[test]
    fn modular_trace() {
        let spec = modular_spectrum(15, 2).unwrap();
        let samples = sample_momentum(&trace_mixture(&spec, 1.0).unwrap(), 100_000, 4).unwrap();
        let est = estimate_trace(&samples, 1.0).unwrap();
        assert!((est.value - Complex64::new(0.125, 0.0)).norm() < 0.02, "{est:?}");
        assert!((est.value * est.correction - est.raw_mean).norm() < 1e-15);
        assert!(est.raw_mean.norm() <= 1.0);

        let raw = estimate_trace_with(&samples, 1.0, TraceOptions { correct: false, ..Default::default() }).unwrap();
        assert_eq!(raw.value, raw.raw_mean);
    }

    #[test]
    fn analytic_identity() {
        for seed in 0..10 {
            let spec = random_spectrum(4, seed).unwrap();
            for s0 in [1.0, 2.0, 10.0] {
                let lhs = analytic_raw_mean(&spec, s0).unwrap();
                let rhs = exact_normalized_trace(&spec, 1.0) * correction_factor(s0).unwrap();
                assert!((lhs - rhs).norm() < 1e-12);
                assert!(lhs.norm() <= correction_factor(s0).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn general_tau_characteristic() {
        let spec = modular_spectrum(15, 2).unwrap();
        let (s0, tau) = (2.0, 0.5);
        let psi = QumodeWavefunction::squeezed(s0).unwrap();
        let mix = momentum_distribution(&spec, &psi, tau).unwrap();
        let samples = sample_momentum(&mix, 200_000, 8).unwrap();
        for t in [1.0, tau] {
            let est = estimate_characteristic(&samples, s0, tau, t).unwrap();
            let exact = exact_normalized_trace(&spec, t);
            assert!((est - exact).norm() < 0.02, "t={t}: {est} vs {exact}");
        }
    }

    #[test]
    fn variance_examples() {
        let id = PhaseSpectrum::degenerate(2, 0.0).unwrap();
        assert!(variance_bounds(&id, 1e6).unwrap().sigma_r2 < 1e-12);

        let spec = random_spectrum(4, 7).unwrap();
        let vb = variance_bounds(&spec, 1.0).unwrap();
        assert!(vb.holds, "{vb:?}");
        let samples = sample_momentum(&trace_mixture(&spec, 1.0).unwrap(), 1_000_000, 5).unwrap();
        let n = samples.len() as f64;
        let cos: Vec<f64> = samples.iter().map(|p| p.cos()).collect();
        let mean = cos.iter().sum::<f64>() / n;
        let var = cos.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = cos.iter().map(|c| (c - mean).powi(4)).sum::<f64>() / n;
        let se = ((m4 - var * var) / n).sqrt();
        assert!((var - vb.sigma_r2).abs() < 5.0 * se, "{var} vs {}", vb.sigma_r2);
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(estimate_trace(&[], 1.0).is_err());
    }
}
