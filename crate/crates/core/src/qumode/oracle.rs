//! Numerical momentum distribution, computed straight from the position
//! wavefunction with an FFT. Independent of the closed-form mixture and used
//! to check it.
//!
//! For each eigenphase the integrand `f(x) = G(x) exp(i x phi tau / x0)` is
//! sampled on `x_K = x_start + K dx` and transformed with the kernel
//! `exp(-i x p) / sqrt(2 pi)`. The spacing is tied to the requested momentum
//! grid by `dx dp = 2 pi / M`, so the DFT lands exactly on the grid points.
//! Samples beyond the `M dx` window fold back with the phase
//! `exp(-i K dx p_lo)`, which keeps the sum exact at every grid point.

use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{ControlState, QumodeWavefunction};
use crate::error::{Error, Result};
use crate::spectrum::PhaseSpectrum;

pub const MIN_GRID_POINTS: usize = 1 << 12;
pub const MIN_POINTS_PER_SIGMA: f64 = 8.0;
pub const MAX_ORACLE_PHASES: usize = 64;
pub const DEFAULT_FFT_LEN: usize = 1 << 16;

/// Uniform grid over `p_E`: `points` values from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn value(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.spacing()
    }

    /// Grid spanning every mean `+-10 sigma` of the distribution that
    /// `spec`, `psi` and `tau` produce.
    pub fn covering(spec: &PhaseSpectrum, psi: &QumodeWavefunction, tau: f64, points: usize) -> Self {
        let (lo, hi) = support(spec, psi, tau);
        GridSpec { lo, hi, points }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledDensity {
    pub p_e: Vec<f64>,
    pub density: Vec<f64>,
}

impl SampledDensity {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p_e.iter().copied().zip(self.density.iter().copied())
    }
}

fn peak_geometry(psi: &QumodeWavefunction, tau: f64) -> (f64, f64) {
    let shift = match psi.state() {
        ControlState::Squeezed { .. } => 0.0,
        ControlState::Coherent { alpha } => alpha.im / tau,
    };
    let sigma = 1.0 / (SQRT_2 * psi.effective_squeezing() * tau);
    (shift, sigma)
}

fn support(spec: &PhaseSpectrum, psi: &QumodeWavefunction, tau: f64) -> (f64, f64) {
    let (shift, sigma) = peak_geometry(psi, tau);
    let (lo, hi) = spec
        .weighted_phases()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (phi, _)| {
            (lo.min(phi), hi.max(phi))
        });
    (lo + shift - 10.0 * sigma, hi + shift + 10.0 * sigma)
}

/// Momentum density on `grid` obtained by Fourier-transforming the control
/// wavefunction once per eigenphase.
pub fn fft_oracle_distribution(
    spec: &PhaseSpectrum,
    psi: &QumodeWavefunction,
    tau: f64,
    grid: &GridSpec,
) -> Result<SampledDensity> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("gate time tau must be positive, got {tau}")));
    }
    if spec.len() > MAX_ORACLE_PHASES {
        return Err(Error::invalid(format!(
            "oracle handles at most {MAX_ORACLE_PHASES} distinct phases, got {}",
            spec.len()
        )));
    }
    if grid.points < MIN_GRID_POINTS || !(grid.hi > grid.lo) {
        return Err(Error::invalid(format!(
            "grid needs hi > lo and at least {MIN_GRID_POINTS} points"
        )));
    }
    let (_, sigma) = peak_geometry(psi, tau);
    let points_per_sigma = sigma / grid.spacing();
    if points_per_sigma < MIN_POINTS_PER_SIGMA {
        return Err(Error::GridTooCoarse {
            points_per_sigma,
            required: MIN_POINTS_PER_SIGMA,
        });
    }
    let (need_lo, need_hi) = support(spec, psi, tau);
    if grid.lo > need_lo || grid.hi < need_hi {
        return Err(Error::GridTooNarrow {
            lo: grid.lo,
            hi: grid.hi,
            need_lo,
            need_hi,
        });
    }

    let x0 = psi.x0();
    // Momentum grid in p units: p = p_E tau / x0.
    let p_lo = grid.lo * tau / x0;
    let dp = grid.spacing() * tau / x0;
    let fft_len = DEFAULT_FFT_LEN.max(16 * grid.points.next_power_of_two());
    let dx = TAU / (fft_len as f64 * dp);

    let s = psi.position_width();
    let half_width = (10.0 * s).max(10.0 / s);
    let centre = match psi.state() {
        ControlState::Squeezed { .. } => 0.0,
        ControlState::Coherent { alpha } => alpha.re,
    };
    let k_lo = ((centre - half_width) / dx).floor() as i64;
    let k_hi = ((centre + half_width) / dx).ceil() as i64;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let mut density = vec![0.0; grid.points];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];

    for entry in spec.entries() {
        let phi = entry.phase.value();
        let weight = entry.multiplicity as f64 / spec.dimension() as f64;
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for k in k_lo..=k_hi {
            let x = k as f64 * dx;
            let f = psi.amplitude(x) * Complex64::from_polar(1.0, x * phi * tau / x0);
            let fold = Complex64::from_polar(1.0, -(x * p_lo));
            buf[k.rem_euclid(fft_len as i64) as usize] += f * fold;
        }
        fft.process(&mut buf);
        let scale = dx / TAU.sqrt();
        for (j, d) in density.iter_mut().enumerate() {
            let amp = buf[j] * scale;
            *d += weight * amp.norm_sqr();
        }
    }

    // Change of variables p -> p_E.
    let jacobian = tau / x0;
    Ok(SampledDensity {
        p_e: (0..grid.points).map(|j| grid.value(j)).collect(),
        density: density.into_iter().map(|d| d * jacobian).collect(),
    })
}
