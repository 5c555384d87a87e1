//! Phase estimation from momentum samples.
//!
//! Success probabilities are exact integrals of the squeezed-input mixture
//! over the union of the `+-delta_E` windows around each eigenphase. Peak
//! recovery histograms the samples and reads off basin means. The posterior
//! over eigenspaces after a momentum outcome models eigenvector retrieval.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qumode::{momentum_distribution, GaussianMixture, QumodeWavefunction};
use crate::special::{erf, gaussian_interval_mass};
use crate::spectrum::PhaseSpectrum;

/// Peaks holding less than this fraction of the samples are dropped.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub s0: f64,
    /// Gate running time.
    pub tau: f64,
    pub x0: f64,
    pub samples: usize,
    pub seed: u64,
    /// Target eigenvalue accuracy.
    pub delta_e: f64,
    /// Measurement budget.
    pub t_bound: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            s0: 1.0,
            tau: 1.0,
            x0: 1.0,
            samples: 10_000,
            seed: 0,
            delta_e: 0.01,
            t_bound: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if !(self.s0 >= 1.0 && self.s0.is_finite()) {
            return Err(Error::invalid(format!("s0 must be >= 1, got {}", self.s0)));
        }
        positive("tau", self.tau)?;
        positive("x0", self.x0)?;
        positive("delta_E", self.delta_e)?;
        if self.samples == 0 {
            return Err(Error::invalid("samples must be positive"));
        }
        if self.t_bound == 0 {
            return Err(Error::invalid("T_bound must be positive"));
        }
        Ok(())
    }

    /// Product `s0 tau` that sets every peak width.
    pub fn resolution(&self) -> f64 {
        self.s0 * self.tau
    }

    /// Peak standard deviation `1/(sqrt(2) s0 tau)`.
    pub fn sigma(&self) -> f64 {
        1.0 / (SQRT_2 * self.resolution())
    }

    /// Squeezed-input mixture for `spec` under this configuration.
    pub fn mixture(&self, spec: &PhaseSpectrum) -> Result<GaussianMixture> {
        self.validate()?;
        let psi = QumodeWavefunction::squeezed(self.s0)?.with_x0(self.x0)?;
        momentum_distribution(spec, &psi, self.tau)
    }
}

/// Merged `[phi - delta, phi + delta]` windows, sorted and disjoint.
fn window_union(spec: &PhaseSpectrum, delta: f64) -> Vec<(f64, f64)> {
    let mut windows: Vec<(f64, f64)> = spec
        .weighted_phases()
        .map(|(phi, _)| (phi - delta, phi + delta))
        .collect();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(windows.len());
    for (lo, hi) in windows {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

/// Probability that a single `p_E` lands within `delta_E` of some eigenphase.
pub fn success_probability(spec: &PhaseSpectrum, cfg: &ExperimentConfig) -> Result<f64> {
    let mix = cfg.mixture(spec)?;
    let p: f64 = window_union(spec, cfg.delta_e)
        .into_iter()
        .map(|(lo, hi)| mix.interval_mass(lo, hi))
        .sum();
    Ok(p.min(1.0))
}

/// The additive diagonal/overlap split of the success probability, kept for
/// comparison with the exact union. `off_diagonal` counts mass of each
/// component inside the other components' windows, so `diagonal +
/// off_diagonal` can exceed `union` when windows overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySplit {
    pub diagonal: f64,
    pub off_diagonal: f64,
    pub union: f64,
}

pub fn probability_split(spec: &PhaseSpectrum, cfg: &ExperimentConfig) -> Result<ProbabilitySplit> {
    let mix = cfg.mixture(spec)?;
    let delta = cfg.delta_e;
    let sigma = mix.sigma();
    let comps = mix.components();
    let mut diagonal = 0.0;
    let mut off_diagonal = 0.0;
    for (m, c) in comps.iter().enumerate() {
        for (l, w) in comps.iter().enumerate() {
            let mass = gaussian_interval_mass(c.mean, sigma, w.mean - delta, w.mean + delta);
            if l == m {
                diagonal += c.weight * mass;
            } else {
                off_diagonal += c.weight * mass;
            }
        }
    }
    Ok(ProbabilitySplit {
        diagonal,
        off_diagonal,
        union: success_probability(spec, cfg)?,
    })
}

/// Measurements needed for one expected success, `ceil(1/P)`.
pub fn measurement_budget(p: f64) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("success probability must lie in (0, 1], got {p}")));
    }
    Ok((1.0 / p).ceil() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEnergyCheck {
    pub satisfied: bool,
    /// `T_bound erf(tau s0 delta_E)`.
    pub margin: f64,
    /// `T_bound tau s0 delta_E`, the small-argument form.
    pub linearized: f64,
}

pub fn time_energy_check(cfg: &ExperimentConfig) -> Result<TimeEnergyCheck> {
    cfg.validate()?;
    let x = cfg.resolution() * cfg.delta_e;
    let margin = cfg.t_bound as f64 * erf(x);
    Ok(TimeEnergyCheck {
        satisfied: margin >= 1.0,
        margin,
        linearized: cfg.t_bound as f64 * x,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub estimate: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimateReport {
    pub peaks: Vec<Peak>,
    pub samples_used: usize,
    pub bin_width: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Bin {
    count: u64,
    sum: f64,
}

/// Sparse fixed-width histogram; bin `i` covers `[i w, (i + 1) w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    width: f64,
    total: u64,
    bins: BTreeMap<i64, Bin>,
}

impl Histogram {
    pub fn new(samples: &[f64], width: f64) -> Self {
        let mut bins: BTreeMap<i64, Bin> = BTreeMap::new();
        for &x in samples {
            let b = bins.entry((x / width).floor() as i64).or_default();
            b.count += 1;
            b.sum += x;
        }
        Histogram {
            width,
            total: samples.len() as u64,
            bins,
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// `(bin centre, mass)` for occupied bins, in increasing order.
    pub fn masses(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let total = self.total as f64;
        self.bins
            .iter()
            .map(move |(&i, b)| ((i as f64 + 0.5) * self.width, b.count as f64 / total))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_center,mass")?;
        for (c, m) in self.masses() {
            writeln!(w, "{c},{m}")?;
        }
        Ok(())
    }
}

/// Histogram width `min(delta_E, 1/(2 s0 tau))`.
pub fn histogram_width(cfg: &ExperimentConfig) -> f64 {
    cfg.delta_e.min(1.0 / (2.0 * cfg.resolution()))
}

pub fn estimate_phases(samples: &[f64], cfg: &ExperimentConfig) -> Result<PhaseEstimateReport> {
    estimate_phases_with_threshold(samples, cfg, DEFAULT_PEAK_THRESHOLD)
}

/// Peak recovery. Local maxima are located on a grid no finer than a quarter
/// of the peak width after light Gaussian smoothing; each maximum owns the
/// basin up to the smoothed minimum between it and its neighbours, and its
/// estimate is the mean of the samples in that basin. Maxima closer than
/// three peak widths are merged. Ties resolve to the lower `p_E`.
pub fn estimate_phases_with_threshold(
    samples: &[f64],
    cfg: &ExperimentConfig,
    threshold: f64,
) -> Result<PhaseEstimateReport> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to estimate from"));
    }
    cfg.validate()?;
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let bin_width = histogram_width(cfg);
    let sigma = cfg.sigma();
    let detect = Histogram::new(samples, bin_width.max(sigma / 4.0));

    let keys: Vec<i64> = detect.bins.keys().copied().collect();
    let bins: Vec<Bin> = detect.bins.values().copied().collect();
    let kernel = 0.5 * sigma / detect.width;
    let radius = (3.0 * kernel).ceil().max(1.0) as i64;

    // Smoothed counts at occupied bins.
    let mut smooth = vec![0.0; keys.len()];
    let mut lo = 0;
    for (a, &ka) in keys.iter().enumerate() {
        while keys[lo] < ka - radius {
            lo += 1;
        }
        let mut s = 0.0;
        for b in lo..keys.len() {
            let d = keys[b] - ka;
            if d > radius {
                break;
            }
            s += bins[b].count as f64 * (-(d * d) as f64 / (2.0 * kernel * kernel)).exp();
        }
        smooth[a] = s;
    }

    let mut maxima: Vec<usize> = Vec::new();
    let mut lo = 0;
    for (a, &ka) in keys.iter().enumerate() {
        while keys[lo] < ka - radius {
            lo += 1;
        }
        let mut is_max = true;
        for b in lo..keys.len() {
            let d = keys[b] - ka;
            if d > radius {
                break;
            }
            if (d < 0 && smooth[b] >= smooth[a]) || (d > 0 && smooth[b] > smooth[a]) {
                is_max = false;
                break;
            }
        }
        if is_max {
            maxima.push(a);
        }
    }

    // Merge maxima that sit within three peak widths of each other.
    let min_gap = 3.0 * sigma;
    let mut merged: Vec<usize> = Vec::new();
    for a in maxima {
        match merged.last_mut() {
            Some(last) if (keys[a] - keys[*last]) as f64 * detect.width < min_gap => {
                if smooth[a] > smooth[*last] {
                    *last = a;
                }
            }
            _ => merged.push(a),
        }
    }

    // Basin boundaries at the smoothed minimum between consecutive maxima.
    let mut cuts = Vec::with_capacity(merged.len() + 1);
    cuts.push(0);
    for w in merged.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cut = (a + 1..=b)
            .min_by(|&x, &y| smooth[x].total_cmp(&smooth[y]))
            .unwrap_or(b);
        cuts.push(cut);
    }
    cuts.push(keys.len());

    let total = samples.len() as f64;
    let mut peaks: Vec<Peak> = cuts
        .windows(2)
        .filter_map(|w| {
            let (count, sum) = bins[w[0]..w[1]]
                .iter()
                .fold((0u64, 0.0), |(c, s), b| (c + b.count, s + b.sum));
            (count > 0).then(|| Peak {
                estimate: sum / count as f64,
                mass: count as f64 / total,
            })
        })
        .filter(|p| p.mass >= threshold)
        .collect();
    peaks.sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.estimate.total_cmp(&b.estimate)));

    Ok(PhaseEstimateReport {
        peaks,
        samples_used: samples.len(),
        bin_width,
    })
}

/// Posterior weights over spectrum entries after observing `p_measured`:
/// `w_m ~ c_m exp(-(s0 tau)^2 (p - phi_m)^2)`, aligned with `spec.entries()`.
pub fn eigenvector_posterior(spec: &PhaseSpectrum, p_measured: f64, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let k = cfg.resolution().powi(2);
    let raw: Vec<f64> = spec
        .weighted_phases()
        .map(|(phi, w)| w * (-k * (p_measured - phi).powi(2)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::PosteriorUnderflow(p_measured));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Draws an entry index from the posterior, modelling a measurement of the
/// target register.
pub fn retrieve_eigenvector<R: Rng + ?Sized>(
    spec: &PhaseSpectrum,
    p_measured: f64,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<usize> {
    let weights = eigenvector_posterior(spec, p_measured, cfg)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(weights.len() - 1)
}

/// Average posterior mass on entry `index` when `p_E` is drawn from that
/// entry's own component, by composite Simpson over `+-12 sigma`.
pub fn expected_posterior_mass(spec: &PhaseSpectrum, index: usize, cfg: &ExperimentConfig) -> Result<f64> {
    let entry = spec
        .entries()
        .get(index)
        .ok_or_else(|| Error::invalid(format!("entry {index} out of range")))?;
    cfg.validate()?;
    let mean = entry.phase.value();
    let sigma = cfg.sigma();
    let n = 4000;
    let (a, b) = (mean - 12.0 * sigma, mean + 12.0 * sigma);
    let h = (b - a) / n as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f = |p: f64| -> Result<f64> {
        let density = norm * (-(p - mean).powi(2) / (2.0 * sigma * sigma)).exp();
        Ok(density * eigenvector_posterior(spec, p, cfg)?[index])
    };
    let mut s = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h)?;
    }
    Ok(s * h / 3.0)
}
