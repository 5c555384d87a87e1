//! Control-mode wavefunctions and the momentum-outcome distribution they
//! induce after the hybrid gate.
//!
//! After coupling a Gaussian control state to a maximally mixed register and
//! discarding the register, the rescaled momentum `p_E = p x0 / tau` is
//! distributed as an equal-width Gaussian mixture: one component per
//! eigenphase, weighted by multiplicity. Everything here is stored in `p_E`
//! units with `hbar = 1`.

mod oracle;

use std::f64::consts::{PI, SQRT_2, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gaussian_interval_mass;
use crate::spectrum::PhaseSpectrum;

pub use oracle::{
    fft_oracle_distribution, GridSpec, SampledDensity, DEFAULT_FFT_LEN, MAX_ORACLE_PHASES,
    MIN_GRID_POINTS, MIN_POINTS_PER_SIGMA,
};

/// Finite squeezing cap; the delta-function limit is not representable.
pub const MAX_SQUEEZING: f64 = 1e9;

/// Samples per independently seeded chunk.
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlState {
    /// Position-squeezed vacuum with squeezing factor `s0 >= 1`.
    Squeezed { s0: f64 },
    /// Coherent state `|alpha>`.
    Coherent { alpha: Complex64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QumodeWavefunction {
    state: ControlState,
    x0: f64,
}

impl QumodeWavefunction {
    pub fn squeezed(s0: f64) -> Result<Self> {
        if !(1.0..=MAX_SQUEEZING).contains(&s0) {
            return Err(Error::invalid(format!(
                "squeezing factor must lie in [1, {MAX_SQUEEZING:e}], got {s0}"
            )));
        }
        Ok(QumodeWavefunction {
            state: ControlState::Squeezed { s0 },
            x0: 1.0,
        })
    }

    pub fn coherent(alpha: Complex64) -> Result<Self> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::invalid("coherent amplitude must be finite"));
        }
        Ok(QumodeWavefunction {
            state: ControlState::Coherent { alpha },
            x0: 1.0,
        })
    }

    /// Sets the oscillator length scale `x0 > 0`.
    pub fn with_x0(mut self, x0: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::invalid(format!("x0 must be positive, got {x0}")));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn state(&self) -> ControlState {
        self.state
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Squeezing factor seen by the momentum distribution; 1 for coherent input.
    pub fn effective_squeezing(&self) -> f64 {
        match self.state {
            ControlState::Squeezed { s0 } => s0,
            ControlState::Coherent { .. } => 1.0,
        }
    }

    /// Position-space width `s = s0 x0` (`x0` for coherent input).
    pub fn position_width(&self) -> f64 {
        self.effective_squeezing() * self.x0
    }

    /// Position-basis amplitude `G(x)`.
    pub fn amplitude(&self, x: f64) -> Complex64 {
        match self.state {
            ControlState::Squeezed { s0 } => {
                let s = s0 * self.x0;
                let norm = 1.0 / (s.sqrt() * PI.powf(0.25));
                Complex64::new(norm * (-x * x / (2.0 * s * s)).exp(), 0.0)
            }
            ControlState::Coherent { alpha } => {
                let x0 = self.x0;
                let norm = (1.0 / (PI * x0 * x0)).powf(0.25);
                let envelope = (-(x - alpha.re).powi(2) / (2.0 * x0 * x0)).exp();
                let phase = alpha.im * x / x0 - 0.5 * alpha.re * alpha.im;
                Complex64::from_polar(norm * envelope, phase)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: f64,
    pub weight: f64,
}

/// Equal-width Gaussian mixture over `p_E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    sigma: f64,
    s0_effective: f64,
    tau: f64,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    /// Weights are renormalized to sum to one.
    pub fn new(components: Vec<GaussianComponent>, sigma: f64, s0_effective: f64, tau: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components
            .iter()
            .any(|c| !c.mean.is_finite() || !(c.weight > 0.0))
            || !(total > 0.0)
        {
            return Err(Error::invalid("components need finite means and positive weights"));
        }
        let components: Vec<_> = components
            .into_iter()
            .map(|c| GaussianComponent {
                mean: c.mean,
                weight: c.weight / total,
            })
            .collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(GaussianMixture {
            components,
            sigma,
            s0_effective,
            tau,
            cumulative,
        })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn s0_effective(&self) -> f64 {
        self.s0_effective
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Smallest and largest component mean.
    pub fn mean_range(&self) -> (f64, f64) {
        self.components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.mean), hi.max(c.mean))
        })
    }

    pub fn density_at(&self, p_e: f64) -> f64 {
        let norm = 1.0 / (self.sigma * TAU.sqrt());
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        self.components
            .iter()
            .map(|c| {
                let d = p_e - c.mean;
                c.weight * norm * (-d * d * inv).exp()
            })
            .sum()
    }

    /// Analytic `E[exp(i t p_E)]`.
    pub fn characteristic(&self, t: f64) -> Complex64 {
        let damping = (-0.5 * self.sigma * self.sigma * t * t).exp();
        let sum: Complex64 = self
            .components
            .iter()
            .map(|c| Complex64::from_polar(c.weight, c.mean * t))
            .sum();
        sum * damping
    }

    /// Probability of `p_E` landing in `[lo, hi]`.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * gaussian_interval_mass(c.mean, self.sigma, lo, hi))
            .sum()
    }

    fn pick_component(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1)
    }

    /// One `p_E` draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, normals: &mut NormalSource) -> f64 {
        let k = self.pick_component(rng.random::<f64>());
        self.components[k].mean + self.sigma * normals.next(rng)
    }
}

/// Box-Muller standard normals, caching the second variate of each pair.
#[derive(Debug, Default, Clone)]
pub struct NormalSource {
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Closed-form momentum distribution for the given control state and gate
/// time. Squeezed input gives width `1/(sqrt(2) s0 tau)`; coherent input
/// behaves as `s0 = 1` with every mean shifted by `Im(alpha)/tau`.
pub fn momentum_distribution(
    spec: &PhaseSpectrum,
    psi: &QumodeWavefunction,
    tau: f64,
) -> Result<GaussianMixture> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("gate time tau must be positive, got {tau}")));
    }
    let shift = match psi.state() {
        ControlState::Squeezed { .. } => 0.0,
        ControlState::Coherent { alpha } => alpha.im / tau,
    };
    let s_eff = psi.effective_squeezing();
    let sigma = 1.0 / (SQRT_2 * s_eff * tau);
    let components = spec
        .weighted_phases()
        .map(|(phi, w)| GaussianComponent {
            mean: phi + shift,
            weight: w,
        })
        .collect();
    GaussianMixture::new(components, sigma, s_eff, tau)
}

/// Chunking and worker count for [`sample_momentum_with`]. The output only
/// depends on the seed and `chunk_size`, never on `threads`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub chunk_size: usize,
    pub threads: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            chunk_size: DEFAULT_CHUNK_SIZE,
            threads: 1,
        }
    }
}

/// Generator for chunk `index` of the stream rooted at `seed`: ChaCha8
/// seeded from `seed` with the stream id set to `index`.
pub fn chunk_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_momentum(mix: &GaussianMixture, count: usize, seed: u64) -> Result<Vec<f64>> {
    sample_momentum_with(mix, count, seed, SamplingOptions::default())
}

pub fn sample_momentum_with(
    mix: &GaussianMixture,
    count: usize,
    seed: u64,
    opts: SamplingOptions,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if opts.chunk_size == 0 || opts.threads == 0 {
        return Err(Error::invalid("chunk size and thread count must be positive"));
    }
    let mut out = vec![0.0; count];
    let fill = |(index, chunk): (usize, &mut [f64])| {
        let mut rng = chunk_rng(seed, index as u64);
        let mut normals = NormalSource::new();
        for v in chunk.iter_mut() {
            *v = mix.draw(&mut rng, &mut normals);
        }
    };
    if opts.threads == 1 {
        out.chunks_mut(opts.chunk_size).enumerate().for_each(fill);
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        pool.install(|| out.par_chunks_mut(opts.chunk_size).enumerate().for_each(fill));
    }
    Ok(out)
}

/// `p_E,density` CSV.
pub fn write_density_csv<W: Write>(mut w: W, points: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    writeln!(w, "p_E,density")?;
    for (p, d) in points {
        writeln!(w, "{p},{d}")?;
    }
    Ok(())
}

/// One sample per line under a `p_E` header.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[f64]) -> Result<()> {
    writeln!(w, "p_E")?;
    for s in samples {
        writeln!(w, "{s}")?;
    }
    Ok(())
}

/// Raw little-endian `f64`s, no header.
pub fn write_samples_binary<W: Write>(mut w: W, samples: &[f64]) -> Result<()> {
    for s in samples {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}
