//! Eigenphase multisets of the target-register Hamiltonian.
//!
//! A [`PhaseSpectrum`] is the single source of truth for every distribution
//! the simulator builds: a list of distinct eigenphases with integer
//! multiplicities summing to `2^n`. Spectra of the modular-multiplication
//! unitary `|l> -> |l q mod N>` keep their phases as exact reduced fractions
//! of a full turn so that multiplicities can be merged without rounding.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::{ceil_log2, gcd, mul_mod};

/// Largest register accepted by [`random_spectrum`].
pub const MAX_RANDOM_QUBITS: u32 = 12;

/// Real phases closer than this are merged into one entry.
pub const REAL_MERGE_TOLERANCE: f64 = 1e-12;

/// One eigenphase. `Fraction { num, den }` is the phase `2*pi*num/den`
/// with `0 <= num < den` in lowest terms; `Real` is any finite real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Phase {
    Fraction { num: u64, den: u64 },
    Real(f64),
}

impl Phase {
    pub fn fraction(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num >= den {
            return Err(Error::invalid(format!(
                "fraction {num}/{den} is not a phase in [0, 2pi)"
            )));
        }
        let g = gcd(num, den);
        Ok(Phase::Fraction {
            num: num / g,
            den: den / g,
        })
    }

    pub fn value(&self) -> f64 {
        match *self {
            Phase::Fraction { num, den } => TAU * num as f64 / den as f64,
            Phase::Real(v) => v,
        }
    }

    /// Reduced `(num, den)` when the phase is an exact fraction of a turn.
    pub fn as_fraction(&self) -> Option<(u64, u64)> {
        match *self {
            Phase::Fraction { num, den } => Some((num, den)),
            Phase::Real(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumEntry {
    pub phase: Phase,
    pub multiplicity: u64,
}

/// Distinct eigenphases with multiplicities summing to `2^n_qubits`,
/// sorted by phase value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumJson", into = "SpectrumJson")]
pub struct PhaseSpectrum {
    n_qubits: u32,
    entries: Vec<SpectrumEntry>,
}

impl PhaseSpectrum {
    /// Builds a spectrum, merging duplicate phases and checking completeness.
    pub fn new(n_qubits: u32, entries: Vec<SpectrumEntry>) -> Result<Self> {
        if n_qubits > 40 {
            return Err(Error::invalid(format!("n = {n_qubits} qubits is too large")));
        }
        let mut exact: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        let mut reals: Vec<(f64, u64)> = Vec::new();
        for e in entries {
            if e.multiplicity == 0 {
                return Err(Error::invalid("multiplicities must be positive"));
            }
            match e.phase {
                Phase::Fraction { num, den } => {
                    let Phase::Fraction { num, den } = Phase::fraction(num, den)? else {
                        unreachable!()
                    };
                    *exact.entry((num, den)).or_insert(0) += e.multiplicity;
                }
                Phase::Real(v) => {
                    if !v.is_finite() {
                        return Err(Error::invalid(format!("phase {v} is not finite")));
                    }
                    reals.push((v, e.multiplicity));
                }
            }
        }

        let mut merged: Vec<SpectrumEntry> = exact
            .into_iter()
            .map(|((num, den), multiplicity)| SpectrumEntry {
                phase: Phase::Fraction { num, den },
                multiplicity,
            })
            .collect();

        reals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut real_merged: Vec<(f64, u64)> = Vec::with_capacity(reals.len());
        for (v, m) in reals {
            match real_merged.last_mut() {
                Some(last) if (v - last.0).abs() <= REAL_MERGE_TOLERANCE => last.1 += m,
                _ => real_merged.push((v, m)),
            }
        }
        for (v, m) in real_merged {
            if let Some(e) = merged
                .iter_mut()
                .find(|e| (e.phase.value() - v).abs() <= REAL_MERGE_TOLERANCE)
            {
                e.multiplicity += m;
            } else {
                merged.push(SpectrumEntry {
                    phase: Phase::Real(v),
                    multiplicity: m,
                });
            }
        }
        merged.sort_by(|a, b| a.phase.value().total_cmp(&b.phase.value()));

        let expected = 1u64 << n_qubits;
        let found: u64 = merged.iter().map(|e| e.multiplicity).sum();
        if found != expected {
            return Err(Error::Incomplete {
                n_qubits,
                expected,
                found,
            });
        }
        Ok(PhaseSpectrum {
            n_qubits,
            entries: merged,
        })
    }

    /// Spectrum from real phases and multiplicities.
    pub fn from_phases(n_qubits: u32, phases: &[(f64, u64)]) -> Result<Self> {
        let entries = phases
            .iter()
            .map(|&(v, m)| SpectrumEntry {
                phase: Phase::Real(v),
                multiplicity: m,
            })
            .collect();
        Self::new(n_qubits, entries)
    }

    /// Every eigenvalue equal to `phase`.
    pub fn degenerate(n_qubits: u32, phase: f64) -> Result<Self> {
        Self::from_phases(n_qubits, &[(phase, 1u64 << n_qubits)])
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    /// `2^n`.
    pub fn dimension(&self) -> u64 {
        1u64 << self.n_qubits
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(phase value, c_m / 2^n)` for each distinct entry.
    pub fn weighted_phases(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let dim = self.dimension() as f64;
        self.entries
            .iter()
            .map(move |e| (e.phase.value(), e.multiplicity as f64 / dim))
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `Tr(exp(i H t)) / 2^n`.
pub fn exact_normalized_trace(spec: &PhaseSpectrum, t: f64) -> Complex64 {
    spec.weighted_phases()
        .map(|(phi, w)| Complex64::from_polar(w, phi * t))
        .sum()
}

/// `2^n` phases drawn uniformly from `[0, 2pi)`, deterministic in `seed`.
pub fn random_spectrum(n_qubits: u32, seed: u64) -> Result<PhaseSpectrum> {
    if n_qubits > MAX_RANDOM_QUBITS {
        return Err(Error::invalid(format!(
            "random spectra support at most {MAX_RANDOM_QUBITS} qubits, got {n_qubits}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<(f64, u64)> = (0..1u64 << n_qubits)
        .map(|_| (rng.random::<f64>() * TAU, 1))
        .collect();
    PhaseSpectrum::from_phases(n_qubits, &phases)
}

/// Modulus `N` and base `q` of an order-finding instance. The order is
/// computed on first use.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "ProblemJson", into = "ProblemJson")]
pub struct ModularProblem {
    modulus: u64,
    base: u64,
    order: OnceLock<u64>,
}

impl Clone for ModularProblem {
    fn clone(&self) -> Self {
        let order = OnceLock::new();
        if let Some(&r) = self.order.get() {
            let _ = order.set(r);
        }
        ModularProblem {
            modulus: self.modulus,
            base: self.base,
            order,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    modulus: u64,
    base: u64,
}

impl TryFrom<ProblemJson> for ModularProblem {
    type Error = Error;

    fn try_from(p: ProblemJson) -> Result<Self> {
        ModularProblem::new(p.modulus, p.base)
    }
}

impl From<ModularProblem> for ProblemJson {
    fn from(p: ModularProblem) -> Self {
        ProblemJson {
            modulus: p.modulus,
            base: p.base,
        }
    }
}

impl PartialEq for ModularProblem {
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.base == other.base
    }
}

impl ModularProblem {
    pub fn new(modulus: u64, base: u64) -> Result<Self> {
        if base <= 1 || base >= modulus {
            return Err(Error::invalid(format!(
                "need 1 < q < N, got q = {base}, N = {modulus}"
            )));
        }
        let g = gcd(base, modulus);
        if g > 1 {
            return Err(Error::SharedFactor {
                modulus,
                base,
                factor: g,
            });
        }
        Ok(ModularProblem {
            modulus,
            base,
            order: OnceLock::new(),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// Register size `ceil(log2 N)`.
    pub fn n_qubits(&self) -> u32 {
        ceil_log2(self.modulus)
    }

    pub fn order(&self) -> u64 {
        *self.order.get_or_init(|| {
            let mut x = self.base;
            let mut r = 1;
            while x != 1 {
                x = mul_mod(x, self.base, self.modulus);
                r += 1;
            }
            r
        })
    }

    /// Number of cycles of each length in `l -> l q mod N` on `0..N`.
    pub fn cycle_lengths(&self) -> BTreeMap<u64, u64> {
        let n = self.modulus as usize;
        let mut seen = vec![false; n];
        let mut counts = BTreeMap::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0u64;
            let mut l = start;
            while !seen[l] {
                seen[l] = true;
                len += 1;
                l = mul_mod(l as u64, self.base, self.modulus) as usize;
            }
            *counts.entry(len).or_insert(0) += 1;
        }
        counts
    }

    /// Eigenphases of the multiplication unitary on `ceil(log2 N)` qubits.
    /// Register states `l >= N` are fixed points.
    pub fn spectrum(&self) -> PhaseSpectrum {
        let n_qubits = self.n_qubits();
        let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        for (len, cycles) in self.cycle_lengths() {
            for m in 0..len {
                let g = gcd(m, len);
                *counts.entry((m / g, len / g)).or_insert(0) += cycles;
            }
        }
        let padding = (1u64 << n_qubits) - self.modulus;
        if padding > 0 {
            *counts.entry((0, 1)).or_insert(0) += padding;
        }
        let entries = counts
            .into_iter()
            .map(|((num, den), multiplicity)| SpectrumEntry {
                phase: Phase::Fraction { num, den },
                multiplicity,
            })
            .collect();
        PhaseSpectrum::new(n_qubits, entries).expect("permutation spectrum is complete")
    }
}

/// Multiplicative order of `q` modulo `N`.
pub fn order(modulus: u64, base: u64) -> Result<u64> {
    Ok(ModularProblem::new(modulus, base)?.order())
}

pub fn modular_spectrum(modulus: u64, base: u64) -> Result<PhaseSpectrum> {
    Ok(ModularProblem::new(modulus, base)?.spectrum())
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    n: u32,
    entries: Vec<EntryJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntryJson {
    Fraction { num: u64, den: u64, mult: u64 },
    Real { phase: f64, mult: u64 },
}

impl From<PhaseSpectrum> for SpectrumJson {
    fn from(s: PhaseSpectrum) -> Self {
        SpectrumJson {
            n: s.n_qubits,
            entries: s
                .entries
                .iter()
                .map(|e| match e.phase {
                    Phase::Fraction { num, den } => EntryJson::Fraction {
                        num,
                        den,
                        mult: e.multiplicity,
                    },
                    Phase::Real(phase) => EntryJson::Real {
                        phase,
                        mult: e.multiplicity,
                    },
                })
                .collect(),
        }
    }
}

impl TryFrom<SpectrumJson> for PhaseSpectrum {
    type Error = Error;

    fn try_from(j: SpectrumJson) -> Result<Self> {
        let entries = j
            .entries
            .into_iter()
            .map(|e| match e {
                EntryJson::Fraction { num, den, mult } => Ok(SpectrumEntry {
                    phase: Phase::fraction(num, den)?,
                    multiplicity: mult,
                }),
                EntryJson::Real { phase, mult } => Ok(SpectrumEntry {
                    phase: Phase::Real(phase),
                    multiplicity: mult,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        PhaseSpectrum::new(j.n, entries)
    }
}
