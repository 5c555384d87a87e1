//! Order finding from momentum samples and the factoring loop around it.
//!
//! Each run draws one `p_E` from the modular spectrum's mixture, reduces
//! `p' = p_E/2pi mod 1` and asks continued fractions for the nearest `m/r`
//! with `r <= N`. A run counts only when `q^r = 1 mod N` actually holds.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ExperimentConfig;
use crate::numtheory::{ceil_log2, factorize, gcd, is_prime, lcm, pow_mod, prime_power, totient};
use crate::qumode::{chunk_rng, GaussianMixture, NormalSource};
use crate::special::erf;
use crate::spectrum::ModularProblem;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Relative slack on the `1/(2N^2)` acceptance window, absorbing rounding in
/// `p'` and `m/r`. Distinct fractions with denominators up to `N` are at
/// least `1/N^2` apart, so the slack never admits a second candidate.
const WINDOW_SLACK: f64 = 1e-9;

/// Exact `num/den` for `p` in `[2^-64, 1)`.
fn exact_rational(p: f64) -> (u128, u128) {
    let bits = p.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as u32;
    let mant = (bits & ((1 << 52) - 1)) | (1 << 52);
    let k = 1075 - exp;
    let tz = mant.trailing_zeros().min(k);
    ((mant >> tz) as u128, 1u128 << (k - tz))
}

/// Convergent of `p_prime` with the largest denominator `r <= N`, returned
/// only when it lies within `1/(2N^2)` of `p_prime`. A result of `1/1` is
/// reported as `0/1`.
pub fn continued_fraction_recover(p_prime: f64, modulus: u64) -> Result<Option<(u64, u64)>> {
    if !(0.0..1.0).contains(&p_prime) {
        return Err(Error::invalid(format!("p' must lie in [0, 1), got {p_prime}")));
    }
    if modulus < 2 {
        return Err(Error::invalid(format!("N must be at least 2, got {modulus}")));
    }
    let n = modulus as u128;
    let best = if p_prime < 2f64.powi(-64) {
        (0, 1)
    } else {
        let (mut num, mut den) = exact_rational(p_prime);
        let (mut h0, mut h1) = (0u128, 1u128);
        let (mut k0, mut k1) = (1u128, 0u128);
        let mut best = (0u128, 1u128);
        while den != 0 {
            let a = num / den;
            let (h2, k2) = (a * h1 + h0, a * k1 + k0);
            if k2 > n {
                break;
            }
            best = (h2, k2);
            (num, den) = (den, num - a * den);
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
        }
        best
    };
    let (m, r) = (best.0 as u64, best.1 as u64);
    let half = 0.5 / (modulus as f64 * modulus as f64);
    if (p_prime - m as f64 / r as f64).abs() > half * (1.0 + WINDOW_SLACK) {
        return Ok(None);
    }
    Ok(Some(if m == r { (0, 1) } else { (m, r) }))
}

/// Smallest divisor `d` of `multiple` with `q^d = 1 mod N`, given that
/// `q^multiple = 1 mod N`.
pub fn minimal_order(base: u64, multiple: u64, modulus: u64) -> u64 {
    let mut r = multiple;
    for (p, _) in factorize(multiple) {
        while r.is_multiple_of(p) && pow_mod(base, r / p, modulus) == 1 {
            r /= p;
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub p_prime: f64,
    pub fraction: Option<(u64, u64)>,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderResult {
    pub problem: ModularProblem,
    pub recovered_r: Option<u64>,
    pub runs_used: u64,
    pub per_run_log: Vec<RunRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrderOptions {
    /// Verify the lcm of all recovered denominators instead of each alone.
    pub lcm_combine: bool,
}

fn order_mixture(problem: &ModularProblem, cfg: &ExperimentConfig) -> Result<GaussianMixture> {
    cfg.validate()?;
    if cfg.resolution() < 1.0 {
        return Err(Error::invalid(format!(
            "order finding needs s0 tau >= 1, got {}",
            cfg.resolution()
        )));
    }
    cfg.mixture(&problem.spectrum())
}

fn run_once(problem: &ModularProblem, mix: &GaussianMixture, seed: u64, index: u64) -> RunRecord {
    let mut rng = chunk_rng(seed, index);
    let p_e = mix.draw(&mut rng, &mut NormalSource::new());
    let mut p_prime = (p_e / TAU).rem_euclid(1.0);
    if p_prime >= 1.0 {
        p_prime = 0.0;
    }
    let fraction = continued_fraction_recover(p_prime, problem.modulus())
        .expect("p' is reduced into [0, 1)");
    let verified = fraction.is_some_and(|(_, r)| pow_mod(problem.base(), r, problem.modulus()) == 1);
    RunRecord {
        p_prime,
        fraction,
        verified,
    }
}

pub fn order_from_samples(problem: &ModularProblem, cfg: &ExperimentConfig) -> Result<OrderResult> {
    order_from_samples_with(problem, cfg, OrderOptions::default())
}

/// Runs until one recovered denominator verifies or `cfg.t_bound` runs are
/// spent. Run `i` draws from stream `i` of `cfg.seed`. A verified
/// denominator is reduced to the minimal order.
pub fn order_from_samples_with(
    problem: &ModularProblem,
    cfg: &ExperimentConfig,
    opts: OrderOptions,
) -> Result<OrderResult> {
    let mix = order_mixture(problem, cfg)?;
    let (q, n) = (problem.base(), problem.modulus());
    let mut log = Vec::new();
    let mut combined = 1u64;
    for i in 0..cfg.t_bound {
        let mut record = run_once(problem, &mix, cfg.seed, i);
        let mut found = record.fraction.filter(|_| record.verified).map(|(_, r)| r);
        if opts.lcm_combine && found.is_none() {
            if let Some((_, r)) = record.fraction {
                combined = lcm(combined, r);
                if combined > n * n {
                    combined = r;
                }
                if pow_mod(q, combined, n) == 1 {
                    record.verified = true;
                    found = Some(combined);
                }
            }
        }
        log.push(record);
        if let Some(r) = found {
            return Ok(OrderResult {
                problem: problem.clone(),
                recovered_r: Some(minimal_order(q, r, n)),
                runs_used: i + 1,
                per_run_log: log,
            });
        }
    }
    Ok(OrderResult {
        problem: problem.clone(),
        recovered_r: None,
        runs_used: cfg.t_bound,
        per_run_log: log,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub runs: u64,
    pub successes: u64,
    pub rate: f64,
}

/// Fraction of `runs` independent single-run attempts that verify.
pub fn single_run_success_rate(problem: &ModularProblem, cfg: &ExperimentConfig, runs: u64) -> Result<SuccessRate> {
    if runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    let mix = order_mixture(problem, cfg)?;
    let successes = (0..runs)
        .filter(|&i| run_once(problem, &mix, cfg.seed, i).verified)
        .count() as u64;
    Ok(SuccessRate {
        runs,
        successes,
        rate: successes as f64 / runs as f64,
    })
}

/// Exact per-run success probability: mixture mass of `p'` inside the
/// `1/(2N^2)` windows around every reduced `a/b` with `b <= N` and
/// `q^b = 1 mod N`, with `p_E` wrapped modulo `2pi`.
pub fn exact_success_probability(problem: &ModularProblem, cfg: &ExperimentConfig) -> Result<f64> {
    let mix = order_mixture(problem, cfg)?;
    let (q, n) = (problem.base(), problem.modulus());
    let half = 0.5 / (n as f64 * n as f64);
    let (lo, hi) = mix.mean_range();
    let reach = 12.0 * mix.sigma();
    let k_lo = ((lo - reach) / TAU).floor() as i64 - 1;
    let k_hi = ((hi + reach) / TAU).ceil() as i64 + 1;
    let mut p = 0.0;
    for b in (1..=n).filter(|&b| pow_mod(q, b, n) == 1) {
        for a in (0..b).filter(|&a| gcd(a, b) == 1) {
            let centre = a as f64 / b as f64;
            for k in k_lo..=k_hi {
                let c = k as f64 + centre;
                p += mix.interval_mass(TAU * (c - half), TAU * (c + half));
            }
        }
    }
    Ok(p.min(1.0))
}

/// Spectrum mass on phases `m/r` with `gcd(m, r) = 1`, `r` the order.
pub fn coprime_mass(problem: &ModularProblem) -> f64 {
    let r = problem.order();
    let spec = problem.spectrum();
    let dim = spec.dimension() as f64;
    spec.entries()
        .iter()
        .filter(|e| e.phase.as_fraction().is_some_and(|(_, den)| den == r))
        .map(|e| e.multiplicity as f64 / dim)
        .sum()
}

/// `coprime mass * erf(pi s0 tau / N^2)`, the probability of landing within
/// `1/(2N^2)` of a phase whose reduced denominator is the order.
pub fn paper_success_probability(problem: &ModularProblem, cfg: &ExperimentConfig) -> Result<f64> {
    cfg.validate()?;
    let n = problem.modulus() as f64;
    Ok(coprime_mass(problem) * erf(PI * cfg.resolution() / (n * n)))
}

/// `e^gamma ln(ln N) / erf(pi s0 tau / 2^(2n))`, a large-`N` estimate of
/// the runs needed.
pub fn run_bound(modulus: u64, s0: f64, tau: f64) -> Result<f64> {
    if modulus < 5 {
        return Err(Error::invalid(format!("run bound needs N >= 5, got {modulus}")));
    }
    if !(s0 * tau > 0.0) {
        return Err(Error::invalid("s0 tau must be positive"));
    }
    let scale = 2f64.powi(2 * ceil_log2(modulus) as i32);
    let n = modulus as f64;
    Ok(EULER_GAMMA.exp() * n.ln().ln() / erf(PI * s0 * tau / scale))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotientCheck {
    pub phi: u64,
    /// `r / (e^gamma ln(ln r))`; absent where `ln(ln r) <= 0`.
    pub lower: Option<f64>,
    pub ok: Option<bool>,
}

pub fn totient_bound_check(r: u64) -> TotientCheck {
    let phi = totient(r);
    let ll = (r as f64).ln().ln();
    if r < 3 || !(ll > 0.0) {
        return TotientCheck {
            phi,
            lower: None,
            ok: None,
        };
    }
    let lower = r as f64 / (EULER_GAMMA.exp() * ll);
    TotientCheck {
        phi,
        lower: Some(lower),
        ok: Some(phi as f64 > lower),
    }
}

/// Reason `N` cannot be factored by order finding, if any.
pub fn classical_rejection(modulus: u64) -> Option<String> {
    if modulus < 4 {
        return Some(format!("{modulus} is too small to have a nontrivial factorization"));
    }
    if modulus.is_multiple_of(2) {
        return Some(format!("{modulus} is even; 2 is a factor"));
    }
    if is_prime(modulus) {
        return Some(format!("{modulus} is prime"));
    }
    if let Some((p, k)) = prime_power(modulus) {
        return Some(format!("{modulus} = {p}^{k} is a prime power; {p} is a factor"));
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseAttempt {
    pub q: u64,
    pub runs: u64,
    pub order: Option<u64>,
    pub outcome: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostics {
    pub run_bound: f64,
    /// Exact per-run success probability for `q_used`; absent on the gcd branch.
    #[serde(rename = "exact_P_r")]
    pub exact_p_r: Option<f64>,
    #[serde(rename = "paper_P_r")]
    pub paper_p_r: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorResult {
    #[serde(rename = "N")]
    pub modulus: u64,
    pub factors: (u64, u64),
    pub q_used: u64,
    pub total_runs: u64,
    pub order: Option<u64>,
    pub attempts: Vec<BaseAttempt>,
    pub bound_diagnostics: BoundDiagnostics,
}

/// Factoring loop. Bases are drawn uniformly from `(1, N)` by a generator
/// seeded with `seed`; `cfg.t_bound` caps the total number of quantum runs
/// across all bases. `cfg.seed` is ignored.
pub fn factor(modulus: u64, cfg: &ExperimentConfig, seed: u64) -> Result<FactorResult> {
    if let Some(reason) = classical_rejection(modulus) {
        return Err(Error::Rejected { modulus, reason });
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run_bound = run_bound(modulus, cfg.s0, cfg.tau)?;
    let mut attempts = Vec::new();
    let mut total_runs = 0u64;
    let finish = |q: u64, f: u64, order, total_runs, attempts, problem: Option<&ModularProblem>| {
        let (exact_p_r, paper_p_r) = match problem {
            Some(p) => (
                Some(exact_success_probability(p, cfg)?),
                Some(paper_success_probability(p, cfg)?),
            ),
            None => (None, None),
        };
        let (a, b) = (f.min(modulus / f), f.max(modulus / f));
        Ok(FactorResult {
            modulus,
            factors: (a, b),
            q_used: q,
            total_runs,
            order,
            attempts,
            bound_diagnostics: BoundDiagnostics {
                run_bound,
                exact_p_r,
                paper_p_r,
            },
        })
    };

    while total_runs < cfg.t_bound {
        let q = rng.random_range(2..modulus);
        let g = gcd(q, modulus);
        if g > 1 {
            attempts.push(BaseAttempt {
                q,
                runs: 0,
                order: None,
                outcome: format!("gcd({q}, {modulus}) = {g}"),
            });
            return finish(q, g, None, total_runs, attempts, None);
        }
        let problem = ModularProblem::new(modulus, q)?;
        let run_cfg = ExperimentConfig {
            t_bound: cfg.t_bound - total_runs,
            seed: rng.random(),
            ..cfg.clone()
        };
        let result = order_from_samples(&problem, &run_cfg)?;
        total_runs += result.runs_used;
        let Some(r) = result.recovered_r else {
            attempts.push(BaseAttempt {
                q,
                runs: result.runs_used,
                order: None,
                outcome: "no order recovered".into(),
            });
            break;
        };
        let mut attempt = BaseAttempt {
            q,
            runs: result.runs_used,
            order: Some(r),
            outcome: String::new(),
        };
        if r % 2 == 1 {
            attempt.outcome = "odd order".into();
            attempts.push(attempt);
            continue;
        }
        let half = pow_mod(q, r / 2, modulus);
        if half == modulus - 1 {
            attempt.outcome = format!("{q}^{} = -1 mod {modulus}", r / 2);
            attempts.push(attempt);
            continue;
        }
        let f = [gcd(half - 1, modulus), gcd(half + 1, modulus)]
            .into_iter()
            .find(|&f| f > 1 && f < modulus);
        match f {
            Some(f) => {
                attempt.outcome = format!("gcd({q}^{} +- 1, {modulus}) gives {f}", r / 2);
                attempts.push(attempt);
                return finish(q, f, Some(r), total_runs, attempts, Some(&problem));
            }
            None => {
                attempt.outcome = "trivial gcd".into();
                attempts.push(attempt);
            }
        }
    }
    Err(Error::BudgetExhausted {
        runs: total_runs,
        bases: attempts.len() as u64,
    })
}
