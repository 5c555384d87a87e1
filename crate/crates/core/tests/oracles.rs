//! Library results against independent constructions.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qumode::dqc1::{estimate_trace, trace_mixture};
use qumode::estimation::{success_probability, ExperimentConfig};
use qumode::factoring::{coprime_mass, exact_success_probability, paper_success_probability};
use qumode::numtheory::{ceil_log2, gcd};
use qumode::qumode::sample_momentum;
use qumode::spectrum::{exact_normalized_trace, modular_spectrum, ModularProblem};

/// Eigenphases of the padded permutation matrix `P: l -> lq mod N`, as
/// fractions of a full turn in `[0, 1)`. The Cayley transform
/// `K = i (I - e^{ia} P)(I + e^{ia} P)^-1` is Hermitian with eigenvalues
/// `tan((theta + a)/2)`, which a symmetric eigensolver handles reliably.
fn permutation_eigenphases(n: u64, q: u64) -> Vec<f64> {
    const SHIFT: f64 = 0.123;
    let dim = 1usize << ceil_log2(n);
    let rotation = Complex64::from_polar(1.0, SHIFT);
    let mut p = DMatrix::<Complex64>::zeros(dim, dim);
    for l in 0..dim {
        let image = if (l as u64) < n { (l as u64 * q % n) as usize } else { l };
        p[(image, l)] = rotation;
    }
    let id = DMatrix::<Complex64>::identity(dim, dim);
    let inv = (&id + &p).try_inverse().expect("shift keeps -1 out of the spectrum");
    let k = (&id - &p) * inv * Complex64::i();
    let k = (&k + k.adjoint()) * Complex64::new(0.5, 0.0);
    k.symmetric_eigenvalues()
        .iter()
        .map(|&lambda| {
            let t = ((2.0 * lambda.atan() - SHIFT) / TAU).rem_euclid(1.0);
            if t > 1.0 - 1e-9 { 0.0 } else { t }
        })
        .collect()
}

#[test]
fn modular_spectrum_matches_permutation_eigenvalues() {
    for n in 3..=32u64 {
        for q in (2..n).filter(|&q| gcd(q, n) == 1) {
            let spec = modular_spectrum(n, q).unwrap();
            let mut counts = vec![0u64; spec.len()];
            for t in permutation_eigenphases(n, q) {
                let hit = spec.entries().iter().position(|e| {
                    let (num, den) = e.phase.as_fraction().unwrap();
                    let d = (t - num as f64 / den as f64).abs();
                    d.min(1.0 - d) < 1e-7
                });
                let i = hit.unwrap_or_else(|| panic!("N={n} q={q}: eigenphase {t} not in spectrum"));
                counts[i] += 1;
            }
            let expected: Vec<u64> = spec.entries().iter().map(|e| e.multiplicity).collect();
            assert_eq!(counts, expected, "N={n} q={q}");
        }
    }
}

#[test]
fn normalized_trace_matches_fixed_point_count() {
    // Tr(U^k) counts the fixed points of l -> l q^k mod N, padding included.
    for (n, q) in [(15u64, 2u64), (21, 5), (33, 2), (35, 3)] {
        let spec = modular_spectrum(n, q).unwrap();
        let dim = 1u64 << ceil_log2(n);
        for k in 0..6u32 {
            let qk = (0..k).fold(1u64, |acc, _| acc * q % n);
            let fixed = (0..n).filter(|&l| l * qk % n == l).count() as u64 + (dim - n);
            let t = exact_normalized_trace(&spec, k as f64);
            assert!((t.re - fixed as f64 / dim as f64).abs() < 1e-12, "N={n} q={q} k={k}");
            assert!(t.im.abs() < 1e-12);
        }
    }
}

#[test]
fn high_squeezing_success_is_n_independent() {
    for n in [15u64, 21, 33, 35, 39, 51, 55, 57, 65, 77, 85, 91] {
        let problem = ModularProblem::new(n, 2).unwrap();
        let cfg = ExperimentConfig {
            s0: 2f64.powi(2 * ceil_log2(n) as i32),
            ..ExperimentConfig::default()
        };
        let paper = paper_success_probability(&problem, &cfg).unwrap();
        let exact = exact_success_probability(&problem, &cfg).unwrap();
        let floor = libm::erf(std::f64::consts::PI) * coprime_mass(&problem);
        assert!(paper >= floor, "N={n}: {paper} < {floor}");
        assert!(exact >= floor - 1e-12, "N={n}: {exact} < {floor}");
    }
}

#[test]
fn empirical_window_rate_matches_success_probability() {
    let spec = modular_spectrum(15, 2).unwrap();
    for (s0, delta_e) in [(1.0, 0.5), (4.0, 0.2), (20.0, 0.02)] {
        let cfg = ExperimentConfig {
            s0,
            delta_e,
            ..ExperimentConfig::default()
        };
        let p = success_probability(&spec, &cfg).unwrap();
        let draws = 100_000;
        let samples = sample_momentum(&cfg.mixture(&spec).unwrap(), draws, 12).unwrap();
        let hits = samples
            .iter()
            .filter(|&&x| spec.weighted_phases().any(|(phi, _)| (x - phi).abs() <= delta_e))
            .count();
        let rate = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((rate - p).abs() <= 5.0 * se, "s0={s0}: {rate} vs {p}");
    }
}

#[test]
fn trace_error_shrinks_as_inverse_root_samples() {
    let spec = modular_spectrum(15, 2).unwrap();
    let truth = exact_normalized_trace(&spec, 1.0);
    let mix = trace_mixture(&spec, 1.0).unwrap();
    let seeds = 48u64;
    let points: Vec<(f64, f64)> = [100usize, 1_000, 10_000, 100_000]
        .iter()
        .map(|&t| {
            let err: f64 = (0..seeds)
                .map(|s| {
                    let samples = sample_momentum(&mix, t, 900 + s).unwrap();
                    (estimate_trace(&samples, 1.0).unwrap().value - truth).norm()
                })
                .sum::<f64>()
                / seeds as f64;
            ((t as f64).ln(), err.ln())
        })
        .collect();
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope + 0.5).abs() <= 0.1, "log-log slope {slope}");
}
