//! Checks on the decomposition of the hybrid control gate into elementary
//! pieces.
//!
//! Elementary terms `h_k` are kept diagonal in a shared eigenbasis, so the
//! product of `exp(i x h_k)` can be compared entrywise against
//! `exp(i x sum_k h_k)` with no matrix exponentials.
//! The order-finding decomposition uses additions `l -> l + 2^k b_k mod N`
//! built from the binary digits of `q - 1`. These commute and send
//! `|1>` to `|q>`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::ceil_log2;

/// Phase `exp(i phi x tau / x0)` the gate imprints on `|x> (x) |u_j>`.
pub fn hybrid_phase(x: f64, phi: f64, tau: f64, x0: f64) -> Result<Complex64> {
    if !(x0 > 0.0) {
        return Err(Error::invalid(format!("x0 must be positive, got {x0}")));
    }
    Ok(Complex64::from_polar(1.0, phi * x * tau / x0))
}

/// Eigenphases of one elementary term in the shared basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalTerm {
    pub phases: Vec<f64>,
}

impl DiagonalTerm {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("diagonal term has non-finite entries"));
        }
        Ok(DiagonalTerm { phases })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub ok: bool,
    pub max_deviation: f64,
}

/// Tolerance used for the `ok` flag of [`verify_commuting_product`].
pub const PRODUCT_TOLERANCE: f64 = 1e-12;

/// Compares `prod_k exp(i x h_k[j])` with `exp(i x sum_k h_k[j])` for every
/// sampled `x` and index `j`.
pub fn verify_commuting_product(terms: &[DiagonalTerm], xs: &[f64]) -> Result<ProductCheck> {
    let first = terms
        .first()
        .ok_or_else(|| Error::invalid("need at least one term"))?;
    let dim = first.phases.len();
    if terms.iter().any(|t| t.phases.len() != dim) {
        return Err(Error::invalid("diagonal terms have different lengths"));
    }
    let mut worst = 0.0f64;
    for &x in xs {
        for j in 0..dim {
            let product = terms
                .iter()
                .fold(Complex64::new(1.0, 0.0), |acc, t| acc * Complex64::from_polar(1.0, x * t.phases[j]));
            let total: f64 = terms.iter().map(|t| t.phases[j]).sum();
            let direct = Complex64::from_polar(1.0, x * total);
            worst = worst.max((product - direct).norm());
        }
    }
    Ok(ProductCheck {
        ok: worst < PRODUCT_TOLERANCE,
        max_deviation: worst,
    })
}

/// `l -> (l + shift) mod N` on `0..N`; register states `l >= N` are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdditionGate {
    pub shift: u64,
    pub modulus: u64,
}

impl AdditionGate {
    pub fn new(shift: u64, modulus: u64) -> Result<Self> {
        if modulus == 0 || shift >= modulus {
            return Err(Error::invalid(format!("need 0 <= shift < N, got {shift}, {modulus}")));
        }
        Ok(AdditionGate { shift, modulus })
    }

    pub fn apply(&self, l: u64) -> u64 {
        if l < self.modulus {
            (l + self.shift) % self.modulus
        } else {
            l
        }
    }

    /// Full permutation on the padded register `0..2^ceil(log2 N)`.
    pub fn permutation(&self) -> Vec<u64> {
        (0..1u64 << ceil_log2(self.modulus)).map(|l| self.apply(l)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditionReport {
    pub modulus: u64,
    pub base: u64,
    pub gates: Vec<AdditionGate>,
    /// `commutes[a][b]` is true when gates `a` and `b` commute as permutations.
    pub commutes: Vec<Vec<bool>>,
    /// Image of `|1>` under the product of all gates.
    pub image_of_one: u64,
    pub ok: bool,
}

/// Gates `l -> l + 2^k` for every set bit `k` of `q - 1`.
pub fn addition_gates(modulus: u64, base: u64) -> Result<Vec<AdditionGate>> {
    if base <= 1 || base >= modulus {
        return Err(Error::invalid(format!("need 1 < q < N, got q = {base}, N = {modulus}")));
    }
    let digits = base - 1;
    (0..64)
        .filter(|k| digits >> k & 1 == 1)
        .map(|k| AdditionGate::new(1u64 << k, modulus))
        .collect()
}

pub fn verify_addition_decomposition(modulus: u64, base: u64) -> Result<AdditionReport> {
    let gates = addition_gates(modulus, base)?;
    let perms: Vec<Vec<u64>> = gates.iter().map(AdditionGate::permutation).collect();
    let commutes: Vec<Vec<bool>> = perms
        .iter()
        .map(|a| {
            perms
                .iter()
                .map(|b| (0..a.len()).all(|l| a[b[l] as usize] == b[a[l] as usize]))
                .collect()
        })
        .collect();
    let image_of_one = gates.iter().fold(1 % modulus, |l, g| g.apply(l));
    let ok = commutes.iter().flatten().all(|&c| c) && image_of_one == base % modulus;
    Ok(AdditionReport {
        modulus,
        base,
        gates,
        commutes,
        image_of_one,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn hybrid_phase_examples() {
        assert_eq!(hybrid_phase(0.0, 2.3, 0.7, 1.1).unwrap(), Complex64::new(1.0, 0.0));
        let half = hybrid_phase(1.0, PI, 1.0, 1.0).unwrap();
        assert!((half - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(hybrid_phase(1.0, 1.0, 1.0, 0.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (x, phi, tau, x0) = (
                rng.random_range(-50.0..50.0),
                rng.random_range(0.0..7.0),
                rng.random_range(0.1..3.0),
                rng.random_range(0.1..3.0),
            );
            let p = hybrid_phase(x, phi, tau, x0).unwrap() * hybrid_phase(-x, phi, tau, x0).unwrap();
            assert!((p - 1.0).norm() < 1e-14);
            assert!((hybrid_phase(x, phi, tau, x0).unwrap().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn commuting_product_examples() {
        let single = [DiagonalTerm::new(vec![0.3, 1.0, -2.0]).unwrap()];
        assert_eq!(verify_commuting_product(&single, &[0.5, 3.0]).unwrap().max_deviation, 0.0);

        let two = [
            DiagonalTerm::new(vec![0.3, 1.0]).unwrap(),
            DiagonalTerm::new(vec![2.0, -1.0]).unwrap(),
        ];
        assert_eq!(verify_commuting_product(&two, &[0.0]).unwrap().max_deviation, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let terms: Vec<_> = (0..5)
            .map(|_| DiagonalTerm::new((0..16).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap())
            .collect();
        let xs: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
        let check = verify_commuting_product(&terms, &xs).unwrap();
        assert!(check.ok && check.max_deviation < 1e-12, "{check:?}");
    }

    #[test]
    fn commuting_product_errors() {
        assert!(verify_commuting_product(&[], &[1.0]).is_err());
        let bad = [
            DiagonalTerm::new(vec![0.3, 1.0]).unwrap(),
            DiagonalTerm::new(vec![2.0]).unwrap(),
        ];
        assert!(verify_commuting_product(&bad, &[1.0]).is_err());
        assert!(DiagonalTerm::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn addition_decomposition_examples() {
        let r = verify_addition_decomposition(15, 2).unwrap();
        assert_eq!(r.gates, vec![AdditionGate { shift: 1, modulus: 15 }]);
        assert_eq!(r.image_of_one, 2);
        assert!(r.ok);

        let r = verify_addition_decomposition(15, 8).unwrap();
        let shifts: Vec<_> = r.gates.iter().map(|g| g.shift).collect();
        assert_eq!(shifts, vec![1, 2, 4]);
        assert_eq!(r.image_of_one, 8);
        assert!(r.commutes.iter().flatten().all(|&c| c));
        assert!(r.ok);

        for n in 3..40 {
            assert!(verify_addition_decomposition(n, 2).unwrap().ok);
        }
        assert!(verify_addition_decomposition(15, 15).is_err());
    }

    #[test]
    fn padding_states_are_fixed() {
        let g = AdditionGate::new(3, 13).unwrap();
        let perm = g.permutation();
        assert_eq!(perm.len(), 16);
        assert_eq!(&perm[13..], &[13, 14, 15]);
        assert_eq!(perm[12], 2);
    }
}
