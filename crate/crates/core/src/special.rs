//! Error-function helpers.
//!
//! `erf`/`erfc` come from `libm`, a port of the FreeBSD/SunPro `s_erf.c`
//! rational approximations (error below one ulp over the real line).

use std::f64::consts::SQRT_2;

pub use libm::{erf, erfc};

/// Probability mass of `N(mean, sigma^2)` on `[lo, hi]`, evaluated with
/// `erfc` in the tails so far-away intervals keep their relative accuracy.
pub fn gaussian_interval_mass(mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let za = (lo - mean) / (sigma * SQRT_2);
    let zb = (hi - mean) / (sigma * SQRT_2);
    let mass = if za >= 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (erfc(-zb) - erfc(-za))
    } else {
        0.5 * (erf(zb) - erf(za))
    };
    mass.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        // High-precision references (mpmath, 30 digits).
        let cases = [
            (0.01, 0.011_283_415_555_849_616),
            (0.5, 0.520_499_877_813_046_5),
            (1.0, 0.842_700_792_949_714_9),
            (std::f64::consts::PI, 0.999_991_123_853_632_3),
            (3.0, 0.999_977_909_503_001_4),
        ];
        for (x, want) in cases {
            let got = erf(x);
            assert!(((got - want) / want).abs() < 1e-14, "erf({x}) = {got}");
        }
        // erfc(5) = 1.53745979442803485018834348538e-12
        let got = erfc(5.0);
        assert!((got / 1.537_459_794_428_035e-12 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn interval_mass_limits() {
        assert!((gaussian_interval_mass(0.0, 1.0, -1e3, 1e3) - 1.0).abs() < 1e-15);
        let one_sigma = gaussian_interval_mass(2.0, 0.5, 1.5, 2.5);
        assert!((one_sigma - erf(1.0 / SQRT_2)).abs() < 1e-15);
        let tail = gaussian_interval_mass(0.0, 1.0, 10.0, 11.0);
        assert!(tail > 0.0 && tail < 1e-22);
        assert_eq!(gaussian_interval_mass(0.0, 1.0, 1.0, 1.0), 0.0);
    }
}
