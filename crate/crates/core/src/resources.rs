//! Resource accounting: squeezing, mean photon number, encodable qudit
//! dimension and the equivalent qubit count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::{ceil_log2, is_prime};

/// Mean photon number `sinh^2(ln s0) = ((s0 - 1/s0)/2)^2` of the squeezed
/// control state, in units of `hbar omega`.
pub fn mean_photon_number(s0: f64) -> Result<f64> {
    if !(s0 >= 1.0 && s0.is_finite()) {
        return Err(Error::invalid(format!("s0 must be >= 1, got {s0}")));
    }
    let h = 0.5 * (s0 - 1.0 / s0);
    Ok(h * h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuditDimension {
    /// `max(1, s0 delta_phi)`, proportionality constant 1.
    pub d: f64,
    /// Peak width `1/s0`.
    pub peak_width: f64,
}

pub fn qudit_dimension(s0: f64, delta_phi: f64) -> Result<QuditDimension> {
    if !(s0 >= 1.0 && s0.is_finite()) {
        return Err(Error::invalid(format!("s0 must be >= 1, got {s0}")));
    }
    if !(delta_phi > 0.0 && delta_phi.is_finite()) {
        return Err(Error::invalid(format!("peak spacing must be positive, got {delta_phi}")));
    }
    Ok(QuditDimension {
        d: (s0 * delta_phi).max(1.0),
        peak_width: 1.0 / s0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResourceContext {
    Dqc1,
    Factoring {
        #[serde(rename = "N")]
        modulus: u64,
    },
    PhaseEstimation {
        delta_e: f64,
        t_bound: u64,
        tau: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub context: ResourceContext,
    pub s0: f64,
    pub mean_photons: f64,
    pub qudit_dim: f64,
    /// Idealized dimension `D = N` for factoring.
    pub qudit_dim_ideal: Option<f64>,
    pub equivalent_qubits: f64,
    pub delta_phi: f64,
    pub peak_width: f64,
    pub notes: Vec<String>,
}

const CONSTANT_NOTE: &str = "D = s0 * delta_phi uses proportionality constant 1 (convention)";

pub fn resource_report(context: ResourceContext) -> Result<ResourceReport> {
    let mut notes = vec![CONSTANT_NOTE.to_string()];
    let (s0, delta_phi, qudit_dim, ideal) = match context {
        ResourceContext::Dqc1 => {
            notes.push("DQC1 fixes s0 = 1 and D = 2".into());
            (1.0, 2.0, 2.0, None)
        }
        ResourceContext::Factoring { modulus } => {
            if modulus < 4 || is_prime(modulus) {
                return Err(Error::invalid(format!("factoring needs a composite N, got {modulus}")));
            }
            let n = ceil_log2(modulus);
            let s0 = 2f64.powi(2 * n as i32);
            let delta_phi = 1.0 / modulus as f64;
            let d = qudit_dimension(s0, delta_phi)?.d;
            notes.push(format!(
                "s0 = 2^(2n) with n = ceil(log2 {modulus}) = {n} gives D = {d:.4}; \
                 the idealized s0 = N^2 gives D = N = {modulus}"
            ));
            (s0, delta_phi, d, Some(modulus as f64))
        }
        ResourceContext::PhaseEstimation { delta_e, t_bound, tau } => {
            if !(delta_e > 0.0 && delta_e.is_finite()) {
                return Err(Error::invalid(format!("delta_E must be positive, got {delta_e}")));
            }
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::invalid(format!("tau must be positive, got {tau}")));
            }
            if t_bound == 0 {
                return Err(Error::invalid("T_bound must be positive"));
            }
            let s0 = (1.0 / (t_bound as f64 * tau * delta_e)).max(1.0);
            notes.push("s0 is the smallest value with T_bound tau s0 delta_E >= 1, floored at 1".into());
            let d = qudit_dimension(s0, delta_e)?.d;
            (s0, delta_e, d, None)
        }
    };
    Ok(ResourceReport {
        context,
        s0,
        mean_photons: mean_photon_number(s0)?,
        qudit_dim,
        qudit_dim_ideal: ideal,
        equivalent_qubits: qudit_dim.log2(),
        delta_phi,
        peak_width: 1.0 / s0,
        notes,
    })
}

impl ResourceReport {
    /// Two aligned columns, one quantity per row, then the notes.
    pub fn to_table(&self) -> String {
        let context = match self.context {
            ResourceContext::Dqc1 => "DQC1".to_string(),
            ResourceContext::Factoring { modulus } => format!("Factoring(N={modulus})"),
            ResourceContext::PhaseEstimation { delta_e, t_bound, tau } => {
                format!("PhaseEstimation(delta_E={delta_e}, T_bound={t_bound}, tau={tau})")
            }
        };
        let mut rows = vec![
            ("context", context),
            ("s0", format!("{}", self.s0)),
            ("mean_photons", format!("{:.6}", self.mean_photons)),
            ("qudit_dim", format!("{:.6}", self.qudit_dim)),
        ];
        if let Some(d) = self.qudit_dim_ideal {
            rows.push(("qudit_dim_ideal", format!("{d}")));
        }
        rows.extend([
            ("equivalent_qubits", format!("{:.6}", self.equivalent_qubits)),
            ("delta_phi", format!("{:.6}", self.delta_phi)),
            ("peak_width", format!("{:.6e}", self.peak_width)),
        ]);
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn photon_examples() {
        assert_eq!(mean_photon_number(1.0).unwrap(), 0.0);
        assert!((mean_photon_number(E).unwrap() - 1f64.sinh().powi(2)).abs() < 1e-12);
        assert!((mean_photon_number(E).unwrap() - 1.3810978455418157).abs() < 1e-12);
        assert!((mean_photon_number(100.0).unwrap() - 2499.500025).abs() < 1e-6);
        assert!(mean_photon_number(0.9).is_err());
    }

    #[test]
    fn dimension_examples() {
        let d = qudit_dimension(225.0, 1.0 / 15.0).unwrap();
        assert!((d.d - 15.0).abs() < 1e-12);
        assert_eq!(qudit_dimension(2.0, 0.1).unwrap().d, 1.0);
        assert!(qudit_dimension(2.0, 0.0).is_err());
    }

    #[test]
    fn context_reports() {
        let r = resource_report(ResourceContext::Dqc1).unwrap();
        assert_eq!((r.s0, r.qudit_dim, r.equivalent_qubits), (1.0, 2.0, 1.0));

        let r = resource_report(ResourceContext::Factoring { modulus: 15 }).unwrap();
        assert_eq!(r.s0, 256.0);
        assert!((r.qudit_dim - 256.0 / 15.0).abs() < 1e-12);
        assert_eq!(r.qudit_dim_ideal, Some(15.0));
        assert!(r.notes.iter().any(|n| n.contains("D = N = 15")));
        let table = r.to_table();
        assert!(table.contains("qudit_dim_ideal") && table.contains("17.066667"));

        let r = resource_report(ResourceContext::PhaseEstimation {
            delta_e: 0.01,
            t_bound: 100,
            tau: 1.0,
        })
        .unwrap();
        assert_eq!(r.s0, 1.0);

        assert!(resource_report(ResourceContext::Factoring { modulus: 13 }).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = resource_report(ResourceContext::Factoring { modulus: 21 }).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains(r#""kind":"factoring","N":21"#));
        let back: ResourceReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
