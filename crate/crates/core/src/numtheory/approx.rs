//! Best simultaneous approximants by brute force.

use serde::{Deserialize, Serialize};

use super::znorm;
use crate::error::{Error, Result};
use crate::map::FrequencyVector;

/// Approximants are trusted only while `q * rho_input` stays below this.
pub const PRECISION_BUDGET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestApproximant {
    pub p: [i64; 2],
    pub q: u64,
    pub znorm: f64,
    pub c_s: f64,
}

/// Periods `q <= q_max` at which `||q omega||_Z` sets a strict record.
/// `q = 1` is always the first entry; a scan stops early on an exact lock.
pub fn best_approximants(w: FrequencyVector, q_max: u64) -> Vec<BestApproximant> {
    let mut out: Vec<BestApproximant> = Vec::new();
    let mut record = f64::INFINITY;
    for q in 1..=q_max {
        let qf = q as f64;
        let (a, b) = (qf * w.w1, qf * w.w2);
        let (pa, pb) = (a.round(), b.round());
        let z = (a - pa).abs().max((b - pb).abs());
        if z < record {
            record = z;
            out.push(BestApproximant {
                p: [pa as i64, pb as i64],
                q,
                znorm: z,
                c_s: qf * z * z,
            });
            if z == 0.0 {
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximantTable {
    pub omega: FrequencyVector,
    pub q_max: u64,
    /// Largest admissible `q_max` given the declared input uncertainty.
    pub precision_bound: Option<f64>,
    pub records: Vec<BestApproximant>,
}

/// [`best_approximants`] with a guard: when `omega` is only known to
/// `rho_input`, `c_s` at period `q` is only good to about `q rho_input`, so
/// scans past `PRECISION_BUDGET / rho_input` are refused.
pub fn best_approximants_checked(w: FrequencyVector, q_max: u64, rho_input: Option<f64>) -> Result<ApproximantTable> {
    if q_max == 0 {
        return Err(Error::InvalidArgument("q_max must be at least 1".into()));
    }
    let precision_bound = match rho_input {
        Some(rho) if rho > 0.0 => {
            let bound = PRECISION_BUDGET / rho;
            if q_max as f64 > bound {
                return Err(Error::PrecisionBound { q_max, bound });
            }
            Some(bound)
        }
        Some(rho) => return Err(Error::InvalidPrecision(rho)),
        None => None,
    };
    Ok(ApproximantTable {
        omega: w,
        q_max,
        precision_bound,
        records: best_approximants(w, q_max),
    })
}

/// `c_s(omega, q) = q ||q omega||_Z^2`.
pub fn closeness_simultaneous(w: FrequencyVector, q: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be positive".into()));
    }
    let qf = q as f64;
    let z = znorm(&[qf * w.w1, qf * w.w2]);
    Ok(qf * z * z)
}

/// `c_l(omega, m) = |m|_inf^2 ||m . omega||_Z`.
pub fn closeness_linear(w: FrequencyVector, m: [i64; 2]) -> Result<f64> {
    if m == [0, 0] {
        return Err(Error::DegenerateResonance);
    }
    let frac = crate::resonance::dot_fraction(w, m);
    let inf = m[0].unsigned_abs().max(m[1].unsigned_abs()) as f64;
    Ok(inf * inf * frac.abs())
}
