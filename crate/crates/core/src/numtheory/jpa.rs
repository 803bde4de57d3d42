//! Jacobi-Perron expansions.
//!
//! One step maps `omega` to `(1/w2 - k, w1/w2 - l)` with
//! `(k, l) = (floor(1/w2), floor(w1/w2))`. Field inputs are expanded exactly
//! and periodicity is detected by state equality; float inputs detect a
//! recurring remainder vector within a tolerance.

use std::collections::HashMap;
use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::cubic::CubicFieldElement;
use crate::error::{Error, Result};
use crate::map::FrequencyVector;

pub const FLOAT_PERIOD_TOLERANCE: f64 = 1e-9;
pub const FLOAT_MAX_STEPS: usize = 40;
pub const EXACT_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JpaExpansion {
    pub steps: Vec<(i64, i64)>,
    pub preperiod_len: usize,
    /// Zero when no period was found.
    pub period_len: usize,
    /// A zero second component ended the expansion.
    pub terminated: bool,
    pub diagnostic: Option<String>,
}

impl JpaExpansion {
    pub fn preperiod(&self) -> &[(i64, i64)] {
        &self.steps[..self.preperiod_len]
    }

    pub fn period(&self) -> &[(i64, i64)] {
        &self.steps[self.preperiod_len..self.preperiod_len + self.period_len]
    }

    pub fn is_periodic(&self) -> bool {
        self.period_len > 0
    }
}

/// Formats as e.g. `(3,2), [(3,0), (4,0)]`, with repeats written `(2,0)^3`.
impl fmt::Display for JpaExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pre = run_length(self.preperiod());
        if self.is_periodic() {
            let per = run_length(self.period());
            if pre.is_empty() {
                write!(f, "[{per}]")
            } else {
                write!(f, "{pre}, [{per}]")
            }
        } else {
            write!(f, "{pre}")?;
            if self.terminated {
                write!(f, " (terminated)")
            } else {
                write!(f, " ...")
            }
        }
    }
}

fn run_length(steps: &[(i64, i64)]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < steps.len() {
        let mut j = i + 1;
        while j < steps.len() && steps[j] == steps[i] {
            j += 1;
        }
        let (k, l) = steps[i];
        if j - i > 1 {
            parts.push(format!("({k},{l})^{}", j - i));
        } else {
            parts.push(format!("({k},{l})"));
        }
        i = j;
    }
    parts.join(", ")
}

fn check_unit_square(w1: f64, w2: f64) -> Result<()> {
    if w1 > 0.0 && w1 < 1.0 && w2 > 0.0 && w2 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("JPA needs omega in (0,1)^2, got ({w1}, {w2})")))
    }
}

/// Exact expansion of a pair of field elements.
pub fn jpa_expand_exact(w: &[CubicFieldElement; 2], max_steps: usize) -> Result<JpaExpansion> {
    check_unit_square(w[0].to_f64(), w[1].to_f64())?;
    let mut seen: HashMap<[CubicFieldElement; 2], usize> = HashMap::new();
    let mut state = w.clone();
    let mut steps = Vec::new();
    loop {
        if let Some(&start) = seen.get(&state) {
            let period = steps.len() - start;
            return Ok(periodic(steps, start, period, None));
        }
        if state[1].is_zero() {
            return Ok(terminated(steps));
        }
        if steps.len() == max_steps {
            return Ok(no_period(steps, format!("no period within {max_steps} steps")));
        }
        seen.insert(state.clone(), steps.len());
        let inv = state[1].inverse()?;
        let ratio = &state[0] * &inv;
        let k = inv.floor();
        let l = ratio.floor();
        let field = state[0].field();
        let next = [
            &inv - &CubicFieldElement::from_integer(field, k.clone()),
            &ratio - &CubicFieldElement::from_integer(field, l.clone()),
        ];
        steps.push((
            k.to_i64().ok_or_else(|| Error::Format("JPA digit overflow".into()))?,
            l.to_i64().ok_or_else(|| Error::Format("JPA digit overflow".into()))?,
        ));
        state = next;
    }
}

fn terminated(steps: Vec<(i64, i64)>) -> JpaExpansion {
    JpaExpansion {
        preperiod_len: steps.len(),
        period_len: 0,
        steps,
        terminated: true,
        diagnostic: None,
    }
}

fn no_period(steps: Vec<(i64, i64)>, why: String) -> JpaExpansion {
    JpaExpansion {
        preperiod_len: steps.len(),
        period_len: 0,
        steps,
        terminated: false,
        diagnostic: Some(why),
    }
}

/// Double-precision expansion. Each step loses roughly `log10(1/w2)` digits,
/// so the step budget should stay near [`FLOAT_MAX_STEPS`].
pub fn jpa_expand_float(w: FrequencyVector, max_steps: usize) -> Result<JpaExpansion> {
    check_unit_square(w.w1, w.w2)?;
    let mut states: Vec<(f64, f64)> = Vec::new();
    let mut steps: Vec<(i64, i64)> = Vec::new();
    let mut state = (w.w1, w.w2);
    // (start, period) of a recurring remainder awaiting confirmation
    let mut claim: Option<(usize, usize)> = None;
    loop {
        if let Some((start, period)) = claim {
            // the block must repeat once more in the digits
            let n = steps.len();
            if steps[n - 1] != steps[n - 1 - period] {
                claim = None;
            } else if n == start + 2 * period {
                steps.truncate(start + period);
                return Ok(periodic(steps, start, period, None));
            }
        }
        if state.1 == 0.0 {
            return Ok(terminated(steps));
        }
        if claim.is_none() {
            let close = |&(a, b): &(f64, f64)| (a - state.0).abs().max((b - state.1).abs()) < FLOAT_PERIOD_TOLERANCE;
            claim = states.iter().position(close).map(|start| (start, states.len() - start));
        }
        if steps.len() == max_steps {
            return Ok(match claim {
                Some((start, period)) => {
                    steps.truncate(start + period);
                    periodic(steps, start, period, Some("period not confirmed by a second block".into()))
                }
                None => no_period(steps, format!("precision exhausted after {max_steps} steps")),
            });
        }
        states.push(state);
        let inv = 1.0 / state.1;
        let ratio = state.0 / state.1;
        let (k, l) = (inv.floor(), ratio.floor());
        steps.push((k as i64, l as i64));
        state = (inv - k, ratio - l);
    }
}

fn periodic(steps: Vec<(i64, i64)>, start: usize, period: usize, diagnostic: Option<String>) -> JpaExpansion {
    JpaExpansion {
        steps,
        preperiod_len: start,
        period_len: period,
        terminated: false,
        diagnostic,
    }
}

/// Re-expand from the claimed period start and check that the periodic block
/// reproduces.
pub fn verify_period(w: &[CubicFieldElement; 2], expansion: &JpaExpansion) -> Result<bool> {
    if !expansion.is_periodic() {
        return Ok(false);
    }
    let total = expansion.preperiod_len + 3 * expansion.period_len;
    let long = jpa_expand_unrolled(w, total)?;
    let p = expansion.period_len;
    Ok(long[..expansion.preperiod_len + p] == expansion.steps[..]
        && (expansion.preperiod_len + p..total).all(|i| long[i] == long[i - p]))
}

/// The first `n` digits without period detection.
fn jpa_expand_unrolled(w: &[CubicFieldElement; 2], n: usize) -> Result<Vec<(i64, i64)>> {
    let mut state = w.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let inv = state[1].inverse()?;
        let ratio = &state[0] * &inv;
        let field = state[0].field();
        let k = inv.floor();
        let l = ratio.floor();
        out.push((k.to_i64().unwrap_or(i64::MAX), l.to_i64().unwrap_or(i64::MAX)));
        state = [
            &inv - &CubicFieldElement::from_integer(field, k),
            &ratio - &CubicFieldElement::from_integer(field, l),
        ];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::cubic::{all_field_vectors, cubic_field_vector, CubicField};

    fn expand(field: CubicField, variant: &str) -> JpaExpansion {
        let v = cubic_field_vector(field, Some(variant)).unwrap();
        let e = jpa_expand_exact(&v.exact, EXACT_MAX_STEPS).unwrap();
        assert!(verify_period(&v.exact, &e).unwrap());
        e
    }

    // Expansions checked independently with 400-digit arithmetic.
    #[test]
    fn field_vector_expansions() {
        let cases: [(CubicField, &str, &str); 10] = [
            (CubicField::Spiral, "a", "[(1,0), (2,0)]"),
            (CubicField::Spiral, "b", "(3,2), [(3,0), (4,0)]"),
            (CubicField::D31, "a", "[(1,0)]"),
            (CubicField::D31, "b", "(2,1), [(2,0), (3,0)]"),
            (CubicField::D44, "a", "[(1,1)]"),
            (CubicField::D44, "b", "(1,0)^2, (3,1), [(1,0), (2,0)^3, (1,0), (4,0)]"),
            (CubicField::D49, "a", "[(1,0), (3,0)]"),
            (CubicField::D49, "b", "(4,3), [(4,0), (5,0)]"),
            (CubicField::D49, "c", "(1,0), (2,1), [(1,0), (3,0)]"),
            (CubicField::D49, "d", "(4,2), [(4,0), (5,0)]"),
        ];
        for (f, v, want) in cases {
            assert_eq!(expand(f, v).to_string(), want, "{f} {v}");
        }
    }

    #[test]
    fn digits_are_admissible() {
        for v in all_field_vectors() {
            let e = jpa_expand_exact(&v.exact, EXACT_MAX_STEPS).unwrap();
            assert!(e.is_periodic());
            assert!(e.steps.iter().all(|&(k, l)| k >= 1 && l >= 0 && l <= k));
        }
    }

    #[test]
    fn float_mode_agrees_on_short_periods() {
        for (f, v) in [(CubicField::Spiral, "a"), (CubicField::D44, "a"), (CubicField::D31, "b"), (CubicField::D49, "a")] {
            let fv = cubic_field_vector(f, Some(v)).unwrap();
            let exact = jpa_expand_exact(&fv.exact, EXACT_MAX_STEPS).unwrap();
            let float = jpa_expand_float(fv.omega, FLOAT_MAX_STEPS).unwrap();
            assert_eq!(float.preperiod(), exact.preperiod(), "{f} {v}");
            assert_eq!(float.period(), exact.period(), "{f} {v}");
        }
    }

    #[test]
    fn rational_direction_terminates() {
        let e = jpa_expand_float(FrequencyVector::new(0.5, 0.25), 40).unwrap();
        assert!(e.terminated);
        assert_eq!(e.steps, vec![(4, 2)]);
        assert!(jpa_expand_float(FrequencyVector::new(0.0, 0.5), 40).is_err());
    }

    #[test]
    fn generic_vector_exhausts_float_budget() {
        let e = jpa_expand_float(FrequencyVector::new(0.1234567, 0.7654321), FLOAT_MAX_STEPS).unwrap();
        assert!(!e.is_periodic());
        assert!(e.diagnostic.is_some());
    }
}
