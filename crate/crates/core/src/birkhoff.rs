//! Weighted Birkhoff averages with the exponential bump window.
//!
//! A window of `T` iterates is averaged with weights `w_t = g(t/T) / S`,
//! `g(t) = exp(-1/(t(1-t)))`. Comparing two consecutive windows gives the
//! number of consistent digits `dig`, which separates regular orbits
//! (fast, superpolynomial convergence) from chaotic ones.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{frequency_map, step, FrequencyVector, MapParams, PhaseState, DIVERGENCE_BOUND};

/// `dig` is capped here; two windows that agree to better than `1e-16`
/// (including exactly) report this value.
pub const DIG_CAP: f64 = 16.0;

/// Exponential bump `exp(-1/(t(1-t)))` on `(0, 1)`, zero elsewhere.
#[inline]
pub fn bump(t: f64) -> f64 {
    if t > 0.0 && t < 1.0 {
        (-1.0 / (t * (1.0 - t))).exp()
    } else {
        0.0
    }
}

/// `g(k/T)` evaluated as `exp(-T^2 / (k (T-k)))` so that the value at `k`
/// and `T - k` is bit-identical.
#[inline]
fn bump_at(k: usize, window: usize) -> f64 {
    if k == 0 || k >= window {
        return 0.0;
    }
    let t = window as f64;
    let kk = k as f64;
    (-(t * t) / (kk * (t - kk))).exp()
}

/// Normalized bump weights for a window of `T` iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPlan {
    weights: Vec<f64>,
}

impl WeightPlan {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::WindowTooShort(window));
        }
        let raw: Vec<f64> = (0..window).map(|k| bump_at(k, window)).collect();
        let total = neumaier_sum(raw.iter().copied());
        let weights = raw.into_iter().map(|g| g / total).collect();
        Ok(WeightPlan { weights })
    }

    /// Shared plan, for reuse across every orbit of a sweep.
    pub fn shared(window: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(window)?))
    }

    pub fn window(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Compensated sum; used only to normalize the weights.
pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `sum_t w_t h_t` over a stream of observation vectors, accumulated in
/// ascending `t` with plain summation.
pub fn weighted_average<I, V>(samples: I, plan: &WeightPlan) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for (t, sample) in samples.into_iter().enumerate() {
        let h = sample.as_ref();
        if t == 0 {
            acc = vec![0.0; h.len()];
        } else if h.len() != acc.len() {
            return Err(Error::InvalidArgument(format!(
                "sample {t} has {} components, expected {}",
                h.len(),
                acc.len()
            )));
        }
        if t >= plan.window() {
            return Err(Error::LengthMismatch {
                expected: plan.window(),
                got: t + 1,
            });
        }
        let w = plan.weights[t];
        for (a, v) in acc.iter_mut().zip(h) {
            *a += w * v;
        }
        count = t + 1;
    }
    if count != plan.window() {
        return Err(Error::LengthMismatch {
            expected: plan.window(),
            got: count,
        });
    }
    Ok(acc)
}

/// Digits of agreement between two estimates: `min_i -log10 |a_i - b_i|`,
/// capped at [`DIG_CAP`].
pub fn digits_of_agreement(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d == 0.0 {
                DIG_CAP
            } else {
                -d.log10()
            }
        })
        .fold(DIG_CAP, f64::min)
}

/// Two consecutive windows of a weighted average and their agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageResult {
    /// Average over iterates `0 .. T-1`.
    pub value: Vec<f64>,
    /// Average over iterates `T .. 2T-1`.
    pub value_second_window: Vec<f64>,
    pub dig: f64,
    pub window: usize,
}

impl AverageResult {
    /// The first-window estimate as a rotation vector.
    pub fn omega(&self) -> FrequencyVector {
        FrequencyVector::new(self.value[0], self.value[1])
    }
}

/// Weighted average of `Omega(y_t)` over one window starting at `s0`.
/// Returns the average and the state `f^T(s0)`.
#[inline]
pub fn rotation_window(
    s0: PhaseState,
    params: &MapParams,
    plan: &WeightPlan,
    step_offset: u64,
) -> Result<(FrequencyVector, PhaseState)> {
    rotation_window_within(s0, params, plan, step_offset, DIVERGENCE_BOUND)
}

/// [`rotation_window`] that gives up as soon as `|y|` exceeds `bound`.
#[inline]
pub fn rotation_window_within(
    s0: PhaseState,
    params: &MapParams,
    plan: &WeightPlan,
    step_offset: u64,
    bound: f64,
) -> Result<(FrequencyVector, PhaseState)> {
    let mut s = s0;
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    for (t, &w) in plan.weights.iter().enumerate() {
        let om = frequency_map(s.y, params);
        acc1 += w * om.w1;
        acc2 += w * om.w2;
        s = step(s, params);
        if !(s.y.abs() <= bound) {
            return Err(Error::Diverged {
                step: step_offset + t as u64 + 1,
                y: s.y,
            });
        }
    }
    Ok((FrequencyVector::new(acc1, acc2), s))
}

/// Rotation vector and `dig` from windows `0 .. T-1` and `T .. 2T-1`.
pub fn rotation_vector_with_dig(
    s0: PhaseState,
    params: &MapParams,
    plan: &WeightPlan,
) -> Result<AverageResult> {
    rotation_vector_with_dig_within(s0, params, plan, DIVERGENCE_BOUND)
}

/// [`rotation_vector_with_dig`] with an escape bound on `|y|`.
pub fn rotation_vector_with_dig_within(
    s0: PhaseState,
    params: &MapParams,
    plan: &WeightPlan,
    bound: f64,
) -> Result<AverageResult> {
    let (w_first, s_mid) = rotation_window_within(s0, params, plan, 0, bound)?;
    let (w_second, _) = rotation_window_within(s_mid, params, plan, plan.window() as u64, bound)?;
    let first = w_first.as_array().to_vec();
    let second = w_second.as_array().to_vec();
    let dig = digits_of_agreement(&first, &second);
    Ok(AverageResult {
        value: first,
        value_second_window: second,
        dig,
        window: plan.window(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::GOLDEN_GAMMA;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn bump_values() {
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-0.3), 0.0);
        assert_eq!(bump(1.7), 0.0);
        assert_abs_diff_eq!(bump(0.5), (-4.0f64).exp(), epsilon = 1e-18);
        assert_abs_diff_eq!(bump(0.5), 0.018_315_638_9, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn bump_is_symmetric(k in 0u32..(1 << 20)) {
            // dyadic t so that 1 - t is exact
            let t = k as f64 / (1u32 << 20) as f64;
            prop_assert_eq!(bump(t), bump(1.0 - t));
        }

        #[test]
        fn weights_normalized_and_symmetric(window in 2usize..5000) {
            let plan = WeightPlan::new(window).unwrap();
            let w = plan.weights();
            prop_assert_eq!(w[0], 0.0);
            let total = neumaier_sum(w.iter().copied());
            prop_assert!((total - 1.0).abs() <= 1e-15);
            for t in 1..window {
                prop_assert_eq!(w[t].to_bits(), w[window - t].to_bits());
            }
        }
    }

    #[test]
    fn two_point_plan() {
        let plan = WeightPlan::new(2).unwrap();
        assert_eq!(plan.weights(), &[0.0, 1.0]);
        assert_eq!(WeightPlan::new(1), Err(Error::WindowTooShort(1)));
        assert_eq!(WeightPlan::new(0), Err(Error::WindowTooShort(0)));
    }

    #[test]
    fn million_point_plan() {
        let n = 1_000_000;
        let plan = WeightPlan::new(n).unwrap();
        let w = plan.weights();
        let total = neumaier_sum(w.iter().copied());
        assert!((total - 1.0).abs() <= 1e-15);
        let s: f64 = (0..n).map(|k| bump_at(k, n)).sum();
        let (imax, wmax) = w
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!(imax.abs_diff(n / 2) <= 1);
        assert_abs_diff_eq!(wmax, (-4.0f64).exp() / s, epsilon = 1e-12 * wmax);
        for t in [1, 17, 1000, 250_000, 499_999] {
            assert_eq!(w[t], w[n - t]);
        }
    }

    #[test]
    fn constant_stream_average() {
        let plan = WeightPlan::new(1234).unwrap();
        let avg = weighted_average((0..1234).map(|_| [3.5, -1.25]), &plan).unwrap();
        assert_abs_diff_eq!(avg[0], 3.5, epsilon = 4e-15);
        assert_abs_diff_eq!(avg[1], -1.25, epsilon = 2e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let plan = WeightPlan::new(10).unwrap();
        let short = weighted_average((0..9).map(|_| [1.0]), &plan);
        assert_eq!(short, Err(Error::LengthMismatch { expected: 10, got: 9 }));
        let long = weighted_average((0..11).map(|_| [1.0]), &plan);
        assert_eq!(long, Err(Error::LengthMismatch { expected: 10, got: 11 }));
    }

    fn rigid_cosine(window: usize) -> impl Iterator<Item = [f64; 1]> {
        let w1 = GOLDEN_GAMMA;
        (0..window).map(move |t| [(TAU * ((t as f64 * w1) % 1.0)).cos()])
    }

    #[test]
    fn rigid_rotation_superconvergence() {
        let window = 10_000;
        let plan = WeightPlan::new(window).unwrap();
        let weighted = weighted_average(rigid_cosine(window), &plan).unwrap()[0];
        let plain: f64 = rigid_cosine(window).map(|v| v[0]).sum::<f64>() / window as f64;
        assert!(weighted.abs() < 1e-10, "weighted {weighted}");
        assert!(plain.abs() > 1e-5, "plain {plain}");
        assert!(plain.abs() / weighted.abs().max(1e-300) > 1e5);
    }

    #[test]
    fn digits_capped_and_min_over_components() {
        assert_eq!(digits_of_agreement(&[0.5, 0.25], &[0.5, 0.25]), DIG_CAP);
        assert_eq!(digits_of_agreement(&[1.0], &[1.0 + 1e-17]), DIG_CAP);
        let d = digits_of_agreement(&[0.0, 0.0], &[1e-3, 1e-8]);
        assert_abs_diff_eq!(d, 3.0, epsilon = 1e-12);
        // wildly different windows give negative digits, stored as is
        assert!(digits_of_agreement(&[0.0], &[20.0]) < 0.0);
    }

    #[test]
    fn unperturbed_orbit_has_full_digits() {
        let plan = WeightPlan::new(5000).unwrap();
        for (y0, delta) in [(0.1, -0.4), (-0.3, 0.2), (0.0, 0.0), (0.44, -0.9)] {
            let p = MapParams::standard(delta, 0.0);
            let r = rotation_vector_with_dig(PhaseState::on_axis(y0), &p, &plan).unwrap();
            let expect = frequency_map(y0, &p);
            assert_eq!(r.dig, DIG_CAP);
            let err = r.omega().dist_inf(&expect);
            assert!(err <= 4e-15, "{err}");
            assert_eq!(r.value, r.value_second_window);
        }
    }

    #[test]
    fn two_window_result_is_deterministic() {
        let plan = WeightPlan::new(20_000).unwrap();
        let p = MapParams::standard(-0.4, 0.02);
        let a = rotation_vector_with_dig(PhaseState::on_axis(0.2), &p, &plan).unwrap();
        let b = rotation_vector_with_dig(PhaseState::on_axis(0.2), &p, &plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn window_two_continues_from_first() {
        let plan = WeightPlan::new(300).unwrap();
        let p = MapParams::standard(-0.4, 0.02);
        let s0 = PhaseState::on_axis(0.15);
        let (_, mid) = rotation_window(s0, &p, &plan, 0).unwrap();
        let (second, _) = rotation_window(mid, &p, &plan, 300).unwrap();
        let r = rotation_vector_with_dig(s0, &p, &plan).unwrap();
        assert_eq!(r.value_second_window, second.as_array().to_vec());
        // against the generic streaming path
        let stream = crate::map::iterate_observable(s0, &p, 300, |s| frequency_map(s.y, &p).as_array());
        let generic = weighted_average(stream.map(|v| v.unwrap()), &plan).unwrap();
        assert_eq!(generic, r.value);
    }

    #[test]
    fn divergence_propagates() {
        let plan = WeightPlan::new(100).unwrap();
        let p = MapParams::standard(0.0, 1e12);
        let r = rotation_vector_with_dig(PhaseState::new(0.25, 0.0, 0.0), &p, &plan);
        assert!(matches!(r, Err(Error::Diverged { step: 1, .. })));
    }
}
