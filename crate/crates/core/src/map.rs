//! The standard volume-preserving map on `T^2 x R`.
//!
//! The map is the composition of an action shear `y' = y + eps F(x)` and an
//! angle shear `x' = x + Omega(y')`, with frequency map
//! `Omega(y, delta) = (y + gamma, -delta + beta y^2)` and the three-harmonic
//! force `F(x) = -a sin 2pi x1 - b sin 2pi x2 - c sin 2pi (x1 - x2)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(sqrt(5) - 1) / 2`, the default `gamma`.
pub const GOLDEN_GAMMA: f64 = 0.618_033_988_749_894_9;

/// Orbits with `|y|` above this are treated as numerically divergent.
pub const DIVERGENCE_BOUND: f64 = 1e10;

/// Constants of the map plus the two essential parameters `delta` and `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub gamma: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub eps: f64,
}

impl MapParams {
    /// Standard constants `gamma = (sqrt 5 - 1)/2, beta = 2, a = b = c = 1`.
    pub fn standard(delta: f64, eps: f64) -> Self {
        MapParams {
            gamma: GOLDEN_GAMMA,
            beta: 2.0,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            delta,
            eps,
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        MapParams { delta, ..self }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        MapParams { eps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.gamma, self.beta, self.a, self.b, self.c, self.delta, self.eps,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.beta == 0.0 {
            return Err(Error::InvalidParams("beta must be nonzero".into()));
        }
        if self.eps < 0.0 {
            return Err(Error::InvalidParams("eps must be nonnegative".into()));
        }
        Ok(())
    }
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams::standard(0.0, 0.0)
    }
}

/// Reduce an angle into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point `(x1, x2, y)` of phase space; angles are kept in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x1: f64,
    pub x2: f64,
    pub y: f64,
}

impl PhaseState {
    pub fn new(x1: f64, x2: f64, y: f64) -> Self {
        PhaseState {
            x1: wrap_unit(x1),
            x2: wrap_unit(x2),
            y,
        }
    }

    /// Initial condition `(0, 0, y0)` used for every grid orbit.
    pub fn on_axis(y0: f64) -> Self {
        PhaseState {
            x1: 0.0,
            x2: 0.0,
            y: y0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.y.is_finite()
    }
}

/// A rotation (frequency) vector `omega = (w1, w2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub w1: f64,
    pub w2: f64,
}

impl FrequencyVector {
    pub const fn new(w1: f64, w2: f64) -> Self {
        FrequencyVector { w1, w2 }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.w1, self.w2]
    }

    /// Swap the two components.
    pub fn swapped(&self) -> Self {
        FrequencyVector::new(self.w2, self.w1)
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }

    /// Sup-norm distance to another vector.
    pub fn dist_inf(&self, other: &FrequencyVector) -> f64 {
        (self.w1 - other.w1).abs().max((self.w2 - other.w2).abs())
    }

    /// Inclusive membership in the box `[lo1, hi1] x [lo2, hi2]`.
    pub fn in_box(&self, b: &OmegaBox) -> bool {
        self.w1 >= b.w1_min && self.w1 <= b.w1_max && self.w2 >= b.w2_min && self.w2 <= b.w2_max
    }
}

impl From<[f64; 2]> for FrequencyVector {
    fn from(v: [f64; 2]) -> Self {
        FrequencyVector::new(v[0], v[1])
    }
}

/// An axis-aligned box in the frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaBox {
    pub w1_min: f64,
    pub w1_max: f64,
    pub w2_min: f64,
    pub w2_max: f64,
}

impl OmegaBox {
    pub const UNIT: OmegaBox = OmegaBox {
        w1_min: 0.0,
        w1_max: 1.0,
        w2_min: 0.0,
        w2_max: 1.0,
    };

    pub fn new(w1_min: f64, w1_max: f64, w2_min: f64, w2_max: f64) -> Self {
        OmegaBox {
            w1_min,
            w1_max,
            w2_min,
            w2_max,
        }
    }

    /// The four half-unit quadrants, numbered I..IV as
    /// `[0,1/2]^2`, `[1/2,1]x[0,1/2]`, `[0,1/2]x[1/2,1]`, `[1/2,1]^2`.
    pub fn quadrant(index: u8) -> Option<OmegaBox> {
        match index {
            1 => Some(OmegaBox::new(0.0, 0.5, 0.0, 0.5)),
            2 => Some(OmegaBox::new(0.5, 1.0, 0.0, 0.5)),
            3 => Some(OmegaBox::new(0.0, 0.5, 0.5, 1.0)),
            4 => Some(OmegaBox::new(0.5, 1.0, 0.5, 1.0)),
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.w1_min < self.w1_max && self.w2_min < self.w2_max
    }
}

impl Default for OmegaBox {
    fn default() -> Self {
        OmegaBox::UNIT
    }
}

/// `Omega(y, delta) = (y + gamma, -delta + beta y^2)`, no reduction mod 1.
#[inline]
pub fn frequency_map(y: f64, params: &MapParams) -> FrequencyVector {
    FrequencyVector {
        w1: y + params.gamma,
        w2: -params.delta + params.beta * y * y,
    }
}

/// Three-harmonic force.
#[inline]
pub fn force(x1: f64, x2: f64, params: &MapParams) -> f64 {
    -params.a * (TAU * x1).sin() - params.b * (TAU * x2).sin() - params.c * (TAU * (x1 - x2)).sin()
}

/// Action shear `(x, y) -> (x, y + eps F(x))`.
#[inline]
pub fn action_shear(s: PhaseState, params: &MapParams) -> PhaseState {
    PhaseState {
        y: s.y + params.eps * force(s.x1, s.x2, params),
        ..s
    }
}

/// Angle shear `(x, y) -> (x + Omega(y) mod 1, y)`.
#[inline]
pub fn angle_shear(s: PhaseState, params: &MapParams) -> PhaseState {
    let w = frequency_map(s.y, params);
    PhaseState {
        x1: wrap_unit(s.x1 + w.w1),
        x2: wrap_unit(s.x2 + w.w2),
        y: s.y,
    }
}

/// One iterate of the map. The action is updated first and the new action
/// drives the angle update.
#[inline]
pub fn step(s: PhaseState, params: &MapParams) -> PhaseState {
    angle_shear(action_shear(s, params), params)
}

#[inline]
pub(crate) fn diverged(y: f64) -> bool {
    !(y.abs() <= DIVERGENCE_BOUND)
}

/// Lazily observed orbit segment `observe(f^t(s0))`, `t = 0 .. len-1`.
///
/// Nothing but the current state is stored. Once exhausted,
/// [`ObservedOrbit::final_state`] gives `f^len(s0)` so that a second window
/// can continue from it.
pub struct ObservedOrbit<'p, F> {
    params: &'p MapParams,
    state: PhaseState,
    emitted: u64,
    len: u64,
    observe: F,
    failure: Option<Error>,
}

/// Stream `observe(f^t(s0))` for `t = 0 .. len - 1`.
pub fn iterate_observable<V, F>(
    s0: PhaseState,
    params: &MapParams,
    len: u64,
    observe: F,
) -> ObservedOrbit<'_, F>
where
    F: FnMut(&PhaseState) -> V,
{
    ObservedOrbit {
        params,
        state: s0,
        emitted: 0,
        len,
        observe,
        failure: None,
    }
}

impl<'p, F> ObservedOrbit<'p, F> {
    /// The state after all `len` steps, or the divergence that stopped the
    /// orbit. Before exhaustion this is the current (not yet observed) state.
    pub fn final_state(&self) -> Result<PhaseState> {
        match &self.failure {
            Some(e) => Err(e.clone()),
            None => Ok(self.state),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.emitted
    }
}

impl<'p, V, F> Iterator for ObservedOrbit<'p, F>
where
    F: FnMut(&PhaseState) -> V,
{
    type Item = Result<V>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = &self.failure {
            if self.emitted < self.len {
                // report once, then stop
                self.emitted = self.len;
                return Some(Err(e.clone()));
            }
            return None;
        }
        if self.emitted >= self.len {
            return None;
        }
        let value = (self.observe)(&self.state);
        self.state = step(self.state, self.params);
        self.emitted += 1;
        if diverged(self.state.y) {
            self.failure = Some(Error::Diverged {
                step: self.emitted,
                y: self.state.y,
            });
        }
        Some(Ok(value))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = (self.len - self.emitted.min(self.len)) as usize;
        (0, Some(rest + 1))
    }
}

/// `Omega^{-1}(p) = (p1 - gamma, beta (p1 - gamma)^2 - p2)`.
pub fn inverse_frequency(w: FrequencyVector, params: &MapParams) -> (f64, f64) {
    let y = w.w1 - params.gamma;
    (y, params.beta * y * y - w.w2)
}

/// Real actions `y` where the unperturbed frequency lies on the resonance
/// `m . Omega(y, delta) = n`, sorted ascending.
pub fn resonance_locus_y(m: [i64; 2], n: i64, delta: f64, params: &MapParams) -> Result<Vec<f64>> {
    let (m1, m2) = (m[0] as f64, m[1] as f64);
    if m[0] == 0 && m[1] == 0 {
        return Err(Error::DegenerateResonance);
    }
    let qa = params.beta * m2;
    let qb = m1;
    let qc = m1 * params.gamma - m2 * delta - n as f64;
    if m[1] == 0 {
        return Ok(vec![-qc / qb]);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    if disc == 0.0 {
        return Ok(vec![-qb / (2.0 * qa)]);
    }
    // cancellation-free pair of roots
    let sq = disc.sqrt();
    let q = -0.5 * (qb + qb.signum() * sq);
    let (r1, r2) = if q == 0.0 {
        let r = (-qc / qa).sqrt();
        (-r, r)
    } else {
        (q / qa, qc / q)
    };
    let mut roots = vec![r1, r2];
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_matches_closed_form() {
        assert_eq!(GOLDEN_GAMMA, (5f64.sqrt() - 1.0) / 2.0);
    }

    #[test]
    fn frequency_map_examples() {
        let p = MapParams::standard(-0.4, 0.0);
        let w = frequency_map(0.0, &p);
        assert_abs_diff_eq!(w.w1, 0.618_033_988_749_894_9, epsilon = 1e-16);
        assert_abs_diff_eq!(w.w2, 0.4, epsilon = 1e-16);
        let w = frequency_map(1.0 - GOLDEN_GAMMA, &p);
        assert_abs_diff_eq!(w.w1, 1.0, epsilon = 1e-15);

        let p = MapParams::standard(-0.334376117328629, 0.0);
        let w = frequency_map(0.123097748168231, &p);
        assert_abs_diff_eq!(w.w1, 0.741131736918126, epsilon = 1e-12);
        // second component by direct substitution
        let expect = 0.334376117328629 + 2.0 * 0.123097748168231f64.powi(2);
        assert_abs_diff_eq!(w.w2, expect, epsilon = 1e-15);
    }

    #[test]
    fn force_examples() {
        let p = MapParams::default();
        assert_eq!(force(0.0, 0.0, &p), 0.0);
        assert_abs_diff_eq!(force(0.25, 0.0, &p), -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(force(0.5, 0.5, &p), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn step_at_origin() {
        let p = MapParams::standard(-0.4, 0.02);
        let s = step(PhaseState::on_axis(0.0), &p);
        assert_eq!(s.y, 0.0);
        assert_abs_diff_eq!(s.x1, GOLDEN_GAMMA, epsilon = 1e-16);
        assert_abs_diff_eq!(s.x2, 0.4, epsilon = 1e-16);
    }

    #[test]
    fn unperturbed_step_is_rotation() {
        let p = MapParams::standard(0.13, 0.0);
        let s0 = PhaseState::new(0.3, 0.9, 0.21);
        let s = step(s0, &p);
        let w = frequency_map(0.21, &p);
        assert_eq!(s.y, s0.y);
        assert_eq!(s.x1, wrap_unit(0.3 + w.w1));
        assert_eq!(s.x2, wrap_unit(0.9 + w.w2));
    }

    #[test]
    fn wrap_handles_tiny_negative() {
        let r = wrap_unit(-1e-18);
        assert!((0.0..1.0).contains(&r));
        assert_eq!(wrap_unit(3.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn step_equals_shear_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = MapParams::standard(-0.3, 0.04);
        for _ in 0..200 {
            let s = PhaseState::new(rng.random(), rng.random(), rng.random_range(-1.0..1.0));
            let composed = angle_shear(action_shear(s, &p), &p);
            let direct = step(s, &p);
            assert_eq!(composed.x1.to_bits(), direct.x1.to_bits());
            assert_eq!(composed.x2.to_bits(), direct.x2.to_bits());
            assert_eq!(composed.y.to_bits(), direct.y.to_bits());
        }
    }

    /// Central-difference Jacobian of the lifted map (no mod 1), so that the
    /// determinant is not polluted by wrap discontinuities.
    fn lifted(s: [f64; 3], p: &MapParams) -> [f64; 3] {
        let y = s[2] + p.eps * force(s[0], s[1], p);
        let w = frequency_map(y, p);
        [s[0] + w.w1, s[1] + w.w2, y]
    }

    fn fd_jacobian_det(s: [f64; 3], p: &MapParams) -> f64 {
        let h = 1e-6;
        let mut j = [[0.0; 3]; 3];
        for col in 0..3 {
            let mut a = s;
            let mut b = s;
            a[col] += h;
            b[col] -= h;
            let fa = lifted(a, p);
            let fb = lifted(b, p);
            for row in 0..3 {
                j[row][col] = (fa[row] - fb[row]) / (2.0 * h);
            }
        }
        j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
    }

    #[test]
    fn volume_preserving_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = MapParams::standard(rng.random_range(-1.0..1.0), rng.random_range(0.0..0.1));
            let s = [rng.random(), rng.random(), rng.random_range(-0.7..0.5)];
            let det = fd_jacobian_det(s, &p);
            assert!((det - 1.0).abs() < 1e-8, "det = {det}");
        }
    }

    #[test]
    fn iterate_single_sample() {
        let p = MapParams::standard(-0.4, 0.02);
        let s0 = PhaseState::on_axis(0.1);
        let vals: Vec<_> = iterate_observable(s0, &p, 1, |s| s.y).collect::<Result<_>>().unwrap();
        assert_eq!(vals, vec![0.1]);
    }

    #[test]
    fn iterate_unperturbed_is_constant() {
        let p = MapParams::standard(-0.2, 0.0);
        let s0 = PhaseState::on_axis(0.17);
        let target = frequency_map(0.17, &p);
        let orbit = iterate_observable(s0, &p, 500, |s| frequency_map(s.y, &p));
        for w in orbit {
            assert_eq!(w.unwrap(), target);
        }
    }

    #[test]
    fn iterate_final_state_matches_loop() {
        let p = MapParams::standard(-0.4, 0.03);
        let s0 = PhaseState::new(0.2, 0.7, 0.05);
        let mut orbit = iterate_observable(s0, &p, 1000, |s| s.y);
        let n = orbit.by_ref().count();
        assert_eq!(n, 1000);
        let mut s = s0;
        for _ in 0..1000 {
            s = step(s, &p);
        }
        assert_eq!(orbit.final_state().unwrap(), s);
    }

    #[test]
    fn iterate_reports_divergence() {
        // enormous eps throws y past the guard on the first step
        let p = MapParams::standard(0.0, 1e12);
        let mut orbit = iterate_observable(PhaseState::new(0.25, 0.0, 0.0), &p, 10, |s| s.y);
        assert!(orbit.next().unwrap().is_ok());
        match orbit.next() {
            Some(Err(Error::Diverged { step, .. })) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(orbit.next().is_none());
        assert!(orbit.final_state().is_err());
    }

    #[test]
    fn unperturbed_action_is_frozen_exactly() {
        let p = MapParams::standard(0.4, 0.0);
        let mut s = PhaseState::new(0.1, 0.2, -0.3217);
        for _ in 0..10_000 {
            s = step(s, &p);
        }
        assert_eq!(s.y, -0.3217);
    }

    #[test]
    fn inverse_frequency_examples() {
        let p = MapParams::standard(0.0, 0.0);
        let (y, d) = inverse_frequency(FrequencyVector::new(GOLDEN_GAMMA, 0.4), &p);
        assert_eq!(y, 0.0);
        assert_abs_diff_eq!(d, -0.4, epsilon = 1e-16);
        let (y, d) = inverse_frequency(FrequencyVector::new(-0.05, -0.05), &p);
        let ey = -0.05 - GOLDEN_GAMMA;
        assert_abs_diff_eq!(y, ey, epsilon = 1e-16);
        assert_abs_diff_eq!(d, 2.0 * ey * ey + 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(y, -0.66803, epsilon = 1e-5);
        assert_abs_diff_eq!(d, 0.94254, epsilon = 1e-5);
    }

    #[test]
    fn inverse_frequency_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let w = FrequencyVector::new(rng.random(), rng.random());
            let (y, delta) = inverse_frequency(w, &MapParams::default());
            let back = frequency_map(y, &MapParams::standard(delta, 0.0));
            assert!(back.dist_inf(&w) < 1e-14);
        }
    }

    #[test]
    fn locus_examples() {
        let p = MapParams::default();
        let r = resonance_locus_y([1, 0], 1, -0.4, &p).unwrap();
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0], 0.381966, epsilon = 1e-6);
        let r = resonance_locus_y([1, -1], 0, -0.4, &p).unwrap();
        assert_abs_diff_eq!(r[0], -0.16415, epsilon = 1e-5);
        assert_abs_diff_eq!(r[1], 0.66415, epsilon = 1e-5);
        let r = resonance_locus_y([2, -1], 0, -0.4, &p).unwrap();
        assert_abs_diff_eq!(r[0], -0.31733, epsilon = 1e-5);
        assert_abs_diff_eq!(r[1], 1.31733, epsilon = 1e-5);
        assert_eq!(resonance_locus_y([0, 0], 1, -0.4, &p), Err(Error::DegenerateResonance));
        // m2 > 0 with a parabola that misses the level: no real roots
        assert!(resonance_locus_y([0, 1], -3, -0.4, &p).unwrap().is_empty());
    }

    #[test]
    fn locus_roots_satisfy_resonance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = MapParams::default();
        for _ in 0..500 {
            let m = [rng.random_range(-5..=5), rng.random_range(-5..=5)];
            if m == [0, 0] {
                continue;
            }
            let n = rng.random_range(-3..=3);
            let delta = rng.random_range(-1.0..1.0);
            let params = p.with_delta(delta);
            for r in resonance_locus_y(m, n, delta, &p).unwrap() {
                let w = frequency_map(r, &params);
                let val = m[0] as f64 * w.w1 + m[1] as f64 * w.w2 - n as f64;
                let scale = 1.0 + r.abs().powi(2) * 10.0;
                assert!(val.abs() <= 1e-12 * scale, "residual {val} at {r} for {m:?},{n}");
            }
        }
    }
}
