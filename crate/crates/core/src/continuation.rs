//! Continuation of a torus with fixed rotation vector in `eps`.
//!
//! At each `eps` the pair `(y, delta)` is solved so that the weighted
//! Birkhoff rotation vector of the orbit through `(0, 0, y)` equals `omega*`.
//! The critical `eps` is where the solved torus stops being nonchaotic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::birkhoff::{rotation_vector_with_dig, rotation_window, WeightPlan};
use crate::error::{Error, Result};
use crate::map::{inverse_frequency, FrequencyVector, MapParams, PhaseState};
use crate::parallel::Execution;
use crate::sweep::{Classifier, GridSpec, OrbitClass, DEFAULT_WINDOW, DIG_CUTOFF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPoint {
    pub eps: f64,
    pub y: f64,
    pub delta: f64,
    /// `|omega - omega*|_inf` at the solution.
    pub omega_err: f64,
    pub dig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub window: usize,
    /// Central-difference step for the Jacobian.
    pub fd_step: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub dig_cutoff: f64,
    /// Map constants; `delta` and `eps` are solved for or set per call.
    pub map: MapParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            window: DEFAULT_WINDOW,
            fd_step: 1e-7,
            tolerance: 1e-11,
            max_iterations: 25,
            max_halvings: 6,
            dig_cutoff: DIG_CUTOFF,
            map: MapParams::default(),
        }
    }
}

/// Damped quasi-Newton solver for `WB(y, delta; eps) = omega*`.
#[derive(Debug, Clone)]
pub struct TorusSolver {
    cfg: SolverConfig,
    plan: Arc<WeightPlan>,
}

impl TorusSolver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.map.validate()?;
        if !(cfg.fd_step > 0.0 && cfg.tolerance > 0.0) || cfg.max_iterations == 0 {
            return Err(Error::InvalidArgument("invalid solver configuration".into()));
        }
        let plan = WeightPlan::shared(cfg.window)?;
        Ok(TorusSolver { cfg, plan })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn params(&self, delta: f64, eps: f64) -> MapParams {
        MapParams { delta, eps, ..self.cfg.map }
    }

    /// First-window rotation vector minus `omega*`; infinite on divergence.
    pub fn residual(&self, omega_star: FrequencyVector, eps: f64, y: f64, delta: f64) -> [f64; 2] {
        match rotation_window(PhaseState::on_axis(y), &self.params(delta, eps), &self.plan, 0) {
            Ok((w, _)) => [w.w1 - omega_star.w1, w.w2 - omega_star.w2],
            Err(_) => [f64::INFINITY, f64::INFINITY],
        }
    }

    fn jacobian(&self, omega_star: FrequencyVector, eps: f64, y: f64, delta: f64) -> [[f64; 2]; 2] {
        let h = self.cfg.fd_step;
        let ry_p = self.residual(omega_star, eps, y + h, delta);
        let ry_m = self.residual(omega_star, eps, y - h, delta);
        let rd_p = self.residual(omega_star, eps, y, delta + h);
        let rd_m = self.residual(omega_star, eps, y, delta - h);
        [
            [(ry_p[0] - ry_m[0]) / (2.0 * h), (rd_p[0] - rd_m[0]) / (2.0 * h)],
            [(ry_p[1] - ry_m[1]) / (2.0 * h), (rd_p[1] - rd_m[1]) / (2.0 * h)],
        ]
    }

    /// Solve for `(y, delta)` from `guess`. Fails with
    /// [`Error::NoConvergence`] when the budget runs out and with
    /// [`Error::TorusLost`] when the solution is chaotic.
    pub fn solve(&self, omega_star: FrequencyVector, eps: f64, guess: (f64, f64)) -> Result<ContinuationPoint> {
        if !(guess.0.is_finite() && guess.1.is_finite()) {
            return Err(Error::InvalidArgument("solver guess must be finite".into()));
        }
        let (mut y, mut delta) = guess;
        let mut r = self.residual(omega_star, eps, y, delta);
        let mut norm = inf_norm(r);
        let mut iterations = 0;
        while !(norm < self.cfg.tolerance) {
            if iterations == self.cfg.max_iterations {
                return Err(Error::NoConvergence { iterations, residual: norm });
            }
            iterations += 1;
            let j = self.jacobian(omega_star, eps, y, delta);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det.is_finite() && det != 0.0) {
                return Err(Error::NoConvergence { iterations, residual: norm });
            }
            let dy = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let dd = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=self.cfg.max_halvings {
                let (ty, td) = (y + lambda * dy, delta + lambda * dd);
                let tr = self.residual(omega_star, eps, ty, td);
                let tn = inf_norm(tr);
                if tn < norm {
                    (y, delta, r, norm) = (ty, td, tr, tn);
                    accepted = true;
                    break;
                }
                lambda /= 2.0;
            }
            if !accepted {
                return Err(Error::NoConvergence { iterations, residual: norm });
            }
        }
        let avg = rotation_vector_with_dig(PhaseState::on_axis(y), &self.params(delta, eps), &self.plan)
            .map_err(|_| Error::TorusLost { dig: f64::NAN })?;
        if !(avg.dig > self.cfg.dig_cutoff) {
            return Err(Error::TorusLost { dig: avg.dig });
        }
        log::debug!("solve: eps {eps:.12} iterations {iterations} residual {norm:.2e} dig {:.2}", avg.dig);
        Ok(ContinuationPoint {
            eps,
            y,
            delta,
            omega_err: norm,
            dig: avg.dig,
        })
    }

    /// Solve starting from the unperturbed guess `Omega^{-1}(omega*)`.
    pub fn solve_from_inverse(&self, omega_star: FrequencyVector, eps: f64) -> Result<ContinuationPoint> {
        self.solve(omega_star, eps, inverse_frequency(omega_star, &self.cfg.map))
    }
}

fn inf_norm(r: [f64; 2]) -> f64 {
    let n = r[0].abs().max(r[1].abs());
    if n.is_nan() {
        f64::INFINITY
    } else {
        n
    }
}

/// One-shot form of [`TorusSolver::solve`].
pub fn solve_torus(
    omega_star: FrequencyVector,
    eps: f64,
    guess: (f64, f64),
    cfg: &SolverConfig,
) -> Result<ContinuationPoint> {
    TorusSolver::new(cfg.clone())?.solve(omega_star, eps, guess)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Step multiplier after a success.
    pub growth: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 1e-3,
            min_step: 1e-10,
            max_step: 2e-3,
            growth: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NoConvergence,
    TorusLost,
}

impl FailureKind {
    fn of(e: &Error) -> Option<FailureKind> {
        match e {
            Error::NoConvergence { .. } => Some(FailureKind::NoConvergence),
            Error::TorusLost { .. } => Some(FailureKind::TorusLost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureBracket {
    pub eps_ok: f64,
    pub eps_fail: f64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPath {
    pub omega_star: FrequencyVector,
    pub points: Vec<ContinuationPoint>,
    /// Set when the step floor was reached before `eps_end`.
    pub failure: Option<FailureBracket>,
}

fn predict(points: &[ContinuationPoint], eps: f64) -> (f64, f64) {
    match points {
        [.., a, b] if b.eps != a.eps => {
            let s = (eps - b.eps) / (b.eps - a.eps);
            (b.y + s * (b.y - a.y), b.delta + s * (b.delta - a.delta))
        }
        [.., b] => (b.y, b.delta),
        [] => unreachable!("prediction needs a start point"),
    }
}

/// March from `eps_start` to `eps_end` with a secant predictor, halving the
/// step on each failure and growing it on success.
pub fn continue_torus(
    solver: &TorusSolver,
    omega_star: FrequencyVector,
    eps_start: f64,
    eps_end: f64,
    control: &StepControl,
) -> Result<ContinuationPath> {
    if !(eps_start < eps_end) || !(control.min_step > 0.0 && control.initial_step >= control.min_step) {
        return Err(Error::InvalidArgument("continuation needs eps_start < eps_end and positive steps".into()));
    }
    let first = solver.solve_from_inverse(omega_star, eps_start)?;
    let mut points = vec![first];
    let mut step = control.initial_step;
    let mut last_failure = FailureKind::NoConvergence;
    loop {
        let last = *points.last().expect("nonempty");
        if last.eps >= eps_end {
            return Ok(ContinuationPath {
                omega_star,
                points,
                failure: None,
            });
        }
        if step < control.min_step {
            return Ok(ContinuationPath {
                omega_star,
                failure: Some(FailureBracket {
                    eps_ok: last.eps,
                    eps_fail: last.eps + 2.0 * step,
                    kind: last_failure,
                }),
                points,
            });
        }
        let eps = (last.eps + step).min(eps_end);
        match solver.solve(omega_star, eps, predict(&points, eps)) {
            Ok(p) => {
                points.push(p);
                step = (step * control.growth).min(control.max_step);
            }
            Err(e) => {
                last_failure = FailureKind::of(&e).ok_or(e)?;
                log::debug!("continuation: {last_failure:?} at eps {eps:.12}, step {step:.3e}");
                step /= 2.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalConfig {
    pub solver: SolverConfig,
    pub steps: StepControl,
    /// Upper limit of the continuation.
    pub eps_max: f64,
    /// Final bracket width.
    pub bracket_tolerance: f64,
    /// Step floor of the continuation phase, before bisection takes over.
    pub coarse_floor: f64,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        CriticalConfig {
            solver: SolverConfig::default(),
            steps: StepControl::default(),
            eps_max: 0.1,
            bracket_tolerance: 1e-9,
            coarse_floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub omega_star: FrequencyVector,
    pub eps_c: f64,
    pub y_c: f64,
    pub delta_c: f64,
    pub dig_c: f64,
    /// `(eps_ok, eps_fail)`.
    pub bracket: (f64, f64),
    pub failure: FailureKind,
    /// A torus reappeared just above the first bracket.
    pub non_monotone: bool,
    pub path: Vec<ContinuationPoint>,
}

/// Continue `omega*` from `eps = 0` until it fails, then bisect the last
/// step down to `bracket_tolerance`.
pub fn locate_critical_eps(omega_star: FrequencyVector, cfg: &CriticalConfig) -> Result<CriticalResult> {
    let solver = TorusSolver::new(cfg.solver.clone())?;
    let control = StepControl {
        min_step: cfg.coarse_floor.max(cfg.bracket_tolerance),
        ..cfg.steps.clone()
    };
    let path = continue_torus(&solver, omega_star, 0.0, cfg.eps_max, &control)?;
    let Some(bracket) = path.failure else {
        return Err(Error::InvalidArgument(format!(
            "torus survives up to eps_max = {}; nothing to bracket",
            cfg.eps_max
        )));
    };
    let mut points = path.points;
    let (mut ok, mut fail, mut kind) = (*points.last().expect("nonempty"), bracket.eps_fail, bracket.kind);
    bisect(&solver, omega_star, &mut points, &mut ok, &mut fail, &mut kind, cfg.bracket_tolerance);

    // look a little past the bracket once; a torus there means dig is not
    // monotone in eps and the bracket restarts from it
    let mut non_monotone = false;
    let width = (fail - ok.eps).max(cfg.bracket_tolerance);
    for k in [2.0, 8.0] {
        let eps = fail + k * width;
        if let Ok(p) = solver.solve(omega_star, eps, predict(&points, eps)) {
            log::warn!("torus reappears at eps {eps:.12} above the bracket; widening once");
            non_monotone = true;
            points.push(p);
            ok = p;
            fail = eps + k * width;
            kind = FailureKind::NoConvergence;
            if solver.solve(omega_star, fail, predict(&points, fail)).is_ok() {
                // still alive further up: keep the conservative lower edge
                break;
            }
            bisect(&solver, omega_star, &mut points, &mut ok, &mut fail, &mut kind, cfg.bracket_tolerance);
            break;
        }
    }
    Ok(CriticalResult {
        omega_star,
        eps_c: ok.eps,
        y_c: ok.y,
        delta_c: ok.delta,
        dig_c: ok.dig,
        bracket: (ok.eps, fail),
        failure: kind,
        non_monotone,
        path: points,
    })
}

fn bisect(
    solver: &TorusSolver,
    omega_star: FrequencyVector,
    points: &mut Vec<ContinuationPoint>,
    ok: &mut ContinuationPoint,
    fail: &mut f64,
    kind: &mut FailureKind,
    tolerance: f64,
) {
    while *fail - ok.eps > tolerance {
        let mid = 0.5 * (ok.eps + *fail);
        match solver.solve(omega_star, mid, predict(points, mid)) {
            Ok(p) => {
                points.push(p);
                *ok = p;
            }
            Err(e) => {
                *kind = FailureKind::of(&e).unwrap_or(FailureKind::NoConvergence);
                *fail = mid;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Count tori with `|omega1 - omega1*| < window`.
    pub window: f64,
    /// Spacing of `omega1` (through `y`, at `eps = 0`).
    pub spacing: f64,
    pub eps_spacing: f64,
    pub eps_margin: f64,
    /// Extra `y` range scanned beyond the window, since `omega1` drifts
    /// from `y + gamma` once `eps > 0`.
    pub y_pad: f64,
    pub spec: GridSpec,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            window: 0.002,
            spacing: 1e-4,
            eps_spacing: 4e-5,
            eps_margin: 0.005,
            y_pad: 0.002,
            spec: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborTorus {
    pub y: f64,
    pub eps: f64,
    pub omega: FrequencyVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessScan {
    pub omega_star: FrequencyVector,
    pub eps_c: f64,
    pub delta: f64,
    /// Rotational tori inside the window, at every scanned `eps`.
    pub neighbors: Vec<NeighborTorus>,
    /// Those above `eps_c`.
    pub more_robust: usize,
}

/// Rotational tori on the line `delta = delta_c` near `omega*`, on a grid
/// in `(y, eps)` reaching `eps_margin` above `eps_c`.
pub fn local_robustness_scan(
    critical: &CriticalResult,
    cfg: &RobustnessConfig,
    exec: Execution,
) -> Result<RobustnessScan> {
    if !(cfg.spacing > 0.0 && cfg.eps_spacing > 0.0 && cfg.window >= 0.0 && cfg.eps_margin >= 0.0) {
        return Err(Error::InvalidArgument("invalid robustness scan configuration".into()));
    }
    let classifier = Classifier::new(cfg.spec.clone())?;
    let omega_star = critical.omega_star;
    let reach = cfg.window + cfg.y_pad;
    let half = (reach / cfg.spacing).floor() as i64;
    let ys: Vec<f64> = (-half..=half).map(|j| critical.y_c + j as f64 * cfg.spacing).collect();
    let n_eps = (cfg.eps_margin / cfg.eps_spacing).floor() as usize;
    let top = critical.eps_c + cfg.eps_margin;
    // eps grid anchored at eps_c, from the bottom of the margin band to the top
    let eps: Vec<f64> = (0..=2 * n_eps)
        .map(|k| critical.eps_c + (k as f64 - n_eps as f64) * cfg.eps_spacing)
        .filter(|&e| e > 0.0 && e <= top)
        .collect();
    let cells: Vec<(f64, f64)> = ys.iter().flat_map(|&y| eps.iter().map(move |&e| (y, e))).collect();
    let records = exec.map(&cells, |&(y, e)| classifier.classify(y, critical.delta_c, e));
    let neighbors: Vec<NeighborTorus> = records
        .iter()
        .filter(|r| r.class == OrbitClass::Rotational && (r.omega.w1 - omega_star.w1).abs() < cfg.window)
        .map(|r| NeighborTorus {
            y: r.y0,
            eps: r.eps,
            omega: r.omega,
        })
        .collect();
    let more_robust = neighbors.iter().filter(|n| n.eps > critical.eps_c).count();
    Ok(RobustnessScan {
        omega_star,
        eps_c: critical.eps_c,
        delta: critical.delta_c,
        neighbors,
        more_robust,
    })
}
