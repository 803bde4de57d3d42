//! Orbit classification over parameter grids.
//!
//! Each orbit starts at `(x, y) = (0, y0)` and goes through three tests:
//! bounded (computed `omega` inside the frequency box and no divergence),
//! nonchaotic (`dig > 11`), nonresonant (`M(omega, 1e-9) > 251`). An orbit
//! passing all three is a rotational torus.
//!
//! Grid points are `p in [-0.05, 1.05]^2`, mapped to `(y0, delta)` through
//! the inverse of the unperturbed frequency map so that at `eps = 0` the
//! grid samples the frequency plane uniformly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::birkhoff::{rotation_vector_with_dig_within, WeightPlan};
use crate::error::{Error, Result};
use crate::map::{inverse_frequency, FrequencyVector, MapParams, OmegaBox, PhaseState, DIVERGENCE_BOUND};
use crate::parallel::Execution;
use crate::resonance::{
    resonance_order_bounded, ResonanceHit, CLASSIFICATION_RHO, DEFAULT_MAX_ORDER, RESONANCE_ORDER_CUTOFF,
};

/// Orbits with `dig` at or below this are chaotic.
pub const DIG_CUTOFF: f64 = 11.0;

/// Window length used for classification unless configured otherwise.
pub const DEFAULT_WINDOW: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitClass {
    Unbounded,
    Chaotic,
    Resonant,
    Rotational,
}

impl OrbitClass {
    pub const ALL: [OrbitClass; 4] = [
        OrbitClass::Unbounded,
        OrbitClass::Chaotic,
        OrbitClass::Resonant,
        OrbitClass::Rotational,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OrbitClass::Unbounded => "unbounded",
            OrbitClass::Chaotic => "chaotic",
            OrbitClass::Resonant => "resonant",
            OrbitClass::Rotational => "rotational",
        }
    }

    pub fn is_bounded(self) -> bool {
        self != OrbitClass::Unbounded
    }
}

impl fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OrbitClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OrbitClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown orbit class {s:?}")))
    }
}

/// Everything that determines a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub eps_list: Vec<f64>,
    /// Iterates per averaging window.
    pub window: usize,
    pub dig_cutoff: f64,
    pub rho: f64,
    pub order_cutoff: u64,
    /// Ceiling for the resonance-order search.
    pub max_order: u64,
    pub omega_box: OmegaBox,
    pub initial_angle: [f64; 2],
    /// Optional early escape when `|y|` exceeds this; off by default.
    pub y_escape: Option<f64>,
    /// Fixed map constants; `delta` and `eps` are overridden per orbit.
    pub map: MapParams,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n1: 100,
            n2: 100,
            p_min: -0.05,
            p_max: 1.05,
            eps_list: vec![0.02],
            window: DEFAULT_WINDOW,
            dig_cutoff: DIG_CUTOFF,
            rho: CLASSIFICATION_RHO,
            order_cutoff: RESONANCE_ORDER_CUTOFF,
            max_order: DEFAULT_MAX_ORDER,
            omega_box: OmegaBox::UNIT,
            initial_angle: [0.0, 0.0],
            y_escape: None,
            map: MapParams::default(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::InvalidArgument("grid must have at least one point per axis".into()));
        }
        if !(self.p_min.is_finite() && self.p_max.is_finite() && self.p_min <= self.p_max) {
            return Err(Error::InvalidArgument("grid range must be finite and ordered".into()));
        }
        if self.window < 2 {
            return Err(Error::WindowTooShort(self.window));
        }
        if self.eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidArgument("eps values must be finite and nonnegative".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidPrecision(self.rho));
        }
        if !self.omega_box.is_valid() {
            return Err(Error::InvalidArgument("frequency box is empty".into()));
        }
        if let Some(b) = self.y_escape {
            if !(b > 0.0) {
                return Err(Error::InvalidArgument("y_escape must be positive".into()));
            }
        }
        Ok(())
    }

    /// The `i`-th of `n` evenly spaced grid values, endpoints included.
    pub fn grid_value(&self, i: usize, n: usize) -> f64 {
        linspace_at(self.p_min, self.p_max, i, n)
    }

    pub fn grid_point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.grid_value(i, self.n1), self.grid_value(j, self.n2)]
    }

    pub fn cell_count(&self) -> usize {
        self.n1 * self.n2 * self.eps_list.len()
    }

    fn escape_bound(&self) -> f64 {
        self.y_escape.unwrap_or(DIVERGENCE_BOUND)
    }
}

pub(crate) fn linspace_at(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        lo
    } else if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

/// One classified orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    /// Grid point, for records produced by a grid sweep.
    pub p: Option<[f64; 2]>,
    pub y0: f64,
    pub delta: f64,
    pub eps: f64,
    /// NaN when the orbit diverged.
    pub omega: FrequencyVector,
    /// NaN when the orbit diverged.
    pub dig: f64,
    /// Resonance order, computed only for bounded nonchaotic orbits.
    pub order: Option<u64>,
    pub class: OrbitClass,
    pub hit: Option<ResonanceHit>,
}

impl OrbitRecord {
    pub fn is_rotational(&self) -> bool {
        self.class == OrbitClass::Rotational
    }
}

/// A [`GridSpec`] together with its shared weight plan.
#[derive(Debug, Clone)]
pub struct Classifier {
    spec: GridSpec,
    plan: Arc<WeightPlan>,
}

impl Classifier {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let plan = WeightPlan::shared(spec.window)?;
        Ok(Classifier { spec, plan })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn plan(&self) -> &Arc<WeightPlan> {
        &self.plan
    }

    pub fn classify(&self, y0: f64, delta: f64, eps: f64) -> OrbitRecord {
        let spec = &self.spec;
        let params = MapParams { delta, eps, ..spec.map };
        let s0 = PhaseState::new(spec.initial_angle[0], spec.initial_angle[1], y0);
        let mut rec = OrbitRecord {
            p: None,
            y0,
            delta,
            eps,
            omega: FrequencyVector::new(f64::NAN, f64::NAN),
            dig: f64::NAN,
            order: None,
            class: OrbitClass::Unbounded,
            hit: None,
        };
        let avg = match rotation_vector_with_dig_within(s0, &params, &self.plan, spec.escape_bound()) {
            Ok(avg) => avg,
            Err(_) => return rec,
        };
        rec.omega = avg.omega();
        rec.dig = avg.dig;
        if !rec.omega.in_box(&spec.omega_box) {
            return rec;
        }
        if !(avg.dig > spec.dig_cutoff) {
            rec.class = OrbitClass::Chaotic;
            return rec;
        }
        match resonance_order_bounded(rec.omega, spec.rho, spec.max_order) {
            Ok(r) => {
                rec.order = Some(r.order);
                rec.hit = Some(r.hit);
                rec.class = if r.order <= spec.order_cutoff {
                    OrbitClass::Resonant
                } else {
                    OrbitClass::Rotational
                };
            }
            // no resonance below the ceiling: far beyond the cutoff
            Err(_) => rec.class = OrbitClass::Rotational,
        }
        rec
    }
}

/// Classify a single orbit starting at `(x0, y0)` with the spec's cutoffs.
pub fn classify_orbit(y0: f64, delta: f64, eps: f64, spec: &GridSpec) -> Result<OrbitRecord> {
    Ok(Classifier::new(spec.clone())?.classify(y0, delta, eps))
}

/// Per-`eps` class counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub total: usize,
    pub unbounded: usize,
    pub chaotic: usize,
    pub resonant: usize,
    pub rotational: usize,
}

impl EpsSummary {
    fn new(eps: f64) -> Self {
        EpsSummary {
            eps,
            total: 0,
            unbounded: 0,
            chaotic: 0,
            resonant: 0,
            rotational: 0,
        }
    }

    fn add(&mut self, class: OrbitClass) {
        self.total += 1;
        match class {
            OrbitClass::Unbounded => self.unbounded += 1,
            OrbitClass::Chaotic => self.chaotic += 1,
            OrbitClass::Resonant => self.resonant += 1,
            OrbitClass::Rotational => self.rotational += 1,
        }
    }

    fn frac(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }

    /// Share of all grid orbits whose frequency stayed in the box.
    pub fn fraction_bounded(&self) -> f64 {
        self.frac(self.total - self.unbounded)
    }

    /// Share of all grid orbits that are bounded and chaotic.
    pub fn fraction_chaotic(&self) -> f64 {
        self.frac(self.chaotic)
    }

    pub fn fraction_resonant(&self) -> f64 {
        self.frac(self.resonant)
    }

    pub fn fraction_rotational(&self) -> f64 {
        self.frac(self.rotational)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub per_eps: Vec<EpsSummary>,
    pub elapsed_seconds: f64,
}

pub fn summarize(records: &[OrbitRecord], eps_list: &[f64]) -> Vec<EpsSummary> {
    let mut out: Vec<EpsSummary> = eps_list.iter().map(|&e| EpsSummary::new(e)).collect();
    for r in records {
        if let Some(s) = out.iter_mut().find(|s| s.eps == r.eps) {
            s.add(r.class);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<OrbitRecord>,
    pub summary: SweepSummary,
}

/// Classify every grid point at every `eps`. Records come out row-major in
/// `p` (first index slowest), then with `eps` in the order given.
pub fn sweep_grid(spec: &GridSpec, exec: Execution) -> Result<SweepOutput> {
    let started = Instant::now();
    let classifier = Classifier::new(spec.clone())?;
    let n_eps = spec.eps_list.len();
    log::info!(
        "sweep: {}x{} grid, {} eps values, T = {}",
        spec.n1,
        spec.n2,
        n_eps,
        spec.window
    );
    let records = exec.map_range(spec.cell_count(), |cell| {
        let point = cell / n_eps;
        let (i, j) = (point / spec.n2, point % spec.n2);
        let p = spec.grid_point(i, j);
        let (y0, delta) = inverse_frequency(FrequencyVector::new(p[0], p[1]), &spec.map);
        let mut rec = classifier.classify(y0, delta, spec.eps_list[cell % n_eps]);
        rec.p = Some(p);
        rec
    });
    let per_eps = summarize(&records, &spec.eps_list);
    for s in &per_eps {
        log::info!(
            "eps {:.6}: bounded {:.4} chaotic {:.4} resonant {:.4} rotational {:.4}",
            s.eps,
            s.fraction_bounded(),
            s.fraction_chaotic(),
            s.fraction_resonant(),
            s.fraction_rotational()
        );
    }
    Ok(SweepOutput {
        records,
        summary: SweepSummary {
            per_eps,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// An inclusive evenly spaced range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Range { min, max, count }
    }

    pub fn at(&self, i: usize) -> f64 {
        linspace_at(self.min, self.max, i, self.count)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.at(i)).collect()
    }
}

/// Classify orbits on a `(y0, eps)` grid at fixed `delta`. Records are
/// ordered by `y0`, then `eps`.
pub fn cross_section(delta: f64, y: Range, eps: Range, spec: &GridSpec, exec: Execution) -> Result<Vec<OrbitRecord>> {
    if y.count == 0 || eps.count == 0 {
        return Err(Error::InvalidArgument("cross-section ranges must be nonempty".into()));
    }
    let classifier = Classifier::new(spec.clone())?;
    Ok(exec.map_range(y.count * eps.count, |cell| {
        classifier.classify(y.at(cell / eps.count), delta, eps.at(cell % eps.count))
    }))
}

/// The most robust rotational orbit seen in one frequency bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEntry {
    pub bin: [i64; 2],
    pub eps: f64,
    pub y0: f64,
    pub delta: f64,
    pub omega: FrequencyVector,
}

/// Largest rotational `eps` per square frequency bin `[k h, (k+1) h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalBins {
    pub bin_size: f64,
    bins: BTreeMap<(i64, i64), BinEntry>,
}

impl CriticalBins {
    pub fn new(bin_size: f64) -> Result<Self> {
        if !(bin_size > 0.0 && bin_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("bin size must be positive, got {bin_size}")));
        }
        Ok(CriticalBins {
            bin_size,
            bins: BTreeMap::new(),
        })
    }

    pub fn bin_of(&self, omega: FrequencyVector) -> (i64, i64) {
        (
            (omega.w1 / self.bin_size).floor() as i64,
            (omega.w2 / self.bin_size).floor() as i64,
        )
    }

    /// Fold in a record; non-rotational records are ignored. Ties keep the
    /// earlier record.
    pub fn insert(&mut self, rec: &OrbitRecord) {
        if !rec.is_rotational() {
            return;
        }
        let key = self.bin_of(rec.omega);
        let entry = BinEntry {
            bin: [key.0, key.1],
            eps: rec.eps,
            y0: rec.y0,
            delta: rec.delta,
            omega: rec.omega,
        };
        match self.bins.get(&key) {
            Some(old) if old.eps >= rec.eps => {}
            _ => {
                self.bins.insert(key, entry);
            }
        }
    }

    pub fn extend<'a>(&mut self, records: impl IntoIterator<Item = &'a OrbitRecord>) {
        for r in records {
            self.insert(r);
        }
    }

    pub fn get(&self, bin: (i64, i64)) -> Option<&BinEntry> {
        self.bins.get(&bin)
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Bins in `(i, j)` order.
    pub fn entries(&self) -> impl Iterator<Item = &BinEntry> {
        self.bins.values()
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.bins.values().filter(|b| b.eps > threshold).count()
    }
}

pub fn critical_set_bins(records: &[OrbitRecord], bin_size: f64) -> Result<CriticalBins> {
    let mut bins = CriticalBins::new(bin_size)?;
    bins.extend(records);
    Ok(bins)
}

/// Thresholds for [`refine_peak`]. Defaults follow the full-precision
/// procedure; desk-scale runs relax the grid and the halting box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub start_eps: f64,
    pub initial_d_eps: f64,
    /// Grid side while the spacing is coarse.
    pub coarse_n: usize,
    /// Grid side once the spacing drops below `switch_spacing`.
    pub fine_n: usize,
    pub switch_spacing: f64,
    /// Halt once a single torus sits in a box smaller than this.
    pub halt_extent: f64,
    /// No torus may exist at `eps_c + probe`.
    pub probe: f64,
    pub max_iterations: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            start_eps: 0.01,
            initial_d_eps: 0.002,
            coarse_n: 100,
            fine_n: 10,
            switch_spacing: 1e-12,
            halt_extent: 1e-12,
            probe: 1e-14,
            max_iterations: 2000,
        }
    }
}

/// A rectangle in the `(y, delta)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub y_min: f64,
    pub y_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl ActionBox {
    pub fn y_extent(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn delta_extent(&self) -> f64 {
        self.delta_max - self.delta_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineStep {
    pub eps: f64,
    pub d_eps: f64,
    pub grid_n: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub region: OmegaBox,
    pub eps_c: f64,
    pub y: f64,
    pub delta: f64,
    pub omega: FrequencyVector,
    pub dig: f64,
    /// Final search box around the peak.
    pub terminal_box: Option<ActionBox>,
    /// False when the iteration budget ran out first.
    pub complete: bool,
    pub iterations: usize,
    pub history: Vec<RefineStep>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    y: f64,
    delta: f64,
}

#[derive(Debug, Clone)]
struct Survivor {
    y: f64,
    delta: f64,
    omega: FrequencyVector,
    dig: f64,
}

enum SearchGrid {
    /// Initial grid over the frequency region.
    Frequency { n: usize },
    Action { b: ActionBox, n: usize },
}

impl SearchGrid {
    fn n(&self) -> usize {
        match self {
            SearchGrid::Frequency { n } | SearchGrid::Action { n, .. } => *n,
        }
    }

    fn candidates(&self, region: &OmegaBox, map: &MapParams) -> Vec<Candidate> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let c = match self {
                    SearchGrid::Frequency { .. } => {
                        let w = FrequencyVector::new(
                            linspace_at(region.w1_min, region.w1_max, i, n),
                            linspace_at(region.w2_min, region.w2_max, j, n),
                        );
                        let (y, delta) = inverse_frequency(w, map);
                        Candidate { y, delta }
                    }
                    SearchGrid::Action { b, .. } => Candidate {
                        y: linspace_at(b.y_min, b.y_max, i, n),
                        delta: linspace_at(b.delta_min, b.delta_max, j, n),
                    },
                };
                out.push(c);
            }
        }
        out
    }

    /// Grid spacing in `y` and `delta` (for the frequency grid, an upper
    /// bound through the inverse map).
    fn spacing(&self, region: &OmegaBox, map: &MapParams) -> (f64, f64) {
        let n = self.n().max(2) as f64 - 1.0;
        match self {
            SearchGrid::Frequency { .. } => {
                let h1 = (region.w1_max - region.w1_min) / n;
                let h2 = (region.w2_max - region.w2_min) / n;
                let y_far = (region.w1_min - map.gamma).abs().max((region.w1_max - map.gamma).abs());
                (h1, h2 + 2.0 * map.beta.abs() * y_far * h1)
            }
            SearchGrid::Action { b, .. } => (b.y_extent() / n, b.delta_extent() / n),
        }
    }
}

/// Adaptive search for the largest `eps` at which a rotational torus with
/// frequency in `region` survives.
///
/// Starting from a grid over the region at `start_eps`, each step keeps the
/// rotational survivors, shrinks the `(y, delta)` grid to their bounding box
/// (plus one cell of margin) and raises `eps` by `d_eps`. `d_eps` grows by
/// 1.3 with more than twelve survivors, stays for four to twelve and halves
/// below four. With no survivors `d_eps` halves and `eps` backs off by it.
/// The previous survivors are always re-tested along with the grid.
pub fn refine_peak(region: OmegaBox, spec: &GridSpec, cfg: &RefineConfig, exec: Execution) -> Result<PeakRecord> {
    if !region.is_valid()
        || region.w1_min < 0.0
        || region.w2_min < 0.0
        || region.w1_max > 1.0
        || region.w2_max > 1.0
    {
        return Err(Error::InvalidArgument("refinement region must lie within [0,1]^2".into()));
    }
    if cfg.coarse_n < 2 || cfg.fine_n < 2 || !(cfg.initial_d_eps > 0.0) || !(cfg.start_eps >= 0.0) {
        return Err(Error::InvalidArgument("invalid refinement configuration".into()));
    }
    let classifier = Classifier::new(GridSpec {
        omega_box: OmegaBox::UNIT,
        ..spec.clone()
    })?;
    let evaluate = |cands: &[Candidate], eps: f64| -> Vec<Survivor> {
        exec.map(cands, |c| classifier.classify(c.y, c.delta, eps))
            .into_iter()
            .filter(|r| r.is_rotational() && r.omega.in_box(&region))
            .map(|r| Survivor {
                y: r.y0,
                delta: r.delta,
                omega: r.omega,
                dig: r.dig,
            })
            .collect()
    };

    let mut grid = SearchGrid::Frequency { n: cfg.coarse_n };
    let mut eps = cfg.start_eps;
    let mut d_eps = cfg.initial_d_eps;
    let mut best: Option<(f64, Vec<Survivor>)> = None;
    let mut history = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        let mut cands = grid.candidates(&region, &spec.map);
        if let Some((_, prev)) = &best {
            cands.extend(prev.iter().map(|s| Candidate { y: s.y, delta: s.delta }));
        }
        let survivors = evaluate(&cands, eps);
        history.push(RefineStep {
            eps,
            d_eps,
            grid_n: grid.n(),
            survivors: survivors.len(),
        });
        log::debug!("refine: eps {eps:.15} d_eps {d_eps:.3e} n {} survivors {}", grid.n(), survivors.len());

        if survivors.is_empty() {
            d_eps /= 2.0;
            eps = match &best {
                // bisect back toward the last eps with survivors
                Some((good, _)) => good + d_eps,
                None => (eps - d_eps).max(0.0),
            };
            continue;
        }

        let (hy, hd) = grid.spacing(&region, &spec.map);
        let mut b = ActionBox {
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
            delta_min: f64::INFINITY,
            delta_max: f64::NEG_INFINITY,
        };
        for s in &survivors {
            b.y_min = b.y_min.min(s.y);
            b.y_max = b.y_max.max(s.y);
            b.delta_min = b.delta_min.min(s.delta);
            b.delta_max = b.delta_max.max(s.delta);
        }
        let current = match &grid {
            SearchGrid::Action { b, .. } => Some(*b),
            SearchGrid::Frequency { .. } => None,
        };
        let isolated = survivors.len() == 1
            && grid.n() == cfg.fine_n
            && current.is_some_and(|c| c.y_extent() < cfg.halt_extent && c.delta_extent() < cfg.halt_extent);
        if isolated {
            let probe_eps = eps + cfg.probe;
            let mut probe_cands = cands.clone();
            probe_cands.push(Candidate {
                y: survivors[0].y,
                delta: survivors[0].delta,
            });
            if evaluate(&probe_cands, probe_eps).is_empty() {
                let s = &survivors[0];
                return Ok(PeakRecord {
                    region,
                    eps_c: eps,
                    y: s.y,
                    delta: s.delta,
                    omega: s.omega,
                    dig: s.dig,
                    terminal_box: current,
                    complete: true,
                    iterations: iteration,
                    history,
                });
            }
        }

        d_eps = match survivors.len() {
            n if n > 12 => d_eps * 1.3,
            n if n >= 4 => d_eps,
            _ => d_eps / 2.0,
        };
        b.y_min -= hy;
        b.y_max += hy;
        b.delta_min -= hd;
        b.delta_max += hd;
        let coarse_spacing = (b.y_extent() / (cfg.coarse_n - 1) as f64).min(b.delta_extent() / (cfg.coarse_n - 1) as f64);
        let n = if coarse_spacing < cfg.switch_spacing { cfg.fine_n } else { cfg.coarse_n };
        grid = SearchGrid::Action { b, n };
        best = Some((eps, survivors));
        eps += d_eps;
    }

    let terminal_box = match &grid {
        SearchGrid::Action { b, .. } => Some(*b),
        SearchGrid::Frequency { .. } => None,
    };
    let iterations = cfg.max_iterations;
    match best {
        Some((eps_c, survivors)) => {
            let s = survivors
                .into_iter()
                .max_by(|a, b| a.dig.total_cmp(&b.dig))
                .expect("survivor lists are nonempty");
            Ok(PeakRecord {
                region,
                eps_c,
                y: s.y,
                delta: s.delta,
                omega: s.omega,
                dig: s.dig,
                terminal_box,
                complete: false,
                iterations,
                history,
            })
        }
        None => Err(Error::InvalidArgument(format!(
            "no rotational torus found in the region within {iterations} iterations"
        ))),
    }
}
