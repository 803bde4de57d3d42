//! Resonance geometry and the minimal resonance order of a frequency vector.
//!
//! `omega` is `(m, n)`-resonant to precision `rho` when its Euclidean distance
//! to the line `m . omega = n` is at most `rho`. The `rho`-order
//! `M(omega, rho)` is the smallest `|m|_1` admitting such a resonance. It is
//! found by brute force: orders ascend, and within an order `m2` runs from
//! `-M` to `M` with `m1 = M - |m2|`. Covering `m1 >= 0` only is enough since
//! `(m, n)` and `(-m, -n)` describe the same line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::FrequencyVector;
use crate::parallel::Execution;
use crate::rng::substream;

/// Precision used to classify orbits as resonant.
pub const CLASSIFICATION_RHO: f64 = 1e-9;

/// Orbits with `M(omega, 1e-9)` at or below this are resonant.
pub const RESONANCE_ORDER_CUTOFF: u64 = 251;

/// Default ceiling on the order search.
pub const DEFAULT_MAX_ORDER: u64 = 1_000_000;

/// An integer resonance `m . omega = n` and its distance to `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceHit {
    pub m: [i64; 2],
    pub n: i64,
    pub order: u64,
    pub distance: f64,
}

impl ResonanceHit {
    /// Sign convention: `n >= 0`, and when `n = 0` the first nonzero
    /// component of `m` is positive.
    pub fn canonical(self) -> Self {
        let flip = if self.n != 0 {
            self.n < 0
        } else if self.m[0] != 0 {
            self.m[0] < 0
        } else {
            self.m[1] < 0
        };
        if flip {
            ResonanceHit {
                m: [-self.m[0], -self.m[1]],
                n: -self.n,
                ..self
            }
        } else {
            self
        }
    }
}

/// Result of a `rho`-order search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderResult {
    pub order: u64,
    pub hit: ResonanceHit,
    pub rho: f64,
}

/// `|m . omega - n| / |m|_2`.
pub fn resonance_distance(w: FrequencyVector, m: [i64; 2], n: i64) -> Result<f64> {
    if m == [0, 0] {
        return Err(Error::DegenerateResonance);
    }
    let (k1, f1) = split_product(m[0] as f64, w.w1);
    let (k2, f2) = split_product(m[1] as f64, w.w2);
    // (k1 + k2 - n) is an exact small integer when n is near m.omega
    let r = ((k1 + k2) - n as f64) + (f1 + f2);
    let norm = ((m[0] as f64).powi(2) + (m[1] as f64).powi(2)).sqrt();
    Ok(r.abs() / norm)
}

/// Signed distance from `m . omega` to the nearest integer.
pub(crate) fn dot_fraction(w: FrequencyVector, m: [i64; 2]) -> f64 {
    let (_, f1) = split_product(m[0] as f64, w.w1);
    let (_, f2) = split_product(m[1] as f64, w.w2);
    let s = f1 + f2;
    s - s.round()
}

/// `k * w = int + frac` with `|frac| <= 1/2`, using the exact rounding error
/// of the product so that `frac` is accurate to a few ulps of itself.
#[inline]
fn split_product(k: f64, w: f64) -> (f64, f64) {
    let p = k * w;
    let err = k.mul_add(w, -p);
    let ip = p.round();
    let frac = (p - ip) + err;
    let adj = frac.round();
    (ip + adj, frac - adj)
}

/// `(int, frac)` decompositions of `k * w` for `k = 0, 1, 2, ...`.
#[derive(Debug, Clone)]
struct ProductTable {
    w: f64,
    ints: Vec<f64>,
    fracs: Vec<f64>,
}

impl ProductTable {
    fn new(w: f64) -> Self {
        ProductTable {
            w,
            ints: vec![0.0],
            fracs: vec![0.0],
        }
    }

    fn ensure(&mut self, k_max: usize) {
        while self.ints.len() <= k_max {
            let (i, f) = split_product(self.ints.len() as f64, self.w);
            self.ints.push(i);
            self.fracs.push(f);
        }
    }
}

/// Smallest-distance resonance of one order, among those within a filter.
#[derive(Debug, Clone, Copy)]
struct OrderBest {
    distance: f64,
    m: [i64; 2],
    n: i64,
}

/// Incremental scanner over resonance orders for a fixed `omega`.
#[derive(Debug, Clone)]
pub struct ResonanceScanner {
    omega: FrequencyVector,
    first: ProductTable,
    second: ProductTable,
}

impl ResonanceScanner {
    pub fn new(omega: FrequencyVector) -> Self {
        ResonanceScanner {
            omega,
            first: ProductTable::new(omega.w1),
            second: ProductTable::new(omega.w2),
        }
    }

    pub fn omega(&self) -> FrequencyVector {
        self.omega
    }

    /// Smallest distance at order `order` among resonances with distance
    /// `<= within`; ties keep the first in scan order.
    fn best_at_order(&mut self, order: u64, within: f64) -> Option<OrderBest> {
        let big = order as usize;
        self.first.ensure(big);
        self.second.ensure(big);
        let mf = order as f64;
        // |m|_2 <= |m|_1, so |r| > within * M rules a pair out early
        let gate = within * mf * (1.0 + 1e-12);
        let mut best: Option<OrderBest> = None;
        let o = order as i64;
        for m2 in -o..=o {
            let m1 = o - m2.abs();
            let a2 = m2.unsigned_abs() as usize;
            let (f2, sign) = if m2 < 0 {
                (-self.second.fracs[a2], -1.0)
            } else {
                (self.second.fracs[a2], 1.0)
            };
            let s = self.first.fracs[m1 as usize] + f2;
            let j = s.round();
            let r = s - j;
            if r.abs() > gate {
                continue;
            }
            let norm = ((m1 * m1 + m2 * m2) as f64).sqrt();
            let d = r.abs() / norm;
            if d > within {
                continue;
            }
            if best.is_none_or(|b| d < b.distance) {
                let base = self.first.ints[m1 as usize] + sign * self.second.ints[a2];
                let mut n = base + j;
                if r.abs() == 0.5 {
                    // exact half-integer m.omega: round half away from zero
                    let value = n + r;
                    n = if value > 0.0 { value.ceil() } else { value.floor() };
                }
                best = Some(OrderBest {
                    distance: d,
                    m: [m1, m2],
                    n: n as i64,
                });
            }
        }
        best
    }

    /// `M(omega, rho)` with a ceiling on the order.
    pub fn order(&mut self, rho: f64, max_order: u64) -> Result<OrderResult> {
        check_rho(rho)?;
        for order in 1..=max_order {
            if let Some(b) = self.best_at_order(order, rho) {
                return Ok(make_result(order, b, rho));
            }
        }
        Err(Error::NoResonanceFound { rho, m_max: max_order })
    }

    /// `M(omega, rho)` for several precisions in one pass over the orders.
    /// Results are returned in the order of `rhos`.
    pub fn orders(&mut self, rhos: &[f64], max_order: u64) -> Vec<Result<OrderResult>> {
        let mut out: Vec<Option<Result<OrderResult>>> = vec![None; rhos.len()];
        let mut pending: Vec<usize> = Vec::new();
        for (i, &rho) in rhos.iter().enumerate() {
            match check_rho(rho) {
                Ok(()) => pending.push(i),
                Err(e) => out[i] = Some(Err(e)),
            }
        }
        let mut order = 0;
        while !pending.is_empty() && order < max_order {
            order += 1;
            let widest = pending.iter().map(|&i| rhos[i]).fold(0.0, f64::max);
            if let Some(b) = self.best_at_order(order, widest) {
                pending.retain(|&i| {
                    if b.distance <= rhos[i] {
                        out[i] = Some(Ok(make_result(order, b, rhos[i])));
                        false
                    } else {
                        true
                    }
                });
            }
        }
        out.into_iter()
            .zip(rhos)
            .map(|(r, &rho)| r.unwrap_or(Err(Error::NoResonanceFound { rho, m_max: max_order })))
            .collect()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPrecision(rho))
    }
}

fn make_result(order: u64, b: OrderBest, rho: f64) -> OrderResult {
    let hit = ResonanceHit {
        m: b.m,
        n: b.n,
        order,
        distance: b.distance,
    }
    .canonical();
    OrderResult { order, hit, rho }
}

/// `M(omega, rho)` with the default order ceiling.
pub fn resonance_order(w: FrequencyVector, rho: f64) -> Result<OrderResult> {
    ResonanceScanner::new(w).order(rho, DEFAULT_MAX_ORDER)
}

/// `M(omega, rho)` with an explicit ceiling.
pub fn resonance_order_bounded(w: FrequencyVector, rho: f64, max_order: u64) -> Result<OrderResult> {
    ResonanceScanner::new(w).order(rho, max_order)
}

/// Resonant iff `M <= 251` (the result should be computed at `rho = 1e-9`).
pub fn is_resonant(result: &OrderResult) -> bool {
    result.order <= RESONANCE_ORDER_CUTOFF
}

/// Per-precision statistics of `log10 M` over random frequency vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStatsRow {
    pub rho: f64,
    pub mean_log10_order: f64,
    pub std_log10_order: f64,
    pub max_order: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStatistics {
    pub rows: Vec<OrderStatsRow>,
    /// Least-squares fit `mean log10 M = slope * log10 rho + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub seed: u64,
}

/// Draw `sample_count` vectors uniformly in `[0,1)^2` and tabulate
/// `log10 M(omega, rho)` for each `rho`.
pub fn order_statistics(
    sample_count: usize,
    rhos: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<OrderStatistics> {
    use rand::Rng;
    if sample_count < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    for &rho in rhos {
        check_rho(rho)?;
    }
    let per_sample: Vec<Vec<Result<OrderResult>>> = exec.map_range(sample_count, |i| {
        let mut rng = substream(seed, "order-statistics", i as u64);
        let w = FrequencyVector::new(rng.random(), rng.random());
        ResonanceScanner::new(w).orders(rhos, DEFAULT_MAX_ORDER)
    });
    let mut rows = Vec::with_capacity(rhos.len());
    for (j, &rho) in rhos.iter().enumerate() {
        let orders: Vec<u64> = per_sample
            .iter()
            .filter_map(|r| r[j].as_ref().ok().map(|o| o.order))
            .collect();
        let logs: Vec<f64> = orders.iter().map(|&m| (m as f64).log10()).collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        rows.push(OrderStatsRow {
            rho,
            mean_log10_order: mean,
            std_log10_order: var.sqrt(),
            max_order: orders.iter().copied().max().unwrap_or(0),
            samples: orders.len(),
        });
    }
    let (slope, intercept) = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.rho.log10()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean_log10_order).collect();
        least_squares_line(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(OrderStatistics {
        rows,
        slope,
        intercept,
        seed,
    })
}

pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
