//! Invariants re-verified by `--check` on existing outputs. Each check
//! returns the row count and a list of violations.

use std::path::Path;

use torus_core::io::{self, RunMetadata};
use torus_core::numtheory::jpa::verify_period;
use torus_core::numtheory::{random_integral_bases, znorm, CubicField, JpaExpansion};
use torus_core::resonance::resonance_distance;
use torus_core::sweep::{CriticalBins, PeakRecord, Range};
use torus_core::{Execution, GridSpec, OrbitClass, OrbitRecord};

use crate::commands::{open, resolve_vector};
use crate::opts::{parse_omega, sidecar_path};
use crate::{CliError, Command};

type Checked = Result<(usize, Vec<String>), CliError>;

fn metadata(csv: &Path) -> Result<(RunMetadata, Command), CliError> {
    let path = sidecar_path(csv);
    let meta: RunMetadata = io::read_json(open(&path)?)?;
    let command: Command = serde_json::from_value(meta.config.clone())
        .map_err(|e| CliError::Io(format!("{}: unreadable config: {e}", path.display())))?;
    Ok((meta, command))
}

fn summary_field<T: serde::de::DeserializeOwned>(meta: &RunMetadata, key: &str) -> Result<T, CliError> {
    serde_json::from_value(meta.summary[key].clone())
        .map_err(|e| CliError::Io(format!("sidecar summary field {key}: {e}")))
}

/// Class labels must follow from `dig`, `M` and the cutoffs.
fn record_violations(i: usize, r: &OrbitRecord, spec: &GridSpec, out: &mut Vec<String>) {
    let mut bad = |msg: String| out.push(format!("row {}: {msg}", i + 1));
    let bounded = r.omega.is_finite() && r.omega.in_box(&spec.omega_box);
    match r.class {
        OrbitClass::Unbounded => {
            if bounded {
                bad("unbounded orbit with a frequency inside the box".into());
            }
            if r.order.is_some() {
                bad("unbounded orbit carries a resonance order".into());
            }
        }
        c => {
            if !bounded {
                bad(format!("{c} orbit with frequency outside the box"));
            }
            let regular = r.dig > spec.dig_cutoff;
            match c {
                OrbitClass::Chaotic if regular => bad(format!("chaotic but dig {} > cutoff", r.dig)),
                OrbitClass::Resonant if !regular || r.order.is_none_or(|m| m > spec.order_cutoff) => {
                    bad(format!("resonant but dig {} / M {:?}", r.dig, r.order))
                }
                OrbitClass::Rotational if !regular || r.order.is_some_and(|m| m <= spec.order_cutoff) => {
                    bad(format!("rotational but dig {} / M {:?}", r.dig, r.order))
                }
                _ => {}
            }
        }
    }
    if let Some(h) = r.hit {
        if h.m[0].unsigned_abs() + h.m[1].unsigned_abs() != h.order || Some(h.order) != r.order {
            bad(format!("resonance ({},{}) does not have order {:?}", h.m[0], h.m[1], r.order));
        }
        if h.canonical() != h {
            bad("resonance not in canonical sign form".into());
        }
        match resonance_distance(r.omega, h.m, h.n) {
            Ok(d) if d <= spec.rho * (1.0 + 1e-9) => {}
            Ok(d) => bad(format!("resonance distance {d:e} exceeds rho {:e}", spec.rho)),
            Err(e) => bad(e.to_string()),
        }
    }
}

fn load_records(csv: &Path) -> Result<(Vec<OrbitRecord>, RunMetadata, Command), CliError> {
    let records = io::read_records(open(csv)?)?;
    let (meta, command) = metadata(csv)?;
    Ok((records, meta, command))
}

fn class_violations(records: &[OrbitRecord], spec: &GridSpec) -> Vec<String> {
    let mut v = Vec::new();
    for (i, r) in records.iter().enumerate() {
        record_violations(i, r, spec, &mut v);
    }
    v
}

pub fn records(csv: &Path) -> Checked {
    let (records, meta, _) = load_records(csv)?;
    let spec: GridSpec = summary_field(&meta, "spec")?;
    Ok((records.len(), class_violations(&records, &spec)))
}

pub fn sweep(csv: &Path) -> Checked {
    let (records, _, command) = load_records(csv)?;
    let Command::Sweep(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from a sweep".into()));
    };
    let spec = cmd.grid_spec()?;
    let mut v = class_violations(&records, &spec);
    if records.len() != spec.cell_count() {
        v.push(format!("{} rows, grid has {}", records.len(), spec.cell_count()));
    }
    let n_eps = spec.eps_list.len();
    for (cell, r) in records.iter().enumerate().take(spec.cell_count()) {
        let point = cell / n_eps;
        let p = spec.grid_point(point / spec.n2, point % spec.n2);
        if r.p != Some(p) || r.eps != spec.eps_list[cell % n_eps] {
            v.push(format!("row {}: out of grid order", cell + 1));
        }
    }
    Ok((records.len(), v))
}

pub fn slice(csv: &Path) -> Checked {
    let (records, _, command) = load_records(csv)?;
    let Command::Slice(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from a slice".into()));
    };
    let spec = cmd.classify.grid_spec()?;
    let mut v = class_violations(&records, &spec);
    let (y, eps) = (Range::new(cmd.y_min, cmd.y_max, cmd.ny), Range::new(cmd.eps_min, cmd.eps_max, cmd.neps));
    if records.len() != y.count * eps.count {
        v.push(format!("{} rows, grid has {}", records.len(), y.count * eps.count));
    }
    for (cell, r) in records.iter().enumerate() {
        if r.y0 != y.at(cell / eps.count) || r.eps != eps.at(cell % eps.count) || r.delta != cmd.delta {
            v.push(format!("row {}: out of grid order", cell + 1));
        }
    }
    Ok((records.len(), v))
}

pub fn bins(csv: &Path, default_size: f64) -> Checked {
    let entries = io::read_bins(open(csv)?)?;
    let size = match metadata(csv) {
        Ok((_, Command::Bins(cmd))) => cmd.bin_size,
        _ => default_size,
    };
    let lookup = CriticalBins::new(size)?;
    let mut v = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, e) in entries.iter().enumerate() {
        let (a, b) = lookup.bin_of(e.omega);
        if [a, b] != e.bin {
            v.push(format!("row {}: omega does not fall in bin ({},{})", i + 1, e.bin[0], e.bin[1]));
        }
        if !seen.insert(e.bin) {
            v.push(format!("row {}: bin ({},{}) repeated", i + 1, e.bin[0], e.bin[1]));
        }
        if !(e.eps >= 0.0) {
            v.push(format!("row {}: bad eps {}", i + 1, e.eps));
        }
    }
    Ok((entries.len(), v))
}

pub fn refine(csv: &Path) -> Checked {
    let history = io::read_refine_history(open(csv)?)?;
    let (meta, _) = metadata(csv)?;
    let peak: PeakRecord = summary_field(&meta, "peak")?;
    let mut v = Vec::new();
    for (i, s) in history.iter().enumerate() {
        if !(s.d_eps > 0.0) || s.grid_n < 2 {
            v.push(format!("row {}: bad step size or grid", i + 1));
        }
        if s.survivors > 0 && s.eps > peak.eps_c {
            v.push(format!("row {}: survivors at eps {} above eps_c {}", i + 1, s.eps, peak.eps_c));
        }
    }
    if let Some(best) = history.iter().filter(|s| s.survivors > 0).map(|s| s.eps).reduce(f64::max) {
        if best != peak.eps_c {
            v.push(format!("eps_c {} is not the largest surviving eps {best}", peak.eps_c));
        }
    }
    if !peak.omega.in_box(&peak.region) {
        v.push("peak frequency lies outside the region".into());
    }
    Ok((history.len(), v))
}

pub fn path(csv: &Path) -> Checked {
    let points = io::read_path(open(csv)?)?;
    let (meta, command) = metadata(csv)?;
    let Command::Continue(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from a continuation".into()));
    };
    let eps_c: f64 = serde_json::from_value(meta.summary["critical"]["eps_c"].clone())?;
    let mut v = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !(p.omega_err < cmd.tolerance) {
            v.push(format!("row {}: residual {:e} above tolerance", i + 1, p.omega_err));
        }
        if !(p.dig > cmd.classify.dig_cutoff) {
            v.push(format!("row {}: dig {} at or below cutoff", i + 1, p.dig));
        }
        if p.eps > eps_c {
            v.push(format!("row {}: eps {} above eps_c {eps_c}", i + 1, p.eps));
        }
        if i > 0 && !(p.eps > points[i - 1].eps) {
            v.push(format!("row {}: eps not increasing", i + 1));
        }
    }
    Ok((points.len(), v))
}

pub fn orders(csv: &Path) -> Checked {
    let rows = io::read_orders(open(csv)?)?;
    let (_, command) = metadata(csv)?;
    let Command::Resorder(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from resorder".into()));
    };
    let (omega, _) = parse_omega(&cmd.omega)?;
    let mut v = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let h = r.hit;
        if h.m[0].unsigned_abs() + h.m[1].unsigned_abs() != r.order {
            v.push(format!("row {}: |m|_1 differs from M", i + 1));
        }
        match resonance_distance(omega, h.m, h.n) {
            Ok(d) if d < r.rho => {}
            Ok(d) => v.push(format!("row {}: distance {d:e} not below rho {:e}", i + 1, r.rho)),
            Err(e) => v.push(format!("row {}: {e}", i + 1)),
        }
    }
    Ok((rows.len(), v))
}

pub fn stats(csv: &Path) -> Checked {
    let mut rows = io::read_order_stats(open(csv)?)?;
    let mut v = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if r.samples < 2 || !(r.std_log10_order >= 0.0) || !(r.mean_log10_order >= 0.0) {
            v.push(format!("row {}: inconsistent statistics", i + 1));
        }
        if !((r.max_order as f64).log10() >= r.mean_log10_order) {
            v.push(format!("row {}: mean exceeds maximum", i + 1));
        }
    }
    // M(omega, rho) is nonincreasing in rho for every sample
    rows.sort_by(|a, b| b.rho.total_cmp(&a.rho));
    for w in rows.windows(2) {
        if w[1].mean_log10_order < w[0].mean_log10_order || w[1].max_order < w[0].max_order {
            v.push(format!("orders decrease from rho {:e} to {:e}", w[0].rho, w[1].rho));
        }
    }
    Ok((rows.len(), v))
}

pub fn approximants(csv: &Path) -> Checked {
    let rows = io::read_approximants(open(csv)?)?;
    let (_, command) = metadata(csv)?;
    let Command::Approx(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from approx".into()));
    };
    let (omega, _, _) = resolve_vector(cmd.field.as_deref(), cmd.variant.as_deref(), cmd.omega.as_deref())?;
    let mut v = Vec::new();
    if rows.first().is_some_and(|r| r.q != 1) {
        v.push("first period is not 1".into());
    }
    for (i, r) in rows.iter().enumerate() {
        let qf = r.q as f64;
        let z = znorm(&[qf * omega.w1, qf * omega.w2]);
        if (z - r.znorm).abs() > 1e-12 || (qf * z * z - r.c_s).abs() > 1e-12 * qf.max(1.0) {
            v.push(format!("row {}: values do not match q = {}", i + 1, r.q));
        }
        let near = [(qf * omega.w1).round() as i64, (qf * omega.w2).round() as i64];
        if near != r.p {
            v.push(format!("row {}: p is not the nearest integer vector", i + 1));
        }
        if i > 0 && !(r.q > rows[i - 1].q && r.znorm < rows[i - 1].znorm) {
            v.push(format!("row {}: not a strict record", i + 1));
        }
    }
    Ok((rows.len(), v))
}

pub fn jpa(csv: &Path) -> Checked {
    let (steps, pre) = io::read_jpa(open(csv)?)?;
    let (meta, command) = metadata(csv)?;
    let Command::Jpa(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from jpa".into()));
    };
    let mut v = Vec::new();
    for (i, &(k, l)) in steps.iter().enumerate() {
        if k < 1 || l < 0 || l > k {
            v.push(format!("digit {i}: ({k},{l}) violates 0 <= l <= k, k >= 1"));
        }
    }
    let status: String = summary_field(&meta, "status")?;
    let (_, _, exact) = resolve_vector(cmd.field.as_deref(), cmd.variant.as_deref(), cmd.omega.as_deref())?;
    if let (Some(fv), false, "periodic") = (exact, cmd.float, status.as_str()) {
        let expansion = JpaExpansion {
            period_len: steps.len() - pre,
            steps: steps.clone(),
            preperiod_len: pre,
            terminated: false,
            diagnostic: None,
        };
        if !verify_period(&fv.exact, &expansion)? {
            v.push("period does not reproduce under exact re-expansion".into());
        }
    }
    Ok((steps.len(), v))
}

pub fn bases(csv: &Path) -> Checked {
    let rows = io::read_bases(open(csv)?)?;
    let (_, command) = metadata(csv)?;
    let Command::Basis(cmd) = command else {
        return Err(CliError::Usage("sidecar is not from basis".into()));
    };
    let field: CubicField = cmd.field.parse()?;
    let fresh = random_integral_bases(field, cmd.word_length, cmd.count, cmd.seed, Execution::Sequential)?;
    let mut v = Vec::new();
    if fresh.len() != rows.len() {
        v.push(format!("{} rows, configuration gives {}", rows.len(), fresh.len()));
    }
    for ((i, w, _), b) in rows.iter().zip(&fresh) {
        if !(0.0..1.0).contains(&w.w1) || !(0.0..1.0).contains(&w.w2) {
            v.push(format!("row {}: components outside [0,1)", i + 1));
        }
        if w.w1.to_bits() != b.omega.w1.to_bits() || w.w2.to_bits() != b.omega.w2.to_bits() {
            v.push(format!("row {}: does not regenerate from the seed", i + 1));
        }
    }
    Ok((rows.len(), v))
}
