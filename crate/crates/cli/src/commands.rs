use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use torus_core::continuation::{
    local_robustness_scan, locate_critical_eps, CriticalConfig, RobustnessConfig, SolverConfig, StepControl,
};
use torus_core::io::{self, RunMetadata};
use torus_core::map::{step, PhaseState};
use torus_core::numtheory::jpa::{verify_period, FLOAT_MAX_STEPS};
use torus_core::numtheory::{
    best_approximants_checked, cubic_field_vector, jpa_expand_exact, jpa_expand_float, named_vector,
    random_integral_bases, CubicField,
};
use torus_core::resonance::{order_statistics, ResonanceScanner};
use torus_core::sweep::{
    critical_set_bins, cross_section, refine_peak, summarize, sweep_grid, Classifier, EpsSummary, Range,
    RefineConfig,
};
use torus_core::{OmegaBox, OrbitRecord};

use crate::check;
use crate::opts::{parse_omega, sidecar_path, ClassifyOpts, OutOpts};
use crate::{CliError, Command, Context};

type CliResult = Result<(), CliError>;

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Orbit(_) => "orbit",
            Command::Sweep(_) => "sweep",
            Command::Slice(_) => "slice",
            Command::Bins(_) => "bins",
            Command::Refine(_) => "refine",
            Command::Continue(_) => "continue",
            Command::Resorder(_) => "resorder",
            Command::Stats(_) => "stats",
            Command::Approx(_) => "approx",
            Command::Jpa(_) => "jpa",
            Command::Basis(_) => "basis",
            Command::Replay(_) => "replay",
        }
    }

    pub fn set_out(&mut self, path: PathBuf) {
        let out = match self {
            Command::Orbit(c) => &mut c.out,
            Command::Sweep(c) => &mut c.out,
            Command::Slice(c) => &mut c.out,
            Command::Bins(c) => &mut c.out,
            Command::Refine(c) => &mut c.out,
            Command::Continue(c) => &mut c.out,
            Command::Resorder(c) => &mut c.out,
            Command::Stats(c) => &mut c.out,
            Command::Approx(c) => &mut c.out,
            Command::Jpa(c) => &mut c.out,
            Command::Basis(c) => &mut c.out,
            Command::Replay(c) => {
                c.out = Some(path);
                return;
            }
        };
        out.out = Some(path);
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_csv<F>(path: &Path, f: F) -> CliResult
where
    F: FnOnce(&mut BufWriter<File>) -> torus_core::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Everything a sidecar needs besides the command itself.
struct Sidecar {
    started: Instant,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
    summary: serde_json::Value,
}

impl Sidecar {
    fn new(started: Instant) -> Self {
        Sidecar {
            started,
            seed: None,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    fn write(self, csv: &Path, command: Command, ctx: &Context) -> CliResult {
        let name = command.name();
        let mut meta = RunMetadata::new(name, serde_json::to_value(&command)?);
        meta.seed = self.seed;
        meta.threads = ctx.threads;
        meta.runtime_seconds = self.started.elapsed().as_secs_f64();
        meta.outputs = std::iter::once(csv.to_path_buf())
            .chain(self.outputs)
            .map(|p| p.display().to_string())
            .collect();
        meta.summary = self.summary;
        let path = sidecar_path(csv);
        let mut w = create(&path)?;
        io::write_json(&mut w, &meta)?;
        writeln!(w)?;
        w.flush()?;
        log::info!("wrote {} and {}", csv.display(), path.display());
        Ok(())
    }
}

fn report_check(kind: &str, path: &Path, rows: usize, violations: Vec<String>) -> CliResult {
    if violations.is_empty() {
        println!("check passed: {} ({kind}, {rows} rows)", path.display());
        Ok(())
    } else {
        Err(CliError::Violations(violations))
    }
}

fn format_record(r: &OrbitRecord) -> String {
    let order = r.order.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
    let mut line = format!(
        "class={} dig={:.2} omega=({:.15}, {:.15}) M={order}",
        r.class, r.dig, r.omega.w1, r.omega.w2
    );
    if let Some(h) = r.hit {
        line.push_str(&format!(" m=({},{}) n={}", h.m[0], h.m[1], h.n));
    }
    line
}

fn print_summary(per_eps: &[EpsSummary]) {
    println!("eps,total,bounded,chaotic,resonant,rotational");
    for s in per_eps {
        println!(
            "{},{},{:.4},{:.4},{:.4},{:.4}",
            s.eps,
            s.total,
            s.fraction_bounded(),
            s.fraction_chaotic(),
            s.fraction_resonant(),
            s.fraction_rotational()
        );
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OrbitCmd {
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub y0: f64,
    #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.02)]
    pub eps: f64,
    #[command(flatten)]
    pub classify: ClassifyOpts,
    /// Dump orbit points with |x2| <= slice-width (mod 1) to this CSV.
    #[arg(long)]
    pub slice: Option<PathBuf>,
    #[arg(long, default_value_t = 0.005)]
    pub slice_width: f64,
    /// Iterations used for the slice dump.
    #[arg(long, default_value_t = 1_000_000)]
    pub slice_steps: u64,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_orbit(cmd: OrbitCmd, ctx: &Context) -> CliResult {
    if cmd.out.check {
        let path = cmd.out.required()?;
        let (rows, v) = check::records(path)?;
        return report_check("orbit", path, rows, v);
    }
    let started = Instant::now();
    let spec = cmd.classify.grid_spec()?;
    let rec = Classifier::new(spec.clone())?.classify(cmd.y0, cmd.delta, cmd.eps);
    println!("{}", format_record(&rec));
    let mut sidecar = Sidecar::new(started);
    if let Some(slice) = &cmd.slice {
        let params = cmd.classify.map.params(cmd.delta, cmd.eps);
        let mut s = PhaseState::new(spec.initial_angle[0], spec.initial_angle[1], cmd.y0);
        let mut w = create(slice)?;
        writeln!(w, "x1,x2,y")?;
        let mut kept = 0usize;
        for _ in 0..cmd.slice_steps {
            s = step(s, &params);
            if !s.is_finite() || s.y.abs() > 1e10 {
                break;
            }
            if s.x2.min(1.0 - s.x2) <= cmd.slice_width {
                writeln!(w, "{},{},{}", io::fmt_f64(s.x1), io::fmt_f64(s.x2), io::fmt_f64(s.y))?;
                kept += 1;
            }
        }
        w.flush()?;
        println!("slice: {kept} points in {}", slice.display());
        sidecar.outputs.push(slice.clone());
    }
    if let Some(out) = cmd.out.out.clone() {
        write_csv(&out, |w| io::write_records(w, std::slice::from_ref(&rec)))?;
        sidecar.summary = json!({ "spec": spec, "record": rec });
        sidecar.write(&out, Command::Orbit(cmd), ctx)?;
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepCmd {
    /// Grid points along omega1 at eps = 0.
    #[arg(long, default_value_t = 100)]
    pub n1: usize,
    /// Grid points along omega2 at eps = 0.
    #[arg(long, default_value_t = 100)]
    pub n2: usize,
    #[arg(long, default_value_t = -0.05, allow_hyphen_values = true)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1.05, allow_hyphen_values = true)]
    pub p_max: f64,
    /// Perturbation strengths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.02])]
    pub eps: Vec<f64>,
    /// Count only bounded orbits with frequency in quadrant 1-4 of the unit
    /// square (II is [0.5,1] x [0,0.5]); overrides --box.
    #[arg(long)]
    pub quadrant: Option<u8>,
    #[command(flatten)]
    pub classify: ClassifyOpts,
    #[command(flatten)]
    pub out: OutOpts,
}

impl SweepCmd {
    pub fn grid_spec(&self) -> Result<torus_core::GridSpec, CliError> {
        let mut spec = self.classify.grid_spec()?;
        spec.n1 = self.n1;
        spec.n2 = self.n2;
        spec.p_min = self.p_min;
        spec.p_max = self.p_max;
        spec.eps_list = self.eps.clone();
        if let Some(q) = self.quadrant {
            spec.omega_box =
                OmegaBox::quadrant(q).ok_or_else(|| CliError::Usage(format!("no quadrant {q}; use 1 to 4")))?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn run_sweep(cmd: SweepCmd, ctx: &Context) -> CliResult {
    let path = cmd.out.required()?.to_path_buf();
    if cmd.out.check {
        let (rows, v) = check::sweep(&path)?;
        return report_check("sweep", &path, rows, v);
    }
    let started = Instant::now();
    let spec = cmd.grid_spec()?;
    let output = sweep_grid(&spec, ctx.exec)?;
    write_csv(&path, |w| io::write_records(w, &output.records))?;
    print_summary(&output.summary.per_eps);
    let mut sidecar = Sidecar::new(started);
    sidecar.summary = json!({ "spec": spec, "per_eps": output.summary.per_eps });
    sidecar.write(&path, Command::Sweep(cmd), ctx)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SliceCmd {
    #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, default_value_t = -0.6, allow_hyphen_values = true)]
    pub y_min: f64,
    #[arg(long, default_value_t = 0.6, allow_hyphen_values = true)]
    pub y_max: f64,
    #[arg(long, default_value_t = 200)]
    pub ny: usize,
    #[arg(long, default_value_t = 0.0)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 51)]
    pub neps: usize,
    #[command(flatten)]
    pub classify: ClassifyOpts,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_slice(cmd: SliceCmd, ctx: &Context) -> CliResult {
    let path = cmd.out.required()?.to_path_buf();
    if cmd.out.check {
        let (rows, v) = check::slice(&path)?;
        return report_check("slice", &path, rows, v);
    }
    let started = Instant::now();
    let spec = cmd.classify.grid_spec()?;
    let y = Range::new(cmd.y_min, cmd.y_max, cmd.ny);
    let eps = Range::new(cmd.eps_min, cmd.eps_max, cmd.neps);
    let records = cross_section(cmd.delta, y, eps, &spec, ctx.exec)?;
    write_csv(&path, |w| io::write_records(w, &records))?;
    let per_eps = summarize(&records, &eps.values());
    print_summary(&per_eps);
    let mut sidecar = Sidecar::new(started);
    sidecar.summary = json!({ "spec": spec, "per_eps": per_eps });
    sidecar.write(&path, Command::Slice(cmd), ctx)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BinsCmd {
    /// Record CSVs from sweep or slice runs.
    #[arg(long = "input", short, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Side of the square frequency bins.
    #[arg(long, default_value_t = 0.01)]
    pub bin_size: f64,
    /// Report the number of bins whose largest eps exceeds this.
    #[arg(long, default_value_t = 0.02)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_bins(cmd: BinsCmd, ctx: &Context) -> CliResult {
    let path = cmd.out.required()?.to_path_buf();
    if cmd.out.check {
        let (rows, v) = check::bins(&path, cmd.bin_size)?;
        return report_check("bins", &path, rows, v);
    }
    let started = Instant::now();
    let mut records = Vec::new();
    for input in &cmd.inputs {
        records.extend(io::read_records(open(input)?)?);
    }
    let bins = critical_set_bins(&records, cmd.bin_size)?;
    write_csv(&path, |w| io::write_bins(w, bins.entries()))?;
    let above = bins.count_above(cmd.threshold);
    println!("{} occupied bins, {above} with eps_c > {}", bins.len(), cmd.threshold);
    let mut sidecar = Sidecar::new(started);
    sidecar.summary = json!({ "records": records.len(), "bins": bins.len(), "above_threshold": above });
    sidecar.write(&path, Command::Bins(cmd), ctx)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RefineCmd {
    /// Frequency region as a quadrant (1-4) of the unit square.
    #[arg(long, default_value_t = 2)]
    pub quadrant: u8,
    /// Frequency region w1min,w1max,w2min,w2max; overrides --quadrant.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub region: Option<Vec<f64>>,
    #[arg(long, default_value_t = RefineConfig::default().start_eps)]
    pub start_eps: f64,
    #[arg(long, default_value_t = RefineConfig::default().initial_d_eps)]
    pub d_eps: f64,
    /// Grid side while the (y, delta) spacing is coarse.
    #[arg(long, default_value_t = RefineConfig::default().coarse_n)]
    pub coarse_n: usize,
    /// Grid side once the spacing is below --switch-spacing.
    #[arg(long, default_value_t = RefineConfig::default().fine_n)]
    pub fine_n: usize,
    #[arg(long, default_value_t = RefineConfig::default().switch_spacing)]
    pub switch_spacing: f64,
    /// Stop once one torus is left in a (y, delta) box smaller than this.
    #[arg(long, default_value_t = RefineConfig::default().halt_extent)]
    pub halt_extent: f64,
    /// The final torus must be gone at eps_c + probe.
    #[arg(long, default_value_t = RefineConfig::default().probe)]
    pub probe: f64,
    #[arg(long, default_value_t = RefineConfig::default().max_iterations)]
    pub max_iterations: usize,
    #[command(flatten)]
    pub classify: ClassifyOpts,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_refine(cmd: RefineCmd, ctx: &Context) -> CliResult {
    let path = cmd.out.required()?.to_path_buf();
    if cmd.out.check {
        let (rows, v) = check::refine(&path)?;
        return report_check("refine", &path, rows, v);
    }
    let started = Instant::now();
    let region = match cmd.region.as_deref() {
        Some(&[a, b, c, d]) => OmegaBox::new(a, b, c, d),
        Some(_) => return Err(CliError::Usage("--region takes four values".into())),
        None => OmegaBox::quadrant(cmd.quadrant)
            .ok_or_else(|| CliError::Usage(format!("no quadrant {}; use 1 to 4", cmd.quadrant)))?,
    };
    let cfg = RefineConfig {
        start_eps: cmd.start_eps,
        initial_d_eps: cmd.d_eps,
        coarse_n: cmd.coarse_n,
        fine_n: cmd.fine_n,
        switch_spacing: cmd.switch_spacing,
        halt_extent: cmd.halt_extent,
        probe: cmd.probe,
        max_iterations: cmd.max_iterations,
    };
    let spec = cmd.classify.grid_spec()?;
    let peak = refine_peak(region, &spec, &cfg, ctx.exec)?;
    write_csv(&path, |w| io::write_refine_history(w, &peak.history))?;
    println!(
        "eps_c={:.10} omega=({:.10}, {:.10}) y={:.12} delta={:.12} dig={:.2} complete={} iterations={}",
        peak.eps_c, peak.omega.w1, peak.omega.w2, peak.y, peak.delta, peak.dig, peak.complete, peak.iterations
    );
    let mut sidecar = Sidecar::new(started);
    sidecar.summary = json!({ "spec": spec, "refine": cfg, "peak": peak });
    sidecar.write(&path, Command::Refine(cmd), ctx)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ContinueCmd {
    /// Rotation vector: a name such as spiral-a, D49 or D44-b, or w1,w2.
    #[arg(long, default_value = "spiral-a", allow_hyphen_values = true)]
    pub omega: String,
    /// Newton residual tolerance on |omega - omega*|.
    #[arg(long, default_value_t = SolverConfig::default().tolerance)]
    pub tolerance: f64,
    /// Finite-difference step of the Jacobian.
    #[arg(long, default_value_t = SolverConfig::default().fd_step)]
    pub fd_step: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iterations)]
    pub max_newton: usize,
    #[arg(long, default_value_t = StepControl::default().initial_step)]
    pub initial_step: f64,
    #[arg(long, default_value_t = StepControl::default().max_step)]
    pub max_step: f64,
    #[arg(long, default_value_t = CriticalConfig::default().eps_max)]
    pub eps_max: f64,
    /// Width of the final bracket around eps_c.
    #[arg(long, default_value_t = CriticalConfig::default().bracket_tolerance)]
    pub bracket: f64,
    /// Also count neighbouring tori that outlive this one.
    #[arg(long)]
    pub robust: bool,
    /// Neighbour window in omega1.
    #[arg(long, default_value_t = RobustnessConfig::default().window)]
    pub robust_window: f64,
    /// Neighbour spacing in omega1 (through y).
    #[arg(long, default_value_t = RobustnessConfig::default().spacing)]
    pub robust_spacing: f64,
    #[arg(long, default_value_t = RobustnessConfig::default().eps_spacing)]
    pub robust_eps_spacing: f64,
    #[arg(long, default_value_t = RobustnessConfig::default().eps_margin)]
    pub robust_eps_margin: f64,
    #[command(flatten)]
    pub classify: ClassifyOpts,
    #[command(flatten)]
    pub out: OutOpts,
}

impl ContinueCmd {
    pub fn critical_config(&self) -> CriticalConfig {
        let base = CriticalConfig::default();
        CriticalConfig {
            solver: SolverConfig {
                window: self.classify.window,
                fd_step: self.fd_step,
                tolerance: self.tolerance,
                max_iterations: self.max_newton,
                dig_cutoff: self.classify.dig_cutoff,
                map: self.classify.map.params(0.0, 0.0),
                ..base.solver
            },
            steps: StepControl {
                initial_step: self.initial_step,
                max_step: self.max_step,
                ..base.steps
            },
            eps_max: self.eps_max,
            bracket_tolerance: self.bracket,
            ..base
        }
    }
}

pub fn neighbors_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}-neighbors.csv"))
}

pub fn run_continue(cmd: ContinueCmd, ctx: &Context) -> CliResult {
    let path = cmd.out.required()?.to_path_buf();
    if cmd.out.check {
        let (rows, v) = check::path(&path)?;
        return report_check("continue", &path, rows, v);
    }
    let started = Instant::now();
    let (omega, label) = parse_omega(&cmd.omega)?;
    let cfg = cmd.critical_config();
    let critical = locate_critical_eps(omega, &cfg)?;
    write_csv(&path, |w| io::write_path(w, &critical.path))?;
    println!(
        "omega*={label} eps_c={:.9} bracket=[{:.9}, {:.9}] y={:.12} delta={:.12} failure={:?}{}",
        critical.eps_c,
        critical.bracket.0,
        critical.bracket.1,
        critical.y_c,
        critical.delta_c,
        critical.failure,
        if critical.non_monotone { " non-monotone" } else { "" }
    );
    let mut sidecar = Sidecar::new(started);
    let mut summary = json!({ "label": label, "config": cfg, "critical": {
        "omega_star": critical.omega_star,
        "eps_c": critical.eps_c,
        "y_c": critical.y_c,
        "delta_c": critical.delta_c,
        "dig_c": critical.dig_c,
        "bracket": critical.bracket,
        "failure": critical.failure,
        "non_monotone": critical.non_monotone,
    }});
    if cmd.robust {
        let rcfg = RobustnessConfig {
            window: cmd.robust_window,
            spacing: cmd.robust_spacing,
            eps_spacing: cmd.robust_eps_spacing,
            eps_margin: cmd.robust_eps_margin,
            spec: cmd.classify.grid_spec()?,
            ..RobustnessConfig::default()
        };
        let scan = local_robustness_scan(&critical, &rcfg, ctx.exec)?;
        let npath = neighbors_path(&path);
        write_csv(&npath, |w| io::write_neighbors(w, &scan.neighbors))?;
        println!("more robust neighbours: {}", scan.more_robust);
        summary["more_robust"] = json!(scan.more_robust);
        summary["neighbors"] = json!(scan.neighbors.len());
        sidecar.outputs.push(npath);
    }
    sidecar.summary = summary;
    sidecar.write(&path, Command::Continue(cmd), ctx)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ResorderCmd {
    /// Frequency vector: a name such as spiral-sq, D49 or D44-b, or w1,w2.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: String,
    /// Precisions, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [torus_core::resonance::CLASSIFICATION_RHO])]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = torus_core::resonance::DEFAULT_MAX_ORDER)]
    pub max_order: u64,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_resorder(cmd: ResorderCmd, ctx: &Context) -> CliResult {
    if cmd.out.check {
        let path = cmd.out.required()?;
        let (rows, v) = check::orders(path)?;
        return report_check("resorder", path, rows, v);
    }
    let started = Instant::now();
    let (omega, _) = parse_omega(&cmd.omega)?;
    let mut scanner = ResonanceScanner::new(omega);
    let results = scanner
        .orders(&cmd.rho, cmd.max_order)
        .into_iter()
        .collect::<torus_core::Result<Vec<_>>>()?;
    for r in &results {
        let line = format!("M={} m=({},{}) n={}", r.order, r.hit.m[0], r.hit.m[1], r.hit.n);
        if results.len() == 1 {
            println!("{line}");
        } else {
            println!("rho={:e} {line}", r.rho);
        }
    }
    if let Some(path) = cmd.out.out.clone() {
        write_csv(&path, |w| io::write_orders(w, &results))?;
        let mut sidecar = Sidecar::new(started);
        sidecar.summary = json!({ "omega": omega });
        sidecar.write(&path, Command::Resorder(cmd), ctx)?;
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct StatsCmd {
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Precisions, comma separated; the fitted line uses all of them.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_stats(cmd: StatsCmd, ctx: &Context) -> CliResult {
    let path = cmd.out.required()?.to_path_buf();
    if cmd.out.check {
        let (rows, v) = check::stats(&path)?;
        return report_check("stats", &path, rows, v);
    }
    let started = Instant::now();
    let stats = order_statistics(cmd.samples, &cmd.rho, cmd.seed, ctx.exec)?;
    write_csv(&path, |w| io::write_order_stats(w, &stats.rows))?;
    println!("rho,mean_log10_M,std_log10_M,max_M");
    for r in &stats.rows {
        println!("{:e},{:.4},{:.4},{}", r.rho, r.mean_log10_order, r.std_log10_order, r.max_order);
    }
    println!("slope={:.4} intercept={:.4}", stats.slope, stats.intercept);
    let mut sidecar = Sidecar::new(started);
    sidecar.seed = Some(cmd.seed);
    sidecar.summary = json!({ "slope": stats.slope, "intercept": stats.intercept });
    sidecar.write(&path, Command::Stats(cmd), ctx)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ApproxCmd {
    /// Cubic field: spiral, D31, D44 or D49.
    #[arg(long, conflicts_with = "omega")]
    pub field: Option<String>,
    /// Vector of the field (a, b, c, d, sq depending on the field).
    #[arg(long, requires = "field")]
    pub variant: Option<String>,
    /// Frequency vector by name or as w1,w2.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub qmax: u64,
    /// Precision to which omega is known; refuses scans it cannot support.
    #[arg(long)]
    pub rho_input: Option<f64>,
    #[command(flatten)]
    pub out: OutOpts,
}

pub(crate) fn resolve_vector(
    field: Option<&str>,
    variant: Option<&str>,
    omega: Option<&str>,
) -> Result<(torus_core::FrequencyVector, String, Option<torus_core::numtheory::FieldVector>), CliError> {
    match (field, omega) {
        (Some(f), _) => {
            let field: CubicField = f.parse().map_err(|e: torus_core::Error| CliError::Usage(e.to_string()))?;
            let v = cubic_field_vector(field, variant)?;
            Ok((v.omega, v.label(), Some(v)))
        }
        (None, Some(name)) => match named_vector(name) {
            Ok(v) => Ok((v.omega, v.label(), Some(v))),
            Err(_) => {
                let (w, label) = parse_omega(name)?;
                Ok((w, label, None))
            }
        },
        (None, None) => Err(CliError::Usage("give --field or --omega".into())),
    }
}

pub fn run_approx(cmd: ApproxCmd, ctx: &Context) -> CliResult {
    if cmd.out.check {
        let path = cmd.out.required()?;
        let (rows, v) = check::approximants(path)?;
        return report_check("approx", path, rows, v);
    }
    let started = Instant::now();
    let (omega, label, _) = resolve_vector(cmd.field.as_deref(), cmd.variant.as_deref(), cmd.omega.as_deref())?;
    let table = best_approximants_checked(omega, cmd.qmax, cmd.rho_input)?;
    println!("# {label}");
    println!("{:>8} {:>8} {:>8} {:>18} {:>18}", "q", "p1", "p2", "||q omega||", "c_s");
    for r in &table.records {
        println!("{:>8} {:>8} {:>8} {:>18.15} {:>18.15}", r.q, r.p[0], r.p[1], r.znorm, r.c_s);
    }
    if let Some(path) = cmd.out.out.clone() {
        write_csv(&path, |w| io::write_approximants(w, &table.records))?;
        let mut sidecar = Sidecar::new(started);
        sidecar.summary = json!({ "label": label, "omega": omega, "rows": table.records.len() });
        sidecar.write(&path, Command::Approx(cmd), ctx)?;
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct JpaCmd {
    /// Cubic field: spiral, D31, D44 or D49 (exact arithmetic).
    #[arg(long, conflicts_with = "omega")]
    pub field: Option<String>,
    #[arg(long, requires = "field")]
    pub variant: Option<String>,
    /// Frequency vector by name or as w1,w2.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<String>,
    /// Use floating point even for field vectors.
    #[arg(long)]
    pub float: bool,
    #[arg(long, default_value_t = FLOAT_MAX_STEPS)]
    pub max_steps: usize,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_jpa(cmd: JpaCmd, ctx: &Context) -> CliResult {
    if cmd.out.check {
        let path = cmd.out.required()?;
        let (rows, v) = check::jpa(path)?;
        return report_check("jpa", path, rows, v);
    }
    let started = Instant::now();
    let (omega, label, exact) = resolve_vector(cmd.field.as_deref(), cmd.variant.as_deref(), cmd.omega.as_deref())?;
    let (expansion, mode) = match exact.filter(|_| !cmd.float) {
        Some(v) => {
            let e = jpa_expand_exact(&v.exact, cmd.max_steps.max(torus_core::numtheory::jpa::EXACT_MAX_STEPS))?;
            if e.is_periodic() && !verify_period(&v.exact, &e)? {
                return Err(CliError::Numeric("period failed re-verification".into()));
            }
            (e, "exact")
        }
        None => (jpa_expand_float(omega, cmd.max_steps)?, "float"),
    };
    let status = if expansion.terminated {
        "terminated"
    } else if expansion.is_periodic() {
        "periodic"
    } else {
        "no period found"
    };
    println!("{expansion} {status}");
    log::info!("{label}: {mode} expansion");
    if let Some(d) = &expansion.diagnostic {
        log::warn!("{d}");
    }
    if let Some(path) = cmd.out.out.clone() {
        write_csv(&path, |w| io::write_jpa(w, &expansion))?;
        let mut sidecar = Sidecar::new(started);
        sidecar.summary = json!({
            "label": label,
            "mode": mode,
            "expansion": expansion.to_string(),
            "status": status,
            "preperiod_len": expansion.preperiod_len,
            "period_len": expansion.period_len,
        });
        sidecar.write(&path, Command::Jpa(cmd), ctx)?;
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BasisCmd {
    #[arg(long, default_value = "spiral")]
    pub field: String,
    /// Generators per random SL(3,Z) word.
    #[arg(long, default_value_t = 20)]
    pub word_length: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutOpts,
}

pub fn run_basis(cmd: BasisCmd, ctx: &Context) -> CliResult {
    if cmd.out.check {
        let path = cmd.out.required()?;
        let (rows, v) = check::bases(path)?;
        return report_check("basis", path, rows, v);
    }
    let started = Instant::now();
    let field: CubicField = cmd
        .field
        .parse()
        .map_err(|e: torus_core::Error| CliError::Usage(e.to_string()))?;
    let bases = random_integral_bases(field, cmd.word_length, cmd.count, cmd.seed, ctx.exec)?;
    for (i, b) in bases.iter().enumerate() {
        println!("{i} ({:.15}, {:.15})", b.omega.w1, b.omega.w2);
    }
    if let Some(path) = cmd.out.out.clone() {
        write_csv(&path, |w| io::write_bases(w, &bases))?;
        let mut sidecar = Sidecar::new(started);
        sidecar.seed = Some(cmd.seed);
        sidecar.summary = json!({ "field": field.name() });
        sidecar.write(&path, Command::Basis(cmd), ctx)?;
    }
    Ok(())
}
