//! Commands behind the `solver` binary: `run`, `compare` and `mesh-info`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::mesh::{MeshMode, TagKind};
use crate::postproc::{export_fields, max_in_region, profile_error, relative_error, sample_line, LineProfile, TimeSeries};
use crate::solver::{run_transient_with, Problem, TransientState};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_THRESHOLD: i32 = 3;

pub const MANIFEST: &str = "manifest.json";
pub const TIME_SERIES: &str = "timeseries.csv";

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io { .. } | Error::MshParse { .. } | Error::Geometry(_) | Error::Material(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_SOLVER,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub mode: MeshMode,
    pub config_hash: String,
    pub geometry_hash: String,
    pub threshold: f64,
    pub wall_clock_s: f64,
    pub files: Vec<String>,
}

/// Results of one simulation kept in memory.
#[derive(Debug)]
pub struct Simulation {
    pub problem: Problem,
    pub series: TimeSeries,
    pub profiles: Vec<(f64, LineProfile)>,
    pub last: TransientState,
}

fn step_index(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Runs `cfg` in `mode`; `on_output` sees each state selected for VTK
/// export.
pub fn simulate(
    cfg: &ProblemConfig,
    mode: MeshMode,
    mut on_output: impl FnMut(&Problem, &TransientState) -> Result<()>,
) -> Result<Simulation> {
    let problem = cfg.build_problem(mode)?;
    let mesh = problem.mesh();
    let dt = cfg.solver.dt;
    let y = cfg.profile_y(mesh);
    let profile_steps: Vec<usize> = cfg.output.profile_times.iter().map(|&t| step_index(t, dt)).collect();
    let vtk_steps: Vec<usize> = cfg.output.vtk_times.iter().map(|&t| step_index(t, dt)).collect();
    let mut series = TimeSeries::new(&cfg.output.monitor);
    let mut profiles = Vec::new();
    let mut last = None;
    run_transient_with(&problem, &cfg.solver, |state| {
        let k = step_index(state.time, dt);
        let vol = problem.volume_values(&state.values);
        let maxima = cfg.output.monitor.iter().map(|r| max_in_region(mesh, vol, r)).collect::<Result<Vec<_>>>()?;
        series.push(state.time, maxima, state.diagnostics.picard_iters)?;
        if profile_steps.contains(&k) {
            profiles.push((state.time, sample_line(&problem, &state.values, y, cfg.output.profile_samples)?));
        }
        if vtk_steps.contains(&k) {
            on_output(&problem, state)?;
        }
        last = Some(state.clone());
        Ok(())
    })?;
    let last = last.expect("the initial state is always observed");
    Ok(Simulation { problem, series, profiles, last })
}

fn profile_name(t: f64) -> String {
    format!("profile_t{t:.4}.csv")
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::Config(format!("output directory {} is busy ({e})", dir.display())))?;
        Ok(Lock(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp, text)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub mode: Option<MeshMode>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
}

/// `solver run`: simulates and writes the time series, profiles, VTK
/// fields, the resolved configuration and a manifest.
pub fn cmd_run(opts: &RunOptions) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfg = ProblemConfig::load(&opts.config, &opts.overrides)?;
    if let Some(mode) = opts.mode {
        cfg.mode = mode;
    }
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let _lock = Lock::acquire(&dir)?;
    log::info!("running {} in {} mode, output in {}", opts.config.display(), cfg.mode, dir.display());
    let mut files = Vec::new();
    let sim = simulate(&cfg, cfg.mode, |problem, state| {
        let path = dir.join(format!("field_t{:.4}.vtk", state.time));
        for p in export_fields(problem, &state.values, &path)? {
            files.push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
        Ok(())
    })?;
    write(&dir.join(TIME_SERIES), &sim.series.to_csv())?;
    files.push(TIME_SERIES.into());
    for (t, prof) in &sim.profiles {
        let name = profile_name(*t);
        write(&dir.join(&name), &prof.to_csv())?;
        files.push(name);
    }
    write(&dir.join("config.toml"), &cfg.to_toml()?)?;
    files.push("config.toml".into());
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        mode: cfg.mode,
        config_hash: cfg.hash()?,
        geometry_hash: cfg.geometry_hash()?,
        threshold: cfg.output.threshold,
        wall_clock_s: start.elapsed().as_secs_f64(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Postproc(e.to_string()))?;
    write_atomic(&dir.join(MANIFEST), &json)?;
    log::info!("finished in {:.2} s", manifest.wall_clock_s);
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Largest relative error of each monitored maximum over time.
    pub series_errors: Vec<(String, f64)>,
    /// Largest relative error along each common control-line profile.
    pub profile_errors: Vec<(String, f64)>,
    pub threshold: f64,
    pub max_error: f64,
    pub passed: bool,
}

impl CompareReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (n, e) in &self.series_errors {
            let _ = writeln!(out, "max relative error of {n}: {e:.6e}");
        }
        for (n, e) in &self.profile_errors {
            let _ = writeln!(out, "control-line max relative error ({n}): {e:.6e}");
        }
        let verdict = if self.passed { "within" } else { "exceeds" };
        let _ = writeln!(out, "overall {:.6e} {verdict} threshold {:.3e}", self.max_error, self.threshold);
        out
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `solver compare`: relative errors of run `a` against reference run
/// `b`. Writes `compare_errors.csv` and `compare_summary.txt` into `out`
/// when given; the run directories are only read.
pub fn cmd_compare(a: &Path, b: &Path, threshold: Option<f64>, out: Option<&Path>) -> Result<CompareReport> {
    let (ma, mb) = (read_manifest(a)?, read_manifest(b)?);
    if ma.geometry_hash != mb.geometry_hash {
        return Err(Error::Config(format!(
            "incompatible runs: geometry hash {} differs from {}",
            &ma.geometry_hash[..12],
            &mb.geometry_hash[..12]
        )));
    }
    let sa = TimeSeries::from_csv(&read_text(&a.join(TIME_SERIES))?)?;
    let sb = TimeSeries::from_csv(&read_text(&b.join(TIME_SERIES))?)?;
    if sa.times.len() != sb.times.len() || sa.times.iter().zip(&sb.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::Config("incompatible runs: time grids differ".into()));
    }
    let mut csv = String::from("time");
    let mut columns = Vec::new();
    let mut series_errors = Vec::new();
    for name in &sa.names {
        let Some(col_b) = sb.column(name) else { continue };
        let err = relative_error(&sa.column(name).unwrap(), &col_b)?;
        series_errors.push((name.clone(), err.iter().copied().fold(0.0, f64::max)));
        let _ = write!(csv, ",rel_err_{name}");
        columns.push(err);
    }
    if columns.is_empty() {
        return Err(Error::Config("runs share no monitored quantity".into()));
    }
    csv.push('\n');
    for (k, t) in sa.times.iter().enumerate() {
        let _ = write!(csv, "{t:.16e}");
        for c in &columns {
            let _ = write!(csv, ",{:.16e}", c[k]);
        }
        csv.push('\n');
    }
    let mut profile_errors = Vec::new();
    for f in ma.files.iter().filter(|f| f.starts_with("profile_t") && mb.files.contains(*f)) {
        let pa = LineProfile::from_csv(&read_text(&a.join(f))?)?;
        let pb = LineProfile::from_csv(&read_text(&b.join(f))?)?;
        profile_errors.push((f.clone(), profile_error(&pa, &pb)?));
    }
    let threshold = threshold.unwrap_or(ma.threshold);
    let max_error = series_errors.iter().chain(&profile_errors).map(|(_, e)| *e).fold(0.0, f64::max);
    let report = CompareReport { series_errors, profile_errors, threshold, max_error, passed: max_error <= threshold };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("compare_errors.csv"), &csv)?;
        write(&dir.join("compare_summary.txt"), &report.summary())?;
    }
    Ok(report)
}

/// `solver mesh-info`: mesh, trace and DoF statistics.
pub fn cmd_mesh_info(config: &Path, mode: Option<MeshMode>, overrides: &[String]) -> Result<String> {
    let cfg = ProblemConfig::load(config, overrides)?;
    let mode = mode.unwrap_or(cfg.mode);
    let problem = cfg.build_problem(mode)?;
    Ok(mesh_info(&problem, mode))
}

pub fn mesh_info(problem: &Problem, mode: MeshMode) -> String {
    let mesh = problem.mesh();
    let mut out = String::new();
    let _ = writeln!(out, "mode: {mode}");
    let _ = writeln!(out, "nodes: {}", mesh.nodes().len());
    let _ = writeln!(out, "triangles: {}", mesh.triangles().len());
    for (tag, count) in mesh.region_counts() {
        let name = mesh.tags().name(TagKind::Region, tag).unwrap_or("?");
        let _ = writeln!(out, "region {name}: {} nodes, {count} triangles", mesh.region_nodes(tag).len());
    }
    for iface in problem.interfaces() {
        let _ = writeln!(
            out,
            "interface {}: side1 {} nodes, side2 {} nodes, shell {} nodes x {} sheets",
            iface.name,
            iface.traces.side1.len(),
            iface.traces.side2.len(),
            iface.traces.gamma_hat.len(),
            iface.stack.sheets()
        );
    }
    let dofs = problem.dofs();
    let _ = writeln!(out, "dofs volume: {}", dofs.n_volume());
    let _ = writeln!(out, "dofs sheet: {}", dofs.n_sheet_dofs());
    let _ = writeln!(out, "dofs multiplier: {}", dofs.n_multipliers());
    let _ = writeln!(out, "dofs dirichlet: {}", dofs.dirichlet_count());
    let _ = writeln!(out, "dofs total: {}", dofs.total());
    out
}
