//! End-to-end checks of the `solver` binary: outputs and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mortar_tsa::postproc::{read_vtk_point_data, LineProfile, TimeSeries};

const SMALL: &str = r#"
mode = "mortar_tsa"
[geometry]
kind = "two_blocks"
h_left = 0.25
h_right = 0.1
[geometry.two_blocks]
width_left = 1.0
width_right = 1.0
height = 1.0
layer = 0.1
[materials.metal]
kappa_table = [[2.0, 50.0], [20.0, 300.0]]
c_v_table = [[2.0, 100.0], [20.0, 2000.0]]
[materials.film]
kappa = 0.05
c_v = 800.0
[[regions]]
name = "left"
material = "metal"
source = 2000.0
[[regions]]
name = "right"
material = "metal"
[[boundaries]]
curve = "right"
kind = "robin"
h = 100.0
t_ref = 4.2
[[boundaries]]
curve = "left"
kind = "adiabatic"
[[boundaries]]
curve = "top"
kind = "adiabatic"
[[boundaries]]
curve = "bottom"
kind = "adiabatic"
[[tsa]]
layer = "interface"
layers = 2
material = "film"
[solver]
dt = 0.1
t_end = 1.0
t0 = 4.2
[output]
profile_times = [0.5, 1.0]
vtk_times = [1.0]
monitor = ["left", "right"]
threshold = 1e-3
"#;

fn solver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solver")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("case.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    solver(&args)
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("tsa");
    let result = run(&config, &out, &[]);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));

    let series = TimeSeries::from_csv(&fs::read_to_string(out.join("timeseries.csv")).unwrap()).unwrap();
    assert_eq!(series.times.len(), 11);
    assert_eq!(series.names, vec!["T_max_left", "T_max_right"]);
    let left = series.column("T_max_left").unwrap();
    assert!(left.windows(2).all(|w| w[1] > w[0]), "heated block warms up: {left:?}");

    for t in ["0.5000", "1.0000"] {
        let profile = LineProfile::from_csv(&fs::read_to_string(out.join(format!("profile_t{t}.csv"))).unwrap()).unwrap();
        assert!(profile.volume_samples().count() > 100);
    }
    let (n, values) = read_vtk_point_data(&fs::read_to_string(out.join("field_t1.0000.vtk")).unwrap()).unwrap();
    assert_eq!(values.len(), n);
    for j in 0..3 {
        assert!(out.join(format!("field_t1.0000_interface_sheet{j}.vtk")).exists());
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "mortar_tsa");
    assert!(out.join("config.toml").exists());
    assert!(!out.join(".lock").exists());
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run(&config, &a, &[])), 0);
    assert_eq!(code(&run(&config, &b, &["--override", "geometry.h_left=0.1"])), 0);
    let (sa, sb) = (a.to_str().unwrap(), b.to_str().unwrap());
    let report = dir.path().join("report");

    let same = solver(&["compare", sa, sa, "--threshold", "0", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&same), 0, "{}", String::from_utf8_lossy(&same.stdout));
    assert!(report.join("compare_errors.csv").exists());
    assert!(report.join("compare_summary.txt").exists());

    let strict = solver(&["compare", sa, sb, "--threshold", "0"]);
    assert_eq!(code(&strict), 3);
    let loose = solver(&["compare", sa, sb, "--threshold", "0.5"]);
    assert_eq!(code(&loose), 0);
    // Compare never writes into the run directories.
    assert!(!a.join("compare_errors.csv").exists());
}

#[test]
fn compare_rejects_different_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run(&config, &a, &["--override", "solver.t_end=0.2"])), 0);
    let over = ["--override", "solver.t_end=0.2", "--override", "geometry.two_blocks.height=0.8"];
    assert_eq!(code(&run(&config, &b, &over)), 0);
    let result = solver(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&result), 1);
    assert!(String::from_utf8_lossy(&result.stderr).contains("geometry"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = write_config(dir.path(), &SMALL.replace("material = \"film\"", "material = \"vibranium\""));
    let result = run(&missing, &out, &[]);
    assert_eq!(code(&result), 1);
    assert!(String::from_utf8_lossy(&result.stderr).contains("vibranium"));

    let config = write_config(dir.path(), SMALL);
    assert_eq!(code(&run(&config, &out, &["--override", "solver.dt=-1"])), 1);
    assert_eq!(code(&run(&config, &out, &["--override", "no_such_key=3"])), 1);
    assert_eq!(code(&solver(&["run", "--config", "/nonexistent/case.toml"])), 1);
    assert_eq!(code(&solver(&["run", "--config", &config, "--mode", "sideways"])), 1);
    assert_eq!(code(&solver(&["frobnicate"])), 1);
}

#[test]
fn picard_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let result = run(&config, &dir.path().join("out"), &["--override", "solver.picard_max_iters=1"]);
    assert_eq!(code(&result), 2, "{}", String::from_utf8_lossy(&result.stderr));
}

#[test]
fn mesh_info_reports_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/magnet.toml")).unwrap());
    for mode in ["mortar_tsa", "reference"] {
        let result = solver(&["mesh-info", "--config", &config, "--mode", mode]);
        assert_eq!(code(&result), 0);
        let text = String::from_utf8_lossy(&result.stdout);
        assert!(text.contains("nodes"), "{text}");
    }
}
