//! Acceptance criteria. Each check prints one PASS/FAIL line; the process
//! fails if any check fails.

use std::fs;
use std::time::Instant;

use mortar_tsa::cli::{cmd_run, simulate, RunOptions};
use mortar_tsa::config::ProblemConfig;
use mortar_tsa::mesh::{MeshMode, TraceMesh, TraceSide};
use mortar_tsa::mortar::{coupling_matrix, MultiplierSpace};
use mortar_tsa::postproc::{region_tag, relative_error};
use mortar_tsa::solver::{energy_balance, run_transient, run_transient_with, solve_steady, Problem, TransientConfig};

const MAGNET: &str = include_str!("../examples/magnet.toml");

/// Constant properties close to the presets at 6 K.
const LINEAR_MATERIALS: [&str; 3] = [
    "materials.cable.preset=constant(450, 3500)",
    "materials.kapton.preset=constant(0.016, 3500)",
    "materials.steel.preset=constant(0.42, 24000)",
];

struct Outcome {
    passed: bool,
    detail: String,
}

type Check = fn() -> Result<Outcome, String>;

fn main() {
    // Name, check and runtime limit in seconds.
    let checks: [(&str, Check, Option<f64>); 8] = [
        ("AC1 conformal equivalence", conformal_equivalence, Some(5.0)),
        ("AC2 composite slab", composite_slab, Some(1.0)),
        ("AC3 patch test", patch_test, Some(5.0)),
        ("AC4 magnet two-mode study", magnet_study, Some(120.0)),
        ("AC5 mortar integration exactness", mortar_exactness, Some(5.0)),
        ("AC6 discrete energy balance", energy_conservation, Some(60.0)),
        ("AC7 time convergence", time_convergence, Some(120.0)),
        ("AC8 determinism", determinism, None),
    ];
    // Optional name filters, e.g. `cargo test --test acceptance -- AC5`.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, check, limit) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let budget = limit.map_or(String::new(), |l| format!(", limit {l} s"));
        match result {
            Ok(o) => {
                let passed = o.passed && in_time;
                let verdict = if passed { "PASS" } else { "FAIL" };
                println!("{verdict} {name}: {} ({secs:.2} s{budget})", o.detail);
                failures += usize::from(!passed);
            }
            Err(e) => {
                println!("FAIL {name}: error: {e} ({secs:.2} s{budget})");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance check(s) failed");
        std::process::exit(1);
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn outcome(passed: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { passed, detail })
}

/// Max over entries of `|a - b| / |b|`.
fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1e-300)).fold(0.0, f64::max)
}

/// Volume temperatures followed by every sheet value.
fn nodal_values(p: &Problem, x: &[f64]) -> Vec<f64> {
    let mut v = p.volume_values(x).to_vec();
    for i in 0..p.interfaces().len() {
        for sheet in p.sheet_values(x, i) {
            v.extend(sheet);
        }
    }
    v
}

fn two_blocks(body: &str) -> String {
    format!(
        r#"
        mode = "mortar_tsa"
        [geometry]
        kind = "two_blocks"
        {body}
        [output]
        monitor = ["left", "right"]
        "#
    )
}

fn conformal_equivalence() -> Result<Outcome, String> {
    let base = two_blocks(
        r#"
        h_left = 0.1
        h_right = 0.1
        [geometry.two_blocks]
        width_left = 1.0
        width_right = 1.0
        height = 1.0
        layer = 0.1
        [materials.a]
        kappa = 2.0
        c_v = 1000.0
        [materials.b]
        kappa = 5.0
        c_v = 2000.0
        [materials.shell]
        kappa = 0.3
        c_v = 500.0
        [[regions]]
        name = "left"
        material = "a"
        source = 1000.0
        [[regions]]
        name = "right"
        material = "b"
        [[boundaries]]
        curve = "left"
        kind = "dirichlet"
        value = 10.0
        [[boundaries]]
        curve = "right"
        kind = "robin"
        h = 50.0
        t_ref = 4.2
        [[boundaries]]
        curve = "bottom"
        kind = "adiabatic"
        [[boundaries]]
        curve = "top"
        kind = "adiabatic"
        [[tsa]]
        layer = "interface"
        layers = 3
        material = "shell"
        [solver]
        dt = 0.05
        t_end = 0.5
        t0 = 4.2
        "#,
    );
    let solve = |eliminate: Option<&str>| -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
        let over: Vec<String> = eliminate.map(|s| format!("tsa.0.eliminate={s}")).into_iter().collect();
        let cfg = ProblemConfig::from_toml_with(&base, &over).map_err(fail)?;
        let p = cfg.build_problem(MeshMode::MortarTsa).map_err(fail)?;
        let steady = solve_steady(&p, 4.2, 1e-12, 5).map_err(fail)?;
        let states = run_transient(&p, &cfg.solver).map_err(fail)?;
        Ok((nodal_values(&p, &steady), states.iter().map(|s| nodal_values(&p, &s.values)).collect()))
    };
    let (mortar_steady, mortar_states) = solve(None)?;
    let mut worst: f64 = 0.0;
    for side in ["side1", "side2"] {
        let (steady, states) = solve(Some(side))?;
        worst = worst.max(max_rel_diff(&mortar_steady, &steady));
        for (a, b) in mortar_states.iter().zip(&states) {
            worst = worst.max(max_rel_diff(a, b));
        }
    }
    outcome(worst < 1e-10, format!("max nodal relative difference {worst:.2e} (limit 1e-10)"))
}

fn composite_slab() -> Result<Outcome, String> {
    let (t_left, t_right) = (10.0, 4.0);
    let (w_left, w_right, k_left, k_right) = (1.0, 1.0, 2.0, 3.0);
    let d = [0.02, 0.05, 0.03];
    let k = [0.5, 0.1, 1.0];
    let text = two_blocks(&format!(
        r#"
        h_left = 0.25
        h_right = 0.2
        [geometry.two_blocks]
        width_left = {w_left}
        width_right = {w_right}
        height = 1.0
        layer = 0.1
        [materials.a]
        kappa = {k_left}
        c_v = 1.0
        [materials.b]
        kappa = {k_right}
        c_v = 1.0
        [materials.s0]
        kappa = {}
        c_v = 1.0
        [materials.s1]
        kappa = {}
        c_v = 1.0
        [materials.s2]
        kappa = {}
        c_v = 1.0
        [[regions]]
        name = "left"
        material = "a"
        [[regions]]
        name = "right"
        material = "b"
        [[boundaries]]
        curve = "left"
        kind = "dirichlet"
        value = {t_left}
        [[boundaries]]
        curve = "right"
        kind = "dirichlet"
        value = {t_right}
        [[boundaries]]
        curve = "bottom"
        kind = "adiabatic"
        [[boundaries]]
        curve = "top"
        kind = "adiabatic"
        [[tsa]]
        layer = "interface"
        thicknesses = [{}, {}, {}]
        materials = ["s0", "s1", "s2"]
        "#,
        k[0], k[1], k[2], d[0], d[1], d[2]
    ));
    let cfg = ProblemConfig::from_toml(&text).map_err(fail)?;
    let p = cfg.build_problem(MeshMode::MortarTsa).map_err(fail)?;
    let x = solve_steady(&p, 5.0, 1e-12, 5).map_err(fail)?;

    // Series thermal resistance of the two blocks and the three layers.
    let resistance = w_left / k_left + d.iter().zip(&k).map(|(d, k)| d / k).sum::<f64>() + w_right / k_right;
    let q = (t_left - t_right) / resistance;
    let mut exact = vec![t_left - q * w_left / k_left];
    for (d, k) in d.iter().zip(&k) {
        exact.push(exact.last().unwrap() - q * d / k);
    }
    let sheets = p.sheet_values(&x, 0);
    let mut worst: f64 = 0.0;
    for (j, sheet) in sheets.iter().enumerate() {
        for v in sheet {
            worst = worst.max((v - exact[j]).abs() / exact[j].abs());
        }
    }
    let x_right = w_left + d.iter().sum::<f64>();
    for (node, v) in p.mesh().nodes().iter().zip(p.volume_values(&x)) {
        let e = if node[0] <= w_left + 1e-12 {
            t_left - q * node[0] / k_left
        } else {
            exact[3] - q * (node[0] - x_right) / k_right
        };
        worst = worst.max((v - e).abs() / e.abs());
    }
    outcome(worst < 1e-10, format!("max relative error vs series resistance {worst:.2e} (limit 1e-10)"))
}

fn patch_test() -> Result<Outcome, String> {
    let (t0, gx, gy) = (5.0, 2.0, 3.0);
    let bc = |curve: &str| {
        format!(
            "[[boundaries]]\ncurve = \"{curve}\"\nkind = \"dirichlet\"\nvalue = {{ t0 = {t0}, gx = {gx}, gy = {gy} }}\n"
        )
    };
    let bcs: String = ["left", "right", "bottom", "top", "cap_bottom", "cap_top"].iter().map(|c| bc(c)).collect();
    let text = two_blocks(&format!(
        r#"
        h_left = 0.25
        h_right = 0.1
        [geometry.two_blocks]
        width_left = 1.0
        width_right = 1.0
        height = 1.0
        layer = 0.1
        [materials.m]
        kappa = 1.7
        c_v = 1.0
        [[regions]]
        name = "left"
        material = "m"
        [[regions]]
        name = "right"
        material = "m"
        [[tsa]]
        layer = "interface"
        layers = 3
        material = "m"
        {bcs}
        "#
    ));
    let cfg = ProblemConfig::from_toml(&text).map_err(fail)?;
    let p = cfg.build_problem(MeshMode::MortarTsa).map_err(fail)?;
    let iface = &p.interfaces()[0];
    let (n1, n2) = (iface.external(0).len(), iface.external(1).len());
    let x = solve_steady(&p, 5.0, 1e-12, 5).map_err(fail)?;
    let exact = |q: [f64; 2]| t0 + gx * q[0] + gy * q[1];
    let mut worst: f64 = 0.0;
    for (node, v) in p.mesh().nodes().iter().zip(p.volume_values(&x)) {
        worst = worst.max((v - exact(*node)).abs() / exact(*node).abs());
    }
    for (j, sheet) in p.sheet_values(&x, 0).iter().enumerate() {
        for (k, v) in sheet.iter().enumerate() {
            let e = exact(iface.sheet_point(j, k));
            worst = worst.max((v - e).abs() / e.abs());
        }
    }
    outcome(
        n1 != n2 && worst < 1e-10,
        format!("trace nodes {n1}/{n2}, max relative error {worst:.2e} (limit 1e-10)"),
    )
}

fn magnet_study() -> Result<Outcome, String> {
    let cfg = ProblemConfig::from_toml(MAGNET).map_err(fail)?;
    let tsa = simulate(&cfg, MeshMode::MortarTsa, |_, _| Ok(())).map_err(fail)?;
    let reference = simulate(&cfg, MeshMode::Reference, |_, _| Ok(())).map_err(fail)?;

    // (a) monotone rise toward a plateau.
    let right = tsa.series.column("T_max_right_cable").ok_or("missing right cable column")?;
    let monotone = right.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let rise = right.last().unwrap() - right[0];
    let tail = right.len() / 10;
    let late_rise = right.last().unwrap() - right[right.len() - 1 - tail];
    let plateau = rise > 0.0 && late_rise < 0.02 * rise;

    // (b) two-mode relative error of every monitored maximum.
    let mut series_error: f64 = 0.0;
    for name in &tsa.series.names {
        let a = tsa.series.column(name).ok_or("missing column")?;
        let b = reference.series.column(name).ok_or("missing column")?;
        series_error = series_error.max(relative_error(&a, &b).map_err(fail)?.into_iter().fold(0.0, f64::max));
    }

    // (c) near-isothermal cables, dominant drop across the insulation.
    let (_, profile) = tsa.profiles.last().ok_or("no profile written")?;
    let mesh = tsa.problem.mesh();
    let left = profile.variation(region_tag(mesh, "left_cable").map_err(fail)?).ok_or("no left cable samples")?;
    let right_var = profile.variation(region_tag(mesh, "right_cable").map_err(fail)?).ok_or("no right cable samples")?;
    let sheets = tsa.problem.sheet_values(&tsa.last.values, 0);
    let y = cfg.profile_y(mesh);
    let gamma = &tsa.problem.interfaces()[0].traces.gamma_hat;
    let k = (0..gamma.len())
        .min_by(|&a, &b| (gamma.points[a][1] - y).abs().total_cmp(&(gamma.points[b][1] - y).abs()))
        .unwrap();
    let drop = (sheets[0][k] - sheets[sheets.len() - 1][k]).abs();
    let isothermal = left.max(right_var) < 0.1 * drop;

    outcome(
        monotone && plateau && series_error < 2e-3 && isothermal,
        format!(
            "monotone {monotone}, last-10% rise {:.2}% of total, max T_max error {series_error:.2e} (limit 2e-3), \
             cable variation {:.3}/{:.3} K vs insulation drop {drop:.3} K",
            100.0 * late_rise / rise,
            left,
            right_var
        ),
    )
}

struct XorShift(u64);

impl XorShift {
    fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize
    }
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// Random partition of `[0, n_units * UNIT]` along an axis-aligned line.
/// Breakpoints and coordinates are dyadic with at most 26 significant bits,
/// so arc lengths and overlaps are exact and the comparison measures only
/// quadrature and summation error.
fn random_trace(rng: &mut XorShift, n_units: u64, origin: [f64; 2], dir: [f64; 2]) -> TraceMesh {
    const UNIT: f64 = 1.0 / (1u64 << 30) as f64;
    let n = 2 + rng.below(40);
    let mut units: Vec<u64> = (0..n - 1).map(|_| 1 + (rng.next_f64() * (n_units - 1) as f64) as u64).collect();
    units.push(0);
    units.push(n_units);
    units.sort_unstable();
    units.dedup();
    let points = units.iter().map(|&u| [origin[0] + u as f64 * UNIT * dir[0], origin[1] + u as f64 * UNIT * dir[1]]).collect();
    TraceMesh::from_points(0, (0..units.len()).collect(), points, TraceSide::External1).unwrap()
}

/// Sum with Neumaier compensation.
#[derive(Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        self.comp += if self.sum.abs() >= v.abs() { (self.sum - t) + v } else { (v - t) + self.sum };
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Hat function of node `j` of the partition `nodes` at the point of the
/// sub-interval `[a, b]` that lies `before` past `a` and `after` short of
/// `b`. The sub-interval must not straddle a node.
fn hat(nodes: &[f64], j: usize, a: f64, b: f64, before: f64, after: f64) -> f64 {
    if j > 0 && nodes[j - 1] <= a && b <= nodes[j] {
        ((a - nodes[j - 1]) + before) / (nodes[j] - nodes[j - 1])
    } else if j + 1 < nodes.len() && nodes[j] <= a && b <= nodes[j + 1] {
        ((nodes[j + 1] - b) + after) / (nodes[j + 1] - nodes[j])
    } else {
        0.0
    }
}

fn mortar_exactness() -> Result<Outcome, String> {
    let mut rng = XorShift(0x9e37_79b9_7f4a_7c15);
    let (gl_x, gl_w) = gauss_legendre(64);
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for case in 0..50 {
        // Lengths between 1 mm and about 60 mm.
        let n_units = (1u64 << 20) + (rng.next_f64() * (1u64 << 26) as f64) as u64;
        let dir = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]][rng.below(4)];
        let origin = [rng.below(1 << 20) as f64 / (1u64 << 24) as f64, rng.below(1 << 20) as f64 / (1u64 << 24) as f64];
        let carrier = random_trace(&mut rng, n_units, origin, dir);
        let trace = random_trace(&mut rng, n_units, origin, dir);
        let (sa, sb) = (carrier.s.clone(), trace.s.clone());
        let merge = [case % 4 == 1 || case % 4 == 3, case % 4 >= 2];
        let space = MultiplierSpace::new(carrier, 0).with_merged_ends(merge);
        if space.dim() == 0 {
            continue;
        }
        let d = coupling_matrix(&space, &trace).map_err(fail)?;

        // Oracle basis: hats of the carrier, end hats folded into their neighbours.
        let m = sa.len();
        let owner = |k: usize| -> usize {
            let mut i = k;
            if merge[0] && k > 0 {
                i -= 1;
            }
            if merge[1] && k == m - 1 {
                i -= 1;
            }
            i
        };
        let mut breaks: Vec<f64> = sa.iter().chain(&sb).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut oracle: Vec<Vec<Compensated>> =
            (0..space.dim()).map(|_| (0..sb.len()).map(|_| Compensated::default()).collect()).collect();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-15 {
                continue;
            }
            for (x, wt) in gl_x.iter().zip(&gl_w) {
                let half = 0.5 * (b - a);
                let (before, after) = (half * (1.0 + x), half * (1.0 - x));
                let jac = half * wt;
                for k in 0..m {
                    let mu = hat(&sa, k, a, b, before, after);
                    if mu == 0.0 {
                        continue;
                    }
                    for (j, entry) in oracle[owner(k)].iter_mut().enumerate() {
                        entry.add(jac * mu * hat(&sb, j, a, b, before, after));
                    }
                }
            }
        }
        for (i, row) in oracle.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                let (e, got) = (entry.value(), d.get(i, j));
                if e == 0.0 && got == 0.0 {
                    continue;
                }
                entries += 1;
                worst = worst.max((got - e).abs() / e.abs());
            }
        }
    }
    outcome(
        worst < 1e-14,
        format!("50 trace pairs, {entries} nonzero entries, max entrywise relative error {worst:.2e} (limit 1e-14)"),
    )
}

fn linear_magnet(extra: &[&str]) -> Result<ProblemConfig, String> {
    let over: Vec<String> = LINEAR_MATERIALS.iter().chain(extra).map(|s| s.to_string()).collect();
    ProblemConfig::from_toml_with(MAGNET, &over).map_err(fail)
}

fn energy_conservation() -> Result<Outcome, String> {
    let cfg = linear_magnet(&[])?;
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for mode in [MeshMode::MortarTsa, MeshMode::Reference] {
        let p = cfg.build_problem(mode).map_err(fail)?;
        if !p.is_linear() {
            return Err(format!("{mode} variant is not linear"));
        }
        let mut prev: Option<Vec<f64>> = None;
        run_transient_with(&p, &cfg.solver, |s| {
            if let Some(prev) = &prev {
                let e = energy_balance(&p, prev, &s.values, cfg.solver.dt)?;
                worst = worst.max(e.residual.abs());
                steps += 1;
            }
            prev = Some(s.values.clone());
            Ok(())
        })
        .map_err(fail)?;
    }
    outcome(worst < 1e-10, format!("{steps} steps in both modes, max residual {worst:.2e} (limit 1e-10)"))
}

fn time_convergence() -> Result<Outcome, String> {
    let cfg = linear_magnet(&[])?;
    let p = cfg.build_problem(MeshMode::MortarTsa).map_err(fail)?;
    let coarse = 0.02;
    let n_temp = p.dofs().n_temperature();
    // Temperature fields at multiples of the coarsest step.
    let run = |dt: f64| -> Result<Vec<Vec<f64>>, String> {
        let solver = TransientConfig { dt, ..cfg.solver };
        let stride = (coarse / dt).round() as usize;
        let states = run_transient(&p, &solver).map_err(fail)?;
        Ok(states.iter().step_by(stride).map(|s| s.values[..n_temp].to_vec()).collect())
    };
    let reference = run(coarse / 8.0)?;
    let mut errors = Vec::new();
    for dt in [coarse, coarse / 2.0, coarse / 4.0] {
        let fields = run(dt)?;
        if fields.len() != reference.len() {
            return Err(format!("dt = {dt}: {} samples against {}", fields.len(), reference.len()));
        }
        let e = fields
            .iter()
            .zip(&reference)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    outcome(
        ratios.iter().all(|&r| r >= 1.8),
        format!(
            "max errors {:.3e}/{:.3e}/{:.3e} K, ratios {:.2}, {:.2} (limit 1.8)",
            errors[0], errors[1], errors[2], ratios[0], ratios[1]
        ),
    )
}

fn determinism() -> Result<Outcome, String> {
    let root = tempfile::tempdir().map_err(fail)?;
    let config = root.path().join("magnet.toml");
    fs::write(&config, MAGNET).map_err(fail)?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = root.path().join(run);
        cmd_run(&RunOptions { config: config.clone(), mode: None, out: Some(out.clone()), overrides: vec![] }).map_err(fail)?;
        let mut files: Vec<_> = fs::read_dir(&out)
            .map_err(fail)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let contents = files
            .iter()
            .map(|f| Ok((f.file_name().unwrap().to_owned(), fs::read(f)?)))
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(fail)?;
        outputs.push(contents);
    }
    let identical = !outputs[0].is_empty() && outputs[0] == outputs[1];
    outcome(identical, format!("{} CSV files compared byte for byte", outputs[0].len()))
}
