//! Per-step energy bookkeeping for a constant-property magnet run.

use mortar_tsa::config::ProblemConfig;
use mortar_tsa::mesh::MeshMode;
use mortar_tsa::solver::{energy_balance, run_transient_with};

fn main() -> mortar_tsa::Result<()> {
    let overrides: Vec<String> = [
        "materials.cable.preset=constant(450, 3500)",
        "materials.kapton.preset=constant(0.016, 3500)",
        "materials.steel.preset=constant(0.42, 24000)",
        "solver.t_end=0.5",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let cfg = ProblemConfig::from_toml_with(include_str!("magnet.toml"), &overrides)?;
    let problem = cfg.build_problem(MeshMode::MortarTsa)?;
    let mut prev: Option<Vec<f64>> = None;
    let mut worst: f64 = 0.0;
    println!("{:>6} {:>12} {:>12} {:>12} {:>10}", "t", "stored W", "source W", "robin W", "residual");
    run_transient_with(&problem, &cfg.solver, |state| {
        if let Some(p) = &prev {
            let e = energy_balance(&problem, p, &state.values, cfg.solver.dt)?;
            worst = worst.max(e.residual.abs());
            let step = (state.time / cfg.solver.dt).round() as usize;
            if step % 10 == 0 {
                println!("{:6.2} {:12.6} {:12.6} {:12.6} {:10.2e}", state.time, e.stored, e.source, e.robin, e.residual);
            }
        }
        prev = Some(state.values.clone());
        Ok(())
    })?;
    println!("largest relative residual: {worst:.2e}");
    Ok(())
}
