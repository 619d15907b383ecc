//! Runs the magnet cross-section with the insulation meshed and with it
//! collapsed to mortar-coupled thin shells, and compares the cable maxima.
//!
//! `cargo run --release --example magnet_study`

use mortar_tsa::cli::simulate;
use mortar_tsa::config::ProblemConfig;
use mortar_tsa::mesh::MeshMode;
use mortar_tsa::postproc::relative_error;

fn main() -> mortar_tsa::Result<()> {
    let cfg = ProblemConfig::from_toml(include_str!("magnet.toml"))?;
    let tsa = simulate(&cfg, MeshMode::MortarTsa, |_, _| Ok(()))?;
    let reference = simulate(&cfg, MeshMode::Reference, |_, _| Ok(()))?;
    println!("DoFs: thin shell {}, reference {}", tsa.problem.dofs().total(), reference.problem.dofs().total());
    for name in &tsa.series.names {
        let a = tsa.series.column(name).unwrap();
        let b = reference.series.column(name).unwrap();
        let err = relative_error(&a, &b)?.into_iter().fold(0.0, f64::max);
        println!("{name}: final {:.4} K (reference {:.4} K), max relative error {err:.2e}", a.last().unwrap(), b.last().unwrap());
    }
    for (j, sheet) in tsa.problem.sheet_values(&tsa.last.values, 0).iter().enumerate() {
        let mean = sheet.iter().sum::<f64>() / sheet.len() as f64;
        println!("sheet {j}: mean {mean:.4} K");
    }
    Ok(())
}
