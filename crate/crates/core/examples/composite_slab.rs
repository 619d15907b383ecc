//! Steady conduction through a three-layer insulation modelled as a thin
//! shell, checked against the series thermal resistance.

use mortar_tsa::assembly::{BoundaryCondition, RegionTable};
use mortar_tsa::materials::Material;
use mortar_tsa::mesh::{generate_two_blocks, TwoBlockGeometry};
use mortar_tsa::solver::{solve_steady, Problem, TsaInterfaceSpec};
use mortar_tsa::tsa::TsaStack;

fn main() -> mortar_tsa::Result<()> {
    let d = [0.02, 0.05, 0.03];
    let kappa = [0.5, 0.1, 1.0];
    let geometry = TwoBlockGeometry { layer: d.iter().sum(), ..Default::default() };
    let mesh = generate_two_blocks(&geometry, 0.25, 0.2)?;
    let mut regions = RegionTable::new();
    regions.insert(mesh.region_tag("left").unwrap(), Material::constant(2.0, 1.0)?, 0.0);
    regions.insert(mesh.region_tag("right").unwrap(), Material::constant(3.0, 1.0)?, 0.0);
    let bcs = vec![
        BoundaryCondition::dirichlet("left", 10.0),
        BoundaryCondition::dirichlet("right", 4.0),
        BoundaryCondition::adiabatic("top"),
        BoundaryCondition::adiabatic("bottom"),
    ];
    let materials = kappa.iter().map(|&k| Material::constant(k, 1.0)).collect::<mortar_tsa::Result<_>>()?;
    let stack = TsaStack::new(d.to_vec(), materials, vec![0.0; 3])?;
    let shell = TsaInterfaceSpec { layer: "interface".into(), stack, eliminate: None };
    let problem = Problem::new(mesh, regions, bcs, vec![shell])?;
    let x = solve_steady(&problem, 5.0, 1e-12, 3)?;

    let resistance = 1.0 / 2.0 + d.iter().zip(&kappa).map(|(d, k)| d / k).sum::<f64>() + 1.0 / 3.0;
    let q = 6.0 / resistance;
    let mut exact = 10.0 - q / 2.0;
    println!("heat flux density {q:.6} W/m^2");
    for (j, sheet) in problem.sheet_values(&x, 0).iter().enumerate() {
        println!("sheet {j}: FE {:.12} K, series resistance {exact:.12} K", sheet[0]);
        if j < 3 {
            exact -= q * d[j] / kappa[j];
        }
    }
    Ok(())
}
