//! Coupling matrices between two non-matching partitions of the same
//! segment, and the weak continuity constraint they impose.

use mortar_tsa::mesh::{TraceMesh, TraceSide};
use mortar_tsa::mortar::{common_refinement, MortarInterface, MultiplierSpace};

fn trace(s: &[f64], side: TraceSide) -> mortar_tsa::Result<TraceMesh> {
    let points = s.iter().map(|&v| [0.0, v]).collect();
    TraceMesh::from_points(0, (0..s.len()).collect(), points, side)
}

fn main() -> mortar_tsa::Result<()> {
    let coarse = trace(&[0.0, 0.25, 0.5, 0.75, 1.0], TraceSide::External1)?;
    let fine: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let carrier = trace(&fine, TraceSide::External1)?;

    let refinement = common_refinement(&coarse, &carrier)?;
    println!("common refinement: {} segments, breakpoints {:?}", refinement.segments.len(), refinement.breakpoints);

    let iface = MortarInterface::new(coarse.clone(), MultiplierSpace::new(carrier.clone(), 0))?;
    println!("D_ext: {} x {}, D_shell: {} x {}", iface.d_ext.nrows(), iface.d_ext.ncols(), iface.d_shell.nrows(), iface.d_shell.ncols());

    // Affine data is continuous across the interface, so the constraint holds.
    let f = |s: f64| 4.2 + 3.0 * s;
    let ext: Vec<f64> = coarse.s.iter().map(|&s| f(s)).collect();
    let shell: Vec<f64> = carrier.s.iter().map(|&s| f(s)).collect();
    let r = iface.constraint_residual(&ext, &shell);
    println!("constraint residual for affine data: {:.2e}", r.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    // A kink between coarse nodes is only matched in the weak sense.
    let g = |s: f64| (s - 0.4).abs();
    let ext: Vec<f64> = coarse.s.iter().map(|&s| g(s)).collect();
    let shell: Vec<f64> = carrier.s.iter().map(|&s| g(s)).collect();
    let r = iface.constraint_residual(&ext, &shell);
    println!("constraint residual for a kink: {:.2e}", r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(())
}
