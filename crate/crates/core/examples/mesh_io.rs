//! Generates the magnet cross-section in both modes, writes it as MSH 2.2
//! and reads it back.

use mortar_tsa::mesh::{generate_magnet_geometry, parse_msh, write_msh, MagnetGeometry, MeshMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("mortar_tsa_mesh_io");
    std::fs::create_dir_all(&out)?;
    for mode in [MeshMode::Reference, MeshMode::MortarTsa] {
        let mesh = generate_magnet_geometry(&MagnetGeometry::default(), mode, 2.5e-4, 1e-4)?;
        let path = out.join(format!("magnet_{mode}.msh"));
        let text = write_msh(&mesh);
        std::fs::write(&path, &text)?;
        let back = parse_msh(&text, &path)?;
        let report = back.validate();
        println!(
            "{mode}: {} nodes, {} triangles, {} boundary edges, area {:.4e} m^2, issues: {}",
            back.nodes().len(),
            back.triangles().len(),
            back.boundary_edges().len(),
            back.total_area(),
            if report.is_empty() { "none".to_string() } else { format!("{report:?}") }
        );
        for layer in mesh.collapsed_layers() {
            println!("  collapsed layer `{}` between `{}` and `{}`", layer.name, layer.side1, layer.side2);
        }
        println!("  written to {}", path.display());
    }
    Ok(())
}
