//! First-order Lagrange assembly of the volume problem: stiffness, mass,
//! load, Robin terms and Dirichlet elimination.

mod dofs;
mod sparse;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use dofs::{DofFamily, DofMap, InterfaceDofSpec};
pub use sparse::{CsrMatrix, PatternCache, SparseBuilder};

use crate::materials::Material;
use crate::mesh::{Mesh, Triangle};
use crate::{Error, Result};

/// Two-point Gauss rule on `[0, 1]`: (abscissa, weight).
pub(crate) const GAUSS2: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

/// Area and constant shape-function gradients of a P1 triangle.
pub fn p1_element(coords: [[f64; 2]; 3]) -> Result<(f64, [[f64; 2]; 3])> {
    let [a, b, c] = coords;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if !(det > 0.0) {
        return Err(Error::Assembly(format!("triangle with non-positive area {}", 0.5 * det)));
    }
    let grads = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    Ok((0.5 * det, grads))
}

/// Element stiffness for a constant conductivity, with exactly zero row
/// sums (see [`zero_row_sums`]).
pub fn element_stiffness(area: f64, grads: &[[f64; 2]; 3], kappa: f64) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a + 1..3 {
            let v = kappa * area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            k[a][b] = v;
            k[b][a] = v;
        }
    }
    zero_row_sums(&mut k);
    k
}

/// Rounds the off-diagonal entries of a symmetric block to a power-of-two
/// quantum 2^-44 below the largest one and sets each diagonal entry to the
/// negated sum of its row. The row sums are then exactly zero, and so are
/// those of any assembly of blocks of similar scale. Otherwise identical
/// elements of a structured mesh repeat the same rounding error and the
/// stiffness leaks energy in proportion to the element count.
pub fn zero_row_sums<const N: usize>(block: &mut [[f64; N]; N]) {
    let max = (0..N)
        .flat_map(|r| (0..N).filter(move |&c| c != r).map(move |c| (r, c)))
        .fold(0.0_f64, |m, (r, c)| m.max(block[r][c].abs()));
    if max > 0.0 && max.is_finite() {
        let quantum = 2.0_f64.powi(max.log2().floor() as i32 - 44);
        for r in 0..N {
            for c in 0..N {
                if r != c {
                    block[r][c] = (block[r][c] / quantum).round() * quantum;
                }
            }
        }
    }
    for r in 0..N {
        block[r][r] = -(0..N).filter(|&c| c != r).map(|c| block[r][c]).sum::<f64>();
    }
}

/// Consistent element mass for a constant heat capacity.
pub fn element_mass(area: f64, c_v: f64) -> [[f64; 3]; 3] {
    let off = c_v * area / 12.0;
    let diag = 2.0 * off;
    [[diag, off, off], [off, diag, off], [off, off, diag]]
}

/// Dirichlet data, either constant or affine in the coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirichletValue {
    Constant(f64),
    Linear { t0: f64, gx: f64, gy: f64 },
}

impl DirichletValue {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            DirichletValue::Constant(g) => g,
            DirichletValue::Linear { t0, gx, gy } => t0 + gx * p[0] + gy * p[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcKind {
    Dirichlet(DirichletValue),
    Adiabatic,
    Robin { h: f64, t_ref: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub curve: String,
    pub kind: BcKind,
}

impl BoundaryCondition {
    pub fn dirichlet(curve: &str, g: f64) -> Self {
        BoundaryCondition { curve: curve.into(), kind: BcKind::Dirichlet(DirichletValue::Constant(g)) }
    }

    pub fn dirichlet_linear(curve: &str, t0: f64, gx: f64, gy: f64) -> Self {
        BoundaryCondition { curve: curve.into(), kind: BcKind::Dirichlet(DirichletValue::Linear { t0, gx, gy }) }
    }

    pub fn robin(curve: &str, h: f64, t_ref: f64) -> Self {
        BoundaryCondition { curve: curve.into(), kind: BcKind::Robin { h, t_ref } }
    }

    pub fn adiabatic(curve: &str) -> Self {
        BoundaryCondition { curve: curve.into(), kind: BcKind::Adiabatic }
    }
}

/// Checks that each curve carries at most one condition, that all curves
/// exist and that Robin data is admissible.
pub fn check_boundary_conditions(mesh: &Mesh, bcs: &[BoundaryCondition]) -> Result<()> {
    for (i, bc) in bcs.iter().enumerate() {
        if mesh.curve_tag(&bc.curve).is_none() {
            return Err(Error::Boundary(format!("unknown curve `{}`", bc.curve)));
        }
        if let Some(other) = bcs[..i].iter().find(|o| o.curve == bc.curve) {
            let kinds = |k: &BcKind| match k {
                BcKind::Dirichlet(_) => "dirichlet",
                BcKind::Adiabatic => "adiabatic",
                BcKind::Robin { .. } => "robin",
            };
            return Err(Error::Boundary(format!(
                "curve `{}` has two conditions ({} and {})",
                bc.curve,
                kinds(&other.kind),
                kinds(&bc.kind)
            )));
        }
        match bc.kind {
            BcKind::Robin { h, t_ref } => {
                if !(h >= 0.0 && h.is_finite()) || !t_ref.is_finite() {
                    return Err(Error::Boundary(format!("curve `{}`: invalid Robin data h = {h}, T_ref = {t_ref}", bc.curve)));
                }
            }
            BcKind::Dirichlet(DirichletValue::Constant(g)) if !g.is_finite() => {
                return Err(Error::Boundary(format!("curve `{}`: non-finite Dirichlet value", bc.curve)));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Material and volumetric source of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionProps {
    pub material: Material,
    pub source: f64,
}

/// Region tag to properties.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionTable {
    entries: BTreeMap<i32, RegionProps>,
}

impl RegionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: i32, material: Material, source: f64) {
        self.entries.insert(region, RegionProps { material, source });
    }

    pub fn get(&self, region: i32) -> Option<&RegionProps> {
        self.entries.get(&region)
    }

    pub fn is_linear(&self) -> bool {
        self.entries.values().all(|p| p.material.is_linear())
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &RegionProps)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }
}

/// Volume and Robin blocks evaluated at one linearization field.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemBlocks {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub f: Vec<f64>,
    pub robin_matrix: CsrMatrix,
    pub robin_rhs: Vec<f64>,
}

fn props_for<'a>(regions: &'a RegionTable, mesh: &Mesh, t: &Triangle) -> Result<&'a RegionProps> {
    regions.get(t.region).ok_or_else(|| {
        let name = mesh.tags().name(crate::mesh::TagKind::Region, t.region).unwrap_or("?");
        Error::Assembly(format!("region `{name}` (tag {}) has no material assigned", t.region))
    })
}

/// Adds the volume stiffness, mass and source contributions, with
/// properties evaluated at each element's mean vertex temperature.
pub fn assemble_volume_into(
    mesh: &Mesh,
    regions: &RegionTable,
    t_star: &[f64],
    k: &mut SparseBuilder,
    m: &mut SparseBuilder,
    f: &mut [f64],
) -> Result<()> {
    for tri in mesh.triangles() {
        let props = props_for(regions, mesh, tri)?;
        let (area, grads) = p1_element(mesh.triangle_coords(tri))?;
        let tc = (t_star[tri.nodes[0]] + t_star[tri.nodes[1]] + t_star[tri.nodes[2]]) / 3.0;
        if !tc.is_finite() {
            return Err(Error::Assembly("non-finite linearization temperature".into()));
        }
        let kappa = props.material.kappa(tc)?;
        let c_v = props.material.c_v(tc)?;
        k.add_block(&tri.nodes, &element_stiffness(area, &grads, kappa));
        m.add_block(&tri.nodes, &element_mass(area, c_v));
        if props.source != 0.0 {
            for &n in &tri.nodes {
                f[n] += props.source * area / 3.0;
            }
        }
    }
    Ok(())
}

/// Volume blocks on a system of dimension `n >= mesh.nodes().len()`,
/// without Robin terms.
pub fn assemble_volume(mesh: &Mesh, regions: &RegionTable, t_star: &[f64], n: usize) -> Result<SystemBlocks> {
    if t_star.len() < mesh.nodes().len() {
        return Err(Error::Assembly("linearization field shorter than the node count".into()));
    }
    let cap = 9 * mesh.triangles().len();
    let mut k = SparseBuilder::with_capacity(n, n, cap);
    let mut m = SparseBuilder::with_capacity(n, n, cap);
    let mut f = vec![0.0; n];
    assemble_volume_into(mesh, regions, t_star, &mut k, &mut m, &mut f)?;
    Ok(SystemBlocks {
        k: k.finalize(),
        m: m.finalize(),
        f,
        robin_matrix: CsrMatrix::zeros(n, n),
        robin_rhs: vec![0.0; n],
    })
}

/// Boundary mass matrix scaled by `h` on Robin curves and the matching
/// `h * T_ref` load, integrated with the two-point Gauss rule.
pub fn assemble_robin(mesh: &Mesh, bcs: &[BoundaryCondition], n: usize) -> Result<(CsrMatrix, Vec<f64>)> {
    check_boundary_conditions(mesh, bcs)?;
    let mut r = SparseBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    for bc in bcs {
        let BcKind::Robin { h, t_ref } = bc.kind else { continue };
        let tag = mesh.curve_tag(&bc.curve).unwrap();
        for e in mesh.curve_edges(tag) {
            let (pa, pb) = (mesh.node(e.nodes[0]), mesh.node(e.nodes[1]));
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let mut block = [[0.0; 2]; 2];
            let mut load = [0.0; 2];
            for (xi, w) in GAUSS2 {
                let phi = [1.0 - xi, xi];
                for a in 0..2 {
                    load[a] += w * len * h * t_ref * phi[a];
                    for b in 0..2 {
                        block[a][b] += w * len * h * (phi[a] * phi[b]);
                    }
                }
            }
            r.add_block(&e.nodes, &block);
            rhs[e.nodes[0]] += load[0];
            rhs[e.nodes[1]] += load[1];
        }
    }
    Ok((r.finalize(), rhs))
}

/// Dirichlet values on volume nodes of the Dirichlet curves.
pub fn volume_dirichlet(mesh: &Mesh, bcs: &[BoundaryCondition]) -> Result<BTreeMap<usize, f64>> {
    check_boundary_conditions(mesh, bcs)?;
    let mut fixed = BTreeMap::new();
    for bc in bcs {
        let BcKind::Dirichlet(g) = bc.kind else { continue };
        let tag = mesh.curve_tag(&bc.curve).unwrap();
        for e in mesh.curve_edges(tag) {
            for &n in &e.nodes {
                insert_fixed(&mut fixed, n, g.eval(mesh.node(n)))?;
            }
        }
    }
    Ok(fixed)
}

/// Records `dof = value`, rejecting a different value already present.
pub fn insert_fixed(fixed: &mut BTreeMap<usize, f64>, dof: usize, value: f64) -> Result<()> {
    if let Some(&old) = fixed.get(&dof) {
        if (old - value).abs() > 1e-12 {
            return Err(Error::Boundary(format!(
                "conflicting Dirichlet values {old} and {value} at DoF {dof}"
            )));
        }
        return Ok(());
    }
    fixed.insert(dof, value);
    Ok(())
}

/// Symmetrically reduced system on the free DoFs.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `A_fc g`, already subtracted from `rhs`.
    pub lift: Vec<f64>,
    pub free: Vec<usize>,
    template: Vec<f64>,
}

impl ReducedSystem {
    /// Full vector with the fixed values in place and `reduced` on the
    /// free DoFs.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = self.template.clone();
        for (&dof, &v) in self.free.iter().zip(reduced) {
            x[dof] = v;
        }
        x
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }
}

/// Removes the rows and columns of `fixed` DoFs, moving their known values
/// to the right-hand side.
pub fn apply_dirichlet(matrix: &CsrMatrix, rhs: &[f64], fixed: &BTreeMap<usize, f64>) -> Result<ReducedSystem> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::Assembly("apply_dirichlet needs a square system".into()));
    }
    let mut template = vec![0.0; n];
    let mut reduced_index = vec![usize::MAX; n];
    for (&d, &g) in fixed {
        if d >= n {
            return Err(Error::Assembly(format!("Dirichlet DoF {d} outside the system")));
        }
        template[d] = g;
    }
    let free: Vec<usize> = (0..n).filter(|d| !fixed.contains_key(d)).collect();
    for (k, &d) in free.iter().enumerate() {
        reduced_index[d] = k;
    }
    let mut row_ptr = Vec::with_capacity(free.len() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut red_rhs = Vec::with_capacity(free.len());
    let mut lift = Vec::with_capacity(free.len());
    for &r in &free {
        let (cols, vals) = matrix.row(r);
        let mut l = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            let rc = reduced_index[c];
            if rc == usize::MAX {
                l += v * template[c];
            } else {
                col_idx.push(rc);
                values.push(v);
            }
        }
        red_rhs.push(rhs[r] - l);
        lift.push(l);
        row_ptr.push(col_idx.len());
    }
    let matrix = CsrMatrix::from_raw(free.len(), free.len(), row_ptr, col_idx, values)?;
    Ok(ReducedSystem { matrix, rhs: red_rhs, lift, free, template })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle;
    use proptest::prelude::*;

    fn unit_table(mesh: &Mesh, kappa: f64, c_v: f64, q: f64) -> RegionTable {
        let mut t = RegionTable::new();
        t.insert(mesh.region_tag("domain").unwrap(), Material::constant(kappa, c_v).unwrap(), q);
        t
    }

    #[test]
    fn reference_triangle_gradients() {
        let (area, g) = p1_element([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(area, 0.5);
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(p1_element([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(p1_element([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn unit_right_triangle_stiffness() {
        let (area, g) = p1_element([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let k = element_stiffness(area, &g, 1.0);
        assert_eq!(k, [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]]);
    }

    proptest! {
        #[test]
        fn gradients_sum_to_zero_and_scale(
            pts in prop::array::uniform3((-5.0f64..5.0, -5.0f64..5.0)),
        ) {
            let coords = pts.map(|(x, y)| [x, y]);
            let det = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
                - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]);
            prop_assume!(det.abs() > 1e-2);
            let coords = if det < 0.0 { [coords[0], coords[2], coords[1]] } else { coords };
            let (area, g) = p1_element(coords).unwrap();
            let scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..2 {
                prop_assert!((g[0][k] + g[1][k] + g[2][k]).abs() <= 1e-12 * scale);
            }
            let (area2, g2) = p1_element(coords.map(|p| [2.0 * p[0], 2.0 * p[1]])).unwrap();
            prop_assert!((area2 - 4.0 * area).abs() <= 1e-12 * area2);
            for a in 0..3 {
                for k in 0..2 {
                    prop_assert!((g2[a][k] - 0.5 * g[a][k]).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn zero_row_sums_are_exact(vals in prop::array::uniform6(-1e3f64..1e3), scale in -8i32..8) {
            let s = 10f64.powi(scale);
            let [a, b, c, d, e, f] = vals.map(|v| v * s);
            let original = [[a, b, c], [b, d, e], [c, e, f]];
            let mut block = original;
            zero_row_sums(&mut block);
            let max = [b, c, e].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for r in 0..3 {
                // Exact in real arithmetic: the entries share a quantum.
                let sum: f64 = block[r].iter().sum();
                prop_assert_eq!(sum, 0.0);
                for k in 0..3 {
                    prop_assert_eq!(block[r][k], block[k][r]);
                    if r != k {
                        prop_assert!((block[r][k] - original[r][k]).abs() <= 1e-13 * max);
                    }
                }
            }
        }
    }

    #[test]
    fn stiffness_kernel_and_mass_row_sums() {
        let mesh = generate_rectangle(1.0, 0.6, 0.2, "domain").unwrap();
        let n = mesh.nodes().len();
        let blocks = assemble_volume(&mesh, &unit_table(&mesh, 2.5, 3.0, 0.0), &vec![4.2; n], n).unwrap();
        assert!(blocks.k.is_symmetric());
        assert!(blocks.m.is_symmetric());
        let k1 = blocks.k.mul_vec(&vec![1.0; n]);
        assert!(k1.iter().all(|v| v.abs() < 1e-13));
        assert!(blocks.f.iter().all(|&v| v == 0.0));
        // Row sums of the mass matrix equal c_v times the integral of the
        // node's hat function, a third of its patch area.
        let mut support = vec![0.0; n];
        for t in mesh.triangles() {
            for &v in &t.nodes {
                support[v] += mesh.triangle_area(t) / 3.0;
            }
        }
        for (s, expected) in blocks.m.row_sums().iter().zip(&support) {
            assert!((s - 3.0 * expected).abs() <= 1e-12 * s);
        }
        assert!(blocks.m.diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn stiffness_is_positive_semidefinite_with_constant_kernel() {
        let mesh = generate_rectangle(1.0, 1.0, 0.5, "domain").unwrap();
        let n = mesh.nodes().len();
        let k = assemble_volume(&mesh, &unit_table(&mesh, 1.0, 1.0, 0.0), &vec![1.0; n], n).unwrap().k;
        for seed in 0..20u64 {
            let x: Vec<f64> = (0..n).map(|i| (((i as u64 + 1) * (seed + 3) * 2654435761) % 1000) as f64 / 1000.0).collect();
            let kx = k.mul_vec(&x);
            let energy: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
            let mean = x.iter().sum::<f64>() / n as f64;
            let spread: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
            assert!(energy >= -1e-14);
            if spread > 1e-12 {
                assert!(energy > 0.0);
            }
        }
    }

    #[test]
    fn volume_assembly_is_independent_of_element_order() {
        let mesh = generate_rectangle(1.0, 1.0, 0.25, "domain").unwrap();
        let n = mesh.nodes().len();
        let table = unit_table(&mesh, 1.3, 0.7, 2.0);
        let t: Vec<f64> = (0..n).map(|i| 4.0 + 0.1 * i as f64).collect();
        let a = assemble_volume(&mesh, &table, &t, n).unwrap();
        let mut tris = mesh.triangles().to_vec();
        tris.reverse();
        let shuffled = Mesh::new(mesh.nodes().to_vec(), tris, mesh.boundary_edges().to_vec(), mesh.tags().clone());
        let b = assemble_volume(&shuffled, &table, &t, n).unwrap();
        assert_eq!(a.k, b.k);
        assert_eq!(a.m, b.m);
    }

    #[test]
    fn robin_edge_matrix() {
        let mesh = generate_rectangle(2.0, 1.0, 1.0, "domain").unwrap();
        let n = mesh.nodes().len();
        let (h, t_ref) = (7.0, 4.2);
        let (r, rhs) = assemble_robin(&mesh, &[BoundaryCondition::robin("right", h, t_ref)], n).unwrap();
        let tag = mesh.curve_tag("right").unwrap();
        let e = mesh.curve_edges(tag).next().unwrap();
        let len = 1.0;
        let (a, b) = (e.nodes[0], e.nodes[1]);
        assert!((r.get(a, a) - h * len / 3.0).abs() < 1e-14);
        assert!((r.get(a, b) - h * len / 6.0).abs() < 1e-14);
        assert!((rhs[a] - h * t_ref * len / 2.0).abs() < 1e-13);
        let tr = r.mul_vec(&vec![t_ref; n]);
        for (x, y) in tr.iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-13);
        }
        let (r0, rhs0) = assemble_robin(&mesh, &[BoundaryCondition::robin("right", 0.0, t_ref)], n).unwrap();
        assert!(r0.values().iter().all(|&v| v == 0.0));
        assert!(rhs0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicate_curve_conditions_rejected() {
        let mesh = generate_rectangle(1.0, 1.0, 1.0, "domain").unwrap();
        let bcs = [BoundaryCondition::robin("right", 1.0, 1.0), BoundaryCondition::dirichlet("right", 1.0)];
        assert!(assemble_robin(&mesh, &bcs, 4).is_err());
        assert!(assemble_robin(&mesh, &[BoundaryCondition::dirichlet("nowhere", 1.0)], 4).is_err());
    }

    #[test]
    fn rod_middle_node() {
        // Three-node rod: stiffness of two unit elements.
        let k = CsrMatrix::from_dense(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]);
        let fixed = BTreeMap::from([(0, 0.0), (2, 1.0)]);
        let red = apply_dirichlet(&k, &[0.0; 3], &fixed).unwrap();
        assert_eq!(red.matrix.to_dense(), vec![vec![2.0]]);
        let x = red.expand(&[red.rhs[0] / 2.0]);
        assert_eq!(x, vec![0.0, 0.5, 1.0]);
        assert!(red.matrix.is_symmetric());
    }

    #[test]
    fn all_fixed_needs_no_solve() {
        let k = CsrMatrix::identity(3);
        let fixed = BTreeMap::from([(0, 2.0), (1, 2.0), (2, 2.0)]);
        let red = apply_dirichlet(&k, &[0.0; 3], &fixed).unwrap();
        assert_eq!(red.free.len(), 0);
        assert_eq!(red.expand(&[]), vec![2.0; 3]);
    }

    #[test]
    fn conflicting_dirichlet_rejected() {
        let mesh = generate_rectangle(1.0, 1.0, 0.5, "domain").unwrap();
        let bcs = [BoundaryCondition::dirichlet("left", 1.0), BoundaryCondition::dirichlet("bottom", 2.0)];
        assert!(volume_dirichlet(&mesh, &bcs).unwrap_err().to_string().contains("conflicting"));
        let ok = [BoundaryCondition::dirichlet("left", 1.0), BoundaryCondition::dirichlet("bottom", 1.0 + 1e-13)];
        assert!(volume_dirichlet(&mesh, &ok).is_ok());
    }

    #[test]
    fn reduced_stiffness_stays_symmetric() {
        let mesh = generate_rectangle(1.0, 1.0, 0.25, "domain").unwrap();
        let n = mesh.nodes().len();
        let k = assemble_volume(&mesh, &unit_table(&mesh, 1.0, 1.0, 0.0), &vec![1.0; n], n).unwrap().k;
        let fixed = volume_dirichlet(&mesh, &[BoundaryCondition::dirichlet("left", 1.0)]).unwrap();
        let red = apply_dirichlet(&k, &vec![0.0; n], &fixed).unwrap();
        assert!(red.matrix.is_symmetric());
    }
}
