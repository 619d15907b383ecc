//! A fully specified discrete problem: mesh, properties, boundary data,
//! collapsed interfaces and the global DoF layout.

use std::collections::BTreeMap;

use crate::assembly::{
    assemble_robin, assemble_volume_into, check_boundary_conditions, insert_fixed, volume_dirichlet, BcKind,
    BoundaryCondition, CsrMatrix, DofMap, InterfaceDofSpec, PatternCache, RegionTable, SparseBuilder,
};
use crate::mesh::Mesh;
use crate::mortar::{eliminate_conformal, modified_interface_blocks, pair_traces, MortarInterface, MultiplierSpace, PairedTraces};
use crate::tsa::{assemble_tsa_into, cap_robin_into, TsaStack};
use crate::{Error, Result};

/// Interface side whose multiplier is removed by identifying the sheet with
/// the conforming external trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliminateSide {
    Side1,
    Side2,
}

/// Thin-shell model of one collapsed layer of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TsaInterfaceSpec {
    pub layer: String,
    pub stack: TsaStack,
    pub eliminate: Option<EliminateSide>,
}

/// A collapsed layer after trace pairing and multiplier setup.
#[derive(Debug, Clone)]
pub struct ShellInterface {
    pub name: String,
    pub stack: TsaStack,
    pub traces: PairedTraces,
    /// Mortar coupling per side; `None` where the side is eliminated.
    pub mortar: [Option<MortarInterface>; 2],
    /// Conditions on the shell end faces at the start and end of Γ̂.
    pub caps: [BcKind; 2],
}

impl ShellInterface {
    /// Physical position of sheet `j` over Γ̂ node `k`.
    pub fn sheet_point(&self, j: usize, k: usize) -> [f64; 2] {
        let w = self.stack.breakpoints()[j];
        let scale = self.traces.offset / self.stack.total_thickness();
        self.traces.sheet_point(k, w * scale)
    }

    /// External trace of side `side` (0 or 1), oriented like Γ̂.
    pub fn external(&self, side: usize) -> &crate::mesh::TraceMesh {
        if side == 0 {
            &self.traces.side1
        } else {
            &self.traces.side2
        }
    }
}

/// Linearized global blocks at one temperature iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBlocks {
    /// Stiffness of volume and shells.
    pub k: CsrMatrix,
    /// Heat capacity of volume and shells.
    pub m: CsrMatrix,
    /// Volumetric and shell sources.
    pub f: Vec<f64>,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct AssemblyCache {
    k: PatternCache,
    m: PatternCache,
}

#[derive(Debug, Clone)]
pub struct Problem {
    mesh: Mesh,
    regions: RegionTable,
    bcs: Vec<BoundaryCondition>,
    interfaces: Vec<ShellInterface>,
    dofs: DofMap,
    fixed: BTreeMap<usize, f64>,
    robin: CsrMatrix,
    robin_rhs: Vec<f64>,
    coupling: CsrMatrix,
    linear: bool,
}

fn cap_kind(bcs: &[BoundaryCondition], name: Option<&String>) -> BcKind {
    name.and_then(|n| bcs.iter().find(|b| &b.curve == n))
        .map_or(BcKind::Adiabatic, |b| b.kind)
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        regions: RegionTable,
        bcs: Vec<BoundaryCondition>,
        tsa: Vec<TsaInterfaceSpec>,
    ) -> Result<Self> {
        check_boundary_conditions(&mesh, &bcs)?;
        for t in mesh.triangles() {
            if regions.get(t.region).is_none() {
                let name = mesh.tags().name(crate::mesh::TagKind::Region, t.region).unwrap_or("?");
                return Err(Error::Assembly(format!("region `{name}` has no material assigned")));
            }
        }
        for layer in mesh.collapsed_layers() {
            if !tsa.iter().any(|t| t.layer == layer.name) {
                return Err(Error::Tsa(format!("collapsed layer `{}` has no shell stack", layer.name)));
            }
        }
        let mut interfaces = Vec::with_capacity(tsa.len());
        let mut specs = Vec::with_capacity(tsa.len());
        for spec in tsa {
            let layer = mesh
                .collapsed_layer(&spec.layer)
                .ok_or_else(|| Error::Tsa(format!("mesh has no collapsed layer `{}`", spec.layer)))?;
            let traces = pair_traces(&mesh, layer)?;
            let caps = [cap_kind(&bcs, layer.caps[0].as_ref()), cap_kind(&bcs, layer.caps[1].as_ref())];
            let merge = caps.map(|c| matches!(c, BcKind::Dirichlet(_)));
            let m = traces.gamma_hat.len();
            let mut alias = [None, None];
            let mut mortar = [None, None];
            for side in 0..2 {
                let external = if side == 0 { &traces.side1 } else { &traces.side2 };
                let eliminated = match spec.eliminate {
                    Some(EliminateSide::Side1) => side == 0,
                    Some(EliminateSide::Side2) => side == 1,
                    None => false,
                };
                if eliminated {
                    alias[side] = Some(eliminate_conformal(external, &traces.gamma_hat)?);
                } else {
                    let space = MultiplierSpace::new(traces.gamma_hat.clone(), side).with_merged_ends(merge);
                    mortar[side] = Some(MortarInterface::new(external.clone(), space)?);
                }
            }
            specs.push(InterfaceDofSpec {
                layers: spec.stack.layers(),
                trace_nodes: m,
                alias,
                multipliers: [0, 1].map(|s| mortar[s].as_ref().map_or(0, |mi: &MortarInterface| mi.space.dim())),
            });
            interfaces.push(ShellInterface { name: spec.layer.clone(), stack: spec.stack, traces, mortar, caps });
        }
        let mut dofs = DofMap::new(mesh.nodes().len(), &specs);
        let n = dofs.total();

        let mut fixed = volume_dirichlet(&mesh, &bcs)?;
        let (volume_robin, mut robin_rhs) = assemble_robin(&mesh, &bcs, n)?;
        let mut cap_robin = SparseBuilder::new(n, n);
        let mut coupling = SparseBuilder::new(n, n);
        for (i, iface) in interfaces.iter().enumerate() {
            let m = dofs.trace_nodes(i);
            for (end, kind) in iface.caps.iter().enumerate() {
                let node = if end == 0 { 0 } else { m - 1 };
                match *kind {
                    BcKind::Dirichlet(g) => {
                        for j in 0..iface.stack.sheets() {
                            insert_fixed(&mut fixed, dofs.sheet(i, j, node), g.eval(iface.sheet_point(j, node)))?;
                        }
                    }
                    BcKind::Robin { h, t_ref } => {
                        cap_robin_into(&iface.stack, node, |j, k| dofs.sheet(i, j, k), h, t_ref, &mut cap_robin, &mut robin_rhs);
                    }
                    BcKind::Adiabatic => {}
                }
            }
            for side in 0..2 {
                let Some(mi) = &iface.mortar[side] else { continue };
                let sheet = if side == 0 { 0 } else { iface.stack.layers() };
                let ext_dofs = mi.external.node_ids.clone();
                let shell_dofs = dofs.sheet_dofs(i, sheet).to_vec();
                modified_interface_blocks(mi, &ext_dofs, &shell_dofs, dofs.multiplier_range(i, side).start, &mut coupling);
            }
        }
        for &d in fixed.keys() {
            dofs.flag_dirichlet(d);
        }
        let robin = CsrMatrix::linear_combination(&[(1.0, &volume_robin), (1.0, &cap_robin.finalize())]);
        let linear = regions.is_linear() && interfaces.iter().all(|f| f.stack.is_linear());
        Ok(Problem {
            mesh,
            regions,
            bcs,
            interfaces,
            dofs,
            fixed,
            robin,
            robin_rhs,
            coupling: coupling.finalize(),
            linear,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn regions(&self) -> &RegionTable {
        &self.regions
    }

    pub fn boundary_conditions(&self) -> &[BoundaryCondition] {
        &self.bcs
    }

    pub fn interfaces(&self) -> &[ShellInterface] {
        &self.interfaces
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Dirichlet-constrained DoFs and their values.
    pub fn fixed(&self) -> &BTreeMap<usize, f64> {
        &self.fixed
    }

    /// Robin matrix of the volume boundary and shell end faces.
    pub fn robin_matrix(&self) -> &CsrMatrix {
        &self.robin
    }

    pub fn robin_rhs(&self) -> &[f64] {
        &self.robin_rhs
    }

    /// Symmetric multiplier coupling blocks.
    pub fn coupling(&self) -> &CsrMatrix {
        &self.coupling
    }

    /// True if no property depends on temperature.
    pub fn is_linear(&self) -> bool {
        self.linear
    }

    /// Uniform initial field `t0` with Dirichlet values in place and zero
    /// multipliers.
    pub fn initial_values(&self, t0: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dofs.total()];
        for v in &mut x[..self.dofs.n_temperature()] {
            *v = t0;
        }
        for (&d, &g) in &self.fixed {
            x[d] = g;
        }
        x
    }

    pub fn assemble(&self, t_star: &[f64]) -> Result<GlobalBlocks> {
        self.assemble_cached(t_star, &mut AssemblyCache::default())
    }

    pub(crate) fn assemble_cached(&self, t_star: &[f64], cache: &mut AssemblyCache) -> Result<GlobalBlocks> {
        let n = self.dofs.total();
        if t_star.len() != n {
            return Err(Error::Assembly(format!("iterate has {} entries for {n} DoFs", t_star.len())));
        }
        let cap = 9 * self.mesh.triangles().len();
        let mut k = SparseBuilder::with_capacity(n, n, cap);
        let mut m = SparseBuilder::with_capacity(n, n, cap);
        let mut f = vec![0.0; n];
        assemble_volume_into(&self.mesh, &self.regions, t_star, &mut k, &mut m, &mut f)?;
        for (i, iface) in self.interfaces.iter().enumerate() {
            let dofs = &self.dofs;
            assemble_tsa_into(
                &iface.traces.gamma_hat,
                &iface.stack,
                |j, node| dofs.sheet(i, j, node),
                |j, node| t_star[dofs.sheet(i, j, node)],
                &mut k,
                &mut m,
                &mut f,
            )?;
        }
        Ok(GlobalBlocks { k: k.finalize_cached(&mut cache.k), m: m.finalize_cached(&mut cache.m), f })
    }

    /// Volume temperatures (one per mesh node).
    pub fn volume_values<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.dofs.n_volume()]
    }

    /// Sheet values `[j][k]` of interface `i`.
    pub fn sheet_values(&self, x: &[f64], i: usize) -> Vec<Vec<f64>> {
        (0..self.interfaces[i].stack.sheets())
            .map(|j| self.dofs.sheet_dofs(i, j).iter().map(|&d| x[d]).collect())
            .collect()
    }

    /// Multipliers of interface `i`, side `side`.
    pub fn multipliers<'a>(&self, x: &'a [f64], i: usize, side: usize) -> &'a [f64] {
        &x[self.dofs.multiplier_range(i, side)]
    }

    /// Total heat flow from the external side `side` into the shell,
    /// `∫ λ ds`.
    pub fn interface_flux(&self, x: &[f64], i: usize, side: usize) -> f64 {
        let Some(mi) = &self.interfaces[i].mortar[side] else { return 0.0 };
        let lambda = self.multipliers(x, i, side);
        let ones = vec![1.0; mi.d_shell.ncols()];
        mi.d_shell.mul_vec(&ones).iter().zip(lambda).map(|(w, l)| w * l).sum()
    }
}
