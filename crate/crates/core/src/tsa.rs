//! Thin shell approximation of a collapsed layer.
//!
//! The layer of thickness `d` is split into `N` virtual layers with
//! breakpoints `w_0 = 0 < w_1 < ... < w_N = d`. The temperature inside is
//! approximated by `sum_j T̂_j(s) ψ_j(w)` with first-order Lagrange `ψ_j` in
//! the thickness direction, so each layer couples two neighbouring sheets
//! through 2x2 one-dimensional matrices, and each sheet is discretized with
//! P1 elements on the virtual trace Γ̂.

use crate::assembly::{zero_row_sums, CsrMatrix, SparseBuilder, GAUSS2};
use crate::materials::Material;
use crate::mesh::TraceMesh;
use crate::{Error, Result};

/// Layers of one collapsed interface.
#[derive(Debug, Clone, PartialEq)]
pub struct TsaStack {
    thicknesses: Vec<f64>,
    materials: Vec<Material>,
    sources: Vec<f64>,
    /// Include the heat capacity of the layers.
    pub capacity: bool,
}

impl TsaStack {
    pub fn new(thicknesses: Vec<f64>, materials: Vec<Material>, sources: Vec<f64>) -> Result<Self> {
        let n = thicknesses.len();
        if n == 0 {
            return Err(Error::Tsa("a shell stack needs at least one layer".into()));
        }
        if materials.len() != n || sources.len() != n {
            return Err(Error::Tsa(format!(
                "{n} layers but {} materials and {} sources",
                materials.len(),
                sources.len()
            )));
        }
        if let Some(d) = thicknesses.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::Tsa(format!("layer thickness must be positive, got {d}")));
        }
        if let Some(q) = sources.iter().find(|q| !q.is_finite()) {
            return Err(Error::Tsa(format!("non-finite layer source {q}")));
        }
        Ok(TsaStack { thicknesses, materials, sources, capacity: true })
    }

    /// `n` layers of equal thickness `total / n` with one material.
    pub fn uniform(n: usize, total: f64, material: Material, source: f64) -> Result<Self> {
        Self::new(vec![total / n as f64; n], vec![material; n], vec![source; n])
    }

    pub fn without_capacity(mut self) -> Self {
        self.capacity = false;
        self
    }

    pub fn layers(&self) -> usize {
        self.thicknesses.len()
    }

    pub fn sheets(&self) -> usize {
        self.thicknesses.len() + 1
    }

    pub fn thickness(&self, k: usize) -> f64 {
        self.thicknesses[k]
    }

    pub fn thicknesses(&self) -> &[f64] {
        &self.thicknesses
    }

    pub fn material(&self, k: usize) -> &Material {
        &self.materials[k]
    }

    pub fn source(&self, k: usize) -> f64 {
        self.sources[k]
    }

    pub fn total_thickness(&self) -> f64 {
        self.thicknesses.iter().sum()
    }

    /// Sheet positions `w_j` measured from sheet 0.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.sheets());
        w.push(0.0);
        for d in &self.thicknesses {
            w.push(w.last().unwrap() + d);
        }
        w
    }

    pub fn is_linear(&self) -> bool {
        self.materials.iter().all(Material::is_linear)
    }
}

/// One-dimensional through-thickness matrices of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tsa1dMatrices {
    /// `∫ κ ψ_a' ψ_b' dw`
    pub k_hat: [[f64; 2]; 2],
    /// `∫ κ ψ_a ψ_b dw`
    pub m_kappa: [[f64; 2]; 2],
    /// `∫ c_v ψ_a ψ_b dw`
    pub m_cv: [[f64; 2]; 2],
    /// `∫ Q ψ_a dw`
    pub q_hat: [f64; 2],
}

impl Tsa1dMatrices {
    /// Integrates the layer matrices for coefficients constant in `w`.
    pub fn integrate(d: f64, kappa: f64, c_v: f64, q: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::Tsa(format!("layer thickness must be positive, got {d}")));
        }
        let mut out = Tsa1dMatrices { k_hat: [[0.0; 2]; 2], m_kappa: [[0.0; 2]; 2], m_cv: [[0.0; 2]; 2], q_hat: [0.0; 2] };
        let dpsi = [-1.0 / d, 1.0 / d];
        for (xi, w) in GAUSS2 {
            let psi = [1.0 - xi, xi];
            let jw = w * d;
            for a in 0..2 {
                out.q_hat[a] += jw * q * psi[a];
                for b in 0..2 {
                    out.k_hat[a][b] += jw * kappa * (dpsi[a] * dpsi[b]);
                    out.m_kappa[a][b] += jw * kappa * (psi[a] * psi[b]);
                    out.m_cv[a][b] += jw * c_v * (psi[a] * psi[b]);
                }
            }
        }
        Ok(out)
    }
}

/// Matrices of layer `k` (0-based) with properties evaluated at `t`.
pub fn tsa_1d_matrices(stack: &TsaStack, k: usize, t: f64) -> Result<Tsa1dMatrices> {
    if k >= stack.layers() {
        return Err(Error::Tsa(format!("layer {k} out of range for {} layers", stack.layers())));
    }
    if !t.is_finite() {
        return Err(Error::Tsa("non-finite sheet temperature".into()));
    }
    let m = stack.material(k);
    Tsa1dMatrices::integrate(stack.thickness(k), m.kappa(t)?, m.c_v(t)?, stack.source(k))
}

/// Sheet temperatures on Γ̂: `values[j][i]` for sheet `j` at trace node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetField {
    pub values: Vec<Vec<f64>>,
}

impl SheetField {
    pub fn uniform(sheets: usize, nodes: usize, t: f64) -> Self {
        SheetField { values: vec![vec![t; nodes]; sheets] }
    }
}

/// Adds the shell contributions of one interface.
///
/// `dof(j, i)` maps sheet `j`, trace node `i` to a row of the builders and
/// `temp(j, i)` gives the linearization temperature there.
pub fn assemble_tsa_into(
    trace: &TraceMesh,
    stack: &TsaStack,
    dof: impl Fn(usize, usize) -> usize,
    temp: impl Fn(usize, usize) -> f64,
    stiffness: &mut SparseBuilder,
    capacity: &mut SparseBuilder,
    load: &mut [f64],
) -> Result<()> {
    if trace.len() < 2 {
        return Err(Error::Tsa("virtual trace needs at least two nodes".into()));
    }
    for e in 0..trace.segments() {
        let len = trace.segment_length(e);
        if !(len > 0.0) {
            return Err(Error::Tsa("zero-length segment on the virtual trace".into()));
        }
        let mut mass = [[0.0; 2]; 2];
        for (xi, w) in GAUSS2 {
            let phi = [1.0 - xi, xi];
            for p in 0..2 {
                for q in 0..2 {
                    mass[p][q] += w * len * (phi[p] * phi[q]);
                }
            }
        }
        let stiff = [[1.0 / len, -1.0 / len], [-1.0 / len, 1.0 / len]];
        for k in 0..stack.layers() {
            let t = 0.25 * (temp(k, e) + temp(k, e + 1) + temp(k + 1, e) + temp(k + 1, e + 1));
            let mats = tsa_1d_matrices(stack, k, t)?;
            // Local block over (sheet offset, trace node).
            let mut block = [[0.0; 4]; 4];
            for r in 0..4 {
                let (a, p) = (r / 2, r % 2);
                for c in 0..4 {
                    let (b, q) = (c / 2, c % 2);
                    block[r][c] = mats.k_hat[a][b] * mass[p][q] + mats.m_kappa[a][b] * stiff[p][q];
                }
            }
            zero_row_sums(&mut block);
            for r in 0..4 {
                let (a, p) = (r / 2, r % 2);
                let row = dof(k + a, e + p);
                load[row] += mats.q_hat[a] * 0.5 * len;
                for c in 0..4 {
                    let (b, q) = (c / 2, c % 2);
                    let col = dof(k + b, e + q);
                    stiffness.add(row, col, block[r][c]);
                    if stack.capacity {
                        capacity.add(row, col, mats.m_cv[a][b] * mass[p][q]);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Shell blocks in local numbering `j * m + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsaBlocks {
    pub stiffness: CsrMatrix,
    pub capacity: CsrMatrix,
    pub load: Vec<f64>,
}

pub fn assemble_tsa(trace: &TraceMesh, stack: &TsaStack, sheets: &SheetField) -> Result<TsaBlocks> {
    let m = trace.len();
    if sheets.values.len() != stack.sheets() || sheets.values.iter().any(|v| v.len() != m) {
        return Err(Error::Tsa(format!(
            "sheet field has {} sheets for a {}-layer stack on {m} trace nodes",
            sheets.values.len(),
            stack.layers()
        )));
    }
    let n = stack.sheets() * m;
    let mut s = SparseBuilder::new(n, n);
    let mut c = SparseBuilder::new(n, n);
    let mut load = vec![0.0; n];
    assemble_tsa_into(trace, stack, |j, i| j * m + i, |j, i| sheets.values[j][i], &mut s, &mut c, &mut load)?;
    Ok(TsaBlocks { stiffness: s.finalize(), capacity: c.finalize(), load })
}

/// Robin condition on a shell end face at trace node `node`: the face
/// spans the thickness, so it is a 1D boundary mass over `w`.
pub fn cap_robin_into(
    stack: &TsaStack,
    node: usize,
    dof: impl Fn(usize, usize) -> usize,
    h: f64,
    t_ref: f64,
    matrix: &mut SparseBuilder,
    rhs: &mut [f64],
) {
    for k in 0..stack.layers() {
        let d = stack.thickness(k);
        let rows = [dof(k, node), dof(k + 1, node)];
        let block = [[h * d / 3.0, h * d / 6.0], [h * d / 6.0, h * d / 3.0]];
        matrix.add_block(&rows, &block);
        for &r in &rows {
            rhs[r] += 0.5 * h * t_ref * d;
        }
    }
}

/// Difference quotient of a sheet along the trace, one value per segment.
pub fn tsa_tangential_gradient(trace: &TraceMesh, sheet: &[f64]) -> Result<Vec<f64>> {
    trace.tangential_gradient(sheet)
}
