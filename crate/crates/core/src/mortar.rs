//! Weak coupling of non-conforming traces with Lagrange multipliers.
//!
//! For each side of a collapsed layer the multiplier λ lives in a P1 space
//! on the virtual trace Γ̂. The constraint rows read
//! `D_ext T - D_shell T̂ = 0` and their transposes enter the external rows
//! with a plus sign and the shell rows with a minus sign, which keeps the
//! global matrix symmetric. With this convention λ is the heat flux density
//! leaving the external subdomain into the shell.

use crate::assembly::{CsrMatrix, SparseBuilder, GAUSS2};
use crate::mesh::{extract_trace, CollapsedLayer, Mesh, TraceMesh, TraceSide, GEOM_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergedSegment {
    pub s0: f64,
    pub s1: f64,
    /// Parent segment on trace A and on trace B.
    pub seg_a: usize,
    pub seg_b: usize,
}

/// Union of the breakpoints of two traces parametrized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonRefinement {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<MergedSegment>,
}

impl CommonRefinement {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.s1 - s.s0).sum()
    }
}

pub fn common_refinement(a: &TraceMesh, b: &TraceMesh) -> Result<CommonRefinement> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Mortar("traces need at least two nodes".into()));
    }
    if (a.length() - b.length()).abs() > GEOM_TOL {
        return Err(Error::Mortar(format!(
            "endpoint mismatch: trace lengths {} and {} differ",
            a.length(),
            b.length()
        )));
    }
    let mut breakpoints: Vec<f64> = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.s.get(i), b.s.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        match breakpoints.last() {
            Some(&last) if next - last <= GEOM_TOL => {}
            _ => breakpoints.push(next),
        }
    }
    // Both traces end at the same point; keep trace A's end value.
    *breakpoints.last_mut().unwrap() = a.length();
    let mut segments = Vec::with_capacity(breakpoints.len() - 1);
    for w in breakpoints.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (seg_a, _) = a.locate(mid);
        let (seg_b, _) = b.locate(mid);
        for (t, seg) in [(a, seg_a), (b, seg_b)] {
            if w[0] < t.s[seg] - GEOM_TOL || w[1] > t.s[seg + 1] + GEOM_TOL {
                return Err(Error::Mortar("inconsistent parametrizations of the paired traces".into()));
            }
        }
        segments.push(MergedSegment { s0: w[0], s1: w[1], seg_a, seg_b });
    }
    if segments.is_empty() {
        return Err(Error::Mortar("empty common refinement".into()));
    }
    Ok(CommonRefinement { breakpoints, segments })
}

/// P1 multiplier space on a carrier trace. When an end is merged, the hat
/// function of the end node is added to its neighbour's, so the space still
/// contains the constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSpace {
    pub carrier: TraceMesh,
    /// 0 for side 1, 1 for side 2.
    pub side: usize,
    pub merge_ends: [bool; 2],
}

impl MultiplierSpace {
    pub fn new(carrier: TraceMesh, side: usize) -> Self {
        MultiplierSpace { carrier, side, merge_ends: [false, false] }
    }

    pub fn with_merged_ends(mut self, merge_ends: [bool; 2]) -> Self {
        self.merge_ends = merge_ends;
        self
    }

    pub fn dim(&self) -> usize {
        self.carrier.len() - self.merge_ends.iter().filter(|&&m| m).count()
    }

    /// Multiplier index whose basis function contains the hat of carrier
    /// node `k`.
    pub fn basis_of(&self, k: usize) -> usize {
        let m = self.carrier.len();
        let mut idx = if self.merge_ends[0] && k > 0 { k - 1 } else { k };
        if self.merge_ends[1] && k == m - 1 {
            idx -= 1;
        }
        idx
    }
}

/// `∫ μ_i φ_j ds` for multiplier basis `μ_i` and P1 hats `φ_j` of `trace`,
/// integrated exactly on the common refinement.
pub fn coupling_matrix(space: &MultiplierSpace, trace: &TraceMesh) -> Result<CsrMatrix> {
    if space.dim() == 0 {
        return Err(Error::Mortar("multiplier space is empty".into()));
    }
    let carrier = &space.carrier;
    let refinement = common_refinement(carrier, trace)?;
    let mut b = SparseBuilder::with_capacity(space.dim(), trace.len(), 4 * refinement.segments.len());
    for seg in &refinement.segments {
        let len = seg.s1 - seg.s0;
        // Distances from the Gauss point to both ends of each parent
        // segment, built from non-negative parts so small hat values keep
        // full relative accuracy.
        let ends = |t: &TraceMesh, k: usize| (seg.s0 - t.s[k], t.s[k + 1] - seg.s1, t.segment_length(k));
        let (a_lo, a_hi, a_len) = ends(carrier, seg.seg_a);
        let (b_lo, b_hi, b_len) = ends(trace, seg.seg_b);
        let mut block = [[0.0; 2]; 2];
        for (xi, w) in GAUSS2 {
            let (before, after) = (xi * len, (1.0 - xi) * len);
            let mu = [(a_hi + after) / a_len, (a_lo + before) / a_len];
            let phi = [(b_hi + after) / b_len, (b_lo + before) / b_len];
            for p in 0..2 {
                for q in 0..2 {
                    block[p][q] += w * len * mu[p] * phi[q];
                }
            }
        }
        for p in 0..2 {
            for q in 0..2 {
                b.add(space.basis_of(seg.seg_a + p), seg.seg_b + q, block[p][q]);
            }
        }
    }
    Ok(b.finalize())
}

/// Coupling of one external trace to one shell sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct MortarInterface {
    pub external: TraceMesh,
    pub space: MultiplierSpace,
    /// Multiplier rows by external trace nodes.
    pub d_ext: CsrMatrix,
    /// Multiplier rows by Γ̂ nodes.
    pub d_shell: CsrMatrix,
}

impl MortarInterface {
    pub fn new(external: TraceMesh, space: MultiplierSpace) -> Result<Self> {
        let d_ext = coupling_matrix(&space, &external)?;
        let d_shell = coupling_matrix(&space, &space.carrier)?;
        Ok(MortarInterface { external, space, d_ext, d_shell })
    }

    /// `D_ext T - D_shell T̂` for trace-local nodal values.
    pub fn constraint_residual(&self, t_ext: &[f64], t_shell: &[f64]) -> Vec<f64> {
        let a = self.d_ext.mul_vec(t_ext);
        let b = self.d_shell.mul_vec(t_shell);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }
}

/// Adds the symmetric multiplier blocks of one side to `global`.
///
/// `ext_dofs[i]` is the global DoF of external trace node `i`,
/// `shell_dofs[k]` that of Γ̂ node `k` on the coupled sheet, and the
/// multipliers start at `lambda0`.
pub fn modified_interface_blocks(
    iface: &MortarInterface,
    ext_dofs: &[usize],
    shell_dofs: &[usize],
    lambda0: usize,
    global: &mut SparseBuilder,
) {
    for (blocks, dofs, sign) in [(&iface.d_ext, ext_dofs, 1.0), (&iface.d_shell, shell_dofs, -1.0)] {
        for r in 0..blocks.nrows() {
            let (cols, vals) = blocks.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                global.add(lambda0 + r, dofs[c], sign * v);
                global.add(dofs[c], lambda0 + r, sign * v);
            }
        }
    }
}

/// Identifies the external trace nodes with the Γ̂ nodes when they
/// coincide, returning the external node id for each Γ̂ node.
pub fn eliminate_conformal(external: &TraceMesh, gamma_hat: &TraceMesh) -> Result<Vec<usize>> {
    if external.len() != gamma_hat.len() {
        return Err(Error::Mortar(format!(
            "cannot eliminate a non-conforming side ({} vs {} nodes)",
            external.len(),
            gamma_hat.len()
        )));
    }
    if let Some(k) = (0..external.len()).find(|&k| (external.s[k] - gamma_hat.s[k]).abs() > GEOM_TOL) {
        return Err(Error::Mortar(format!("cannot eliminate a non-conforming side (node {k} differs)")));
    }
    Ok(external.node_ids.clone())
}

/// The two traces bounding a collapsed layer, oriented alike, and the
/// virtual trace carrying the sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTraces {
    pub side1: TraceMesh,
    pub side2: TraceMesh,
    /// Copy of the finer side's arc-length partition placed on side 1.
    pub gamma_hat: TraceMesh,
    /// Which side Γ̂ was taken from (0 or 1).
    pub finer: usize,
    /// Unit normal from side 1 towards side 2, per Γ̂ segment.
    pub normals: Vec<[f64; 2]>,
    /// Geometric distance between the traces (the layer thickness, or 0).
    pub offset: f64,
}

impl PairedTraces {
    /// Physical position of Γ̂ node `k` on sheet position `w`.
    pub fn sheet_point(&self, k: usize, w: f64) -> [f64; 2] {
        let p = self.gamma_hat.points[k];
        let n = self.node_normal(k);
        [p[0] + w * n[0], p[1] + w * n[1]]
    }

    /// Average of the adjacent segment normals at Γ̂ node `k`.
    pub fn node_normal(&self, k: usize) -> [f64; 2] {
        let last = self.normals.len() - 1;
        let (a, b) = (self.normals[k.saturating_sub(1).min(last)], self.normals[k.min(last)]);
        let n = [a[0] + b[0], a[1] + b[1]];
        let l = (n[0] * n[0] + n[1] * n[1]).sqrt();
        [n[0] / l, n[1] / l]
    }
}

fn near(a: [f64; 2], b: [f64; 2]) -> bool {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() <= GEOM_TOL
}

/// Extracts and pairs the traces of `layer`. Side 2 must coincide with
/// side 1 translated by the layer thickness along side 1's right normal
/// (or without translation for touching subdomains).
pub fn pair_traces(mesh: &Mesh, layer: &CollapsedLayer) -> Result<PairedTraces> {
    let tag = |name: &str| {
        mesh.curve_tag(name)
            .ok_or_else(|| Error::Mortar(format!("layer `{}`: unknown curve `{name}`", layer.name)))
    };
    let side1 = extract_trace(mesh, tag(&layer.side1)?)?.with_side(TraceSide::External1);
    let raw2 = extract_trace(mesh, tag(&layer.side2)?)?.with_side(TraceSide::External2);
    let n_start = side1.right_normal(0);
    let n_end = side1.right_normal(side1.segments() - 1);
    let shift = |p: [f64; 2], n: [f64; 2], d: f64| [p[0] + d * n[0], p[1] + d * n[1]];
    let mut found = None;
    for offset in [layer.thickness, 0.0] {
        let (s, e) = (shift(side1.start(), n_start, offset), shift(side1.end(), n_end, offset));
        if near(raw2.start(), s) && near(raw2.end(), e) {
            found = Some((raw2.clone(), offset));
        } else if near(raw2.end(), s) && near(raw2.start(), e) {
            found = Some((raw2.reversed(), offset));
        }
        if found.is_some() {
            break;
        }
    }
    let (side2, offset) = found.ok_or_else(|| {
        Error::Mortar(format!(
            "layer `{}`: endpoints of `{}` and `{}` do not coincide",
            layer.name, layer.side1, layer.side2
        ))
    })?;
    if (side1.length() - side2.length()).abs() > GEOM_TOL {
        return Err(Error::Mortar(format!("layer `{}`: trace lengths differ", layer.name)));
    }
    let finer = usize::from(side2.len() > side1.len());
    let source = if finer == 0 { &side1 } else { &side2 };
    let mut s = source.s.clone();
    *s.last_mut().unwrap() = side1.length();
    let points: Vec<[f64; 2]> = s.iter().map(|&v| side1.point_at(v)).collect();
    let gamma_hat = TraceMesh::from_points(side1.curve, (0..points.len()).collect(), points, TraceSide::Virtual)?;
    let normals = (0..gamma_hat.segments()).map(|k| gamma_hat.right_normal(k)).collect();
    Ok(PairedTraces { side1, side2, gamma_hat, finer, normals, offset })
}
