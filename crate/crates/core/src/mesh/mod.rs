//! Triangular meshes with tagged regions, boundary curves and collapsed
//! thin-layer interfaces.
//!
//! A [`Mesh`] is immutable once constructed. Construction canonicalizes the
//! orientation of every triangle to counter-clockwise; the number of flipped
//! elements is kept and surfaced through [`Mesh::validate`].

mod generate;
mod msh;
mod trace;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use generate::{
    generate_magnet_geometry, generate_rectangle, generate_two_blocks, MagnetGeometry, MeshMode,
    TwoBlockGeometry,
};
pub use msh::{load_msh, parse_msh, write_msh};
pub use trace::{extract_trace, TraceMesh, TraceSide};

/// Geometric coincidence tolerance in meters.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Region,
    Curve,
}

impl TagKind {
    /// Topological dimension used by the MSH physical-name section.
    pub fn dim(self) -> u8 {
        match self {
            TagKind::Region => 2,
            TagKind::Curve => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagEntry {
    pub name: String,
    pub kind: TagKind,
    pub tag: i32,
}

/// Name to integer tag dictionary for regions and curves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagDict {
    entries: Vec<TagEntry>,
}

impl TagDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `name` with the next free tag of its kind, returning the
    /// existing tag if the name is already declared with the same kind.
    pub fn declare(&mut self, name: &str, kind: TagKind) -> i32 {
        if let Some(e) = self.entries.iter().find(|e| e.name == name && e.kind == kind) {
            return e.tag;
        }
        let tag = self
            .entries
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.tag)
            .max()
            .unwrap_or(0)
            + 1;
        self.entries.push(TagEntry {
            name: name.to_string(),
            kind,
            tag,
        });
        tag
    }

    pub fn insert(&mut self, name: &str, kind: TagKind, tag: i32) -> crate::Result<()> {
        if self.entries.iter().any(|e| e.name == name) {
            return Err(crate::Error::Mesh(format!("tag name `{name}` declared twice")));
        }
        if self.entries.iter().any(|e| e.kind == kind && e.tag == tag) {
            return Err(crate::Error::Mesh(format!(
                "{kind:?} tag {tag} declared twice"
            )));
        }
        self.entries.push(TagEntry {
            name: name.to_string(),
            kind,
            tag,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&TagEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn tag(&self, name: &str, kind: TagKind) -> Option<i32> {
        self.entries
            .iter()
            .find(|e| e.name == name && e.kind == kind)
            .map(|e| e.tag)
    }

    pub fn name(&self, kind: TagKind, tag: i32) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.kind == kind && e.tag == tag)
            .map(|e| e.name.as_str())
    }

    pub fn contains(&self, kind: TagKind, tag: i32) -> bool {
        self.name(kind, tag).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TagEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub curve: i32,
}

/// A thin layer that is not meshed and is represented by a thin shell
/// between two boundary curves of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedLayer {
    pub name: String,
    /// Curve bounding the subdomain on the `w = w_0` side.
    pub side1: String,
    /// Curve bounding the subdomain on the `w = w_N` side.
    pub side2: String,
    pub thickness: f64,
    /// Curves whose boundary condition applies to the shell end faces,
    /// ordered along the direction of the side-1 trace.
    pub caps: [Option<String>; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    edges: Vec<BoundaryEdge>,
    tags: TagDict,
    layers: Vec<CollapsedLayer>,
    reoriented: usize,
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh, flipping clockwise triangles to counter-clockwise order.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<Triangle>,
        edges: Vec<BoundaryEdge>,
        tags: TagDict,
    ) -> Self {
        let mut reoriented = 0;
        for t in &mut triangles {
            let [a, b, c] = t.nodes;
            if a < nodes.len() && b < nodes.len() && c < nodes.len()
                && signed_area(nodes[a], nodes[b], nodes[c]) < 0.0
            {
                t.nodes.swap(1, 2);
                reoriented += 1;
            }
        }
        Mesh {
            nodes,
            triangles,
            edges,
            tags,
            layers: Vec::new(),
            reoriented,
        }
    }

    pub fn with_layer(mut self, layer: CollapsedLayer) -> Self {
        self.layers.push(layer);
        self
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> [f64; 2] {
        self.nodes[id]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    pub fn tags(&self) -> &TagDict {
        &self.tags
    }

    pub fn collapsed_layers(&self) -> &[CollapsedLayer] {
        &self.layers
    }

    pub fn collapsed_layer(&self, name: &str) -> Option<&CollapsedLayer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn reoriented(&self) -> usize {
        self.reoriented
    }

    pub fn region_tag(&self, name: &str) -> Option<i32> {
        self.tags.tag(name, TagKind::Region)
    }

    pub fn curve_tag(&self, name: &str) -> Option<i32> {
        self.tags.tag(name, TagKind::Curve)
    }

    pub fn triangle_coords(&self, t: &Triangle) -> [[f64; 2]; 3] {
        t.nodes.map(|n| self.nodes[n])
    }

    pub fn triangle_area(&self, t: &Triangle) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    pub fn region_area(&self, region: i32) -> f64 {
        self.triangles
            .iter()
            .filter(|t| t.region == region)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Sorted, deduplicated node ids of all triangles in `region`.
    pub fn region_nodes(&self, region: i32) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .triangles
            .iter()
            .filter(|t| t.region == region)
            .flat_map(|t| t.nodes)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn curve_edges(&self, curve: i32) -> impl Iterator<Item = &BoundaryEdge> {
        self.edges.iter().filter(move |e| e.curve == curve)
    }

    /// Triangle counts per region tag.
    pub fn region_counts(&self) -> BTreeMap<i32, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.triangles {
            *counts.entry(t.region).or_insert(0) += 1;
        }
        counts
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Map from sorted node pair to the triangles containing that edge.
    pub(crate) fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t.nodes[k];
                let b = t.nodes[(k + 1) % 3];
                map.entry(edge_key(a, b)).or_default().push(ti);
            }
        }
        map
    }

    /// Checks the mesh invariants. The report is empty iff the mesh is valid.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            issues: Vec::new(),
            reoriented: self.reoriented,
        };
        let n = self.nodes.len();
        for (i, p) in self.nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                report.push(IssueKind::NonFiniteNode, format!("node {i} has non-finite coordinates"));
            }
        }
        let scale = {
            let (lo, hi) = self.bounding_box();
            ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).max(f64::MIN_POSITIVE)
        };
        let mut good_triangles = vec![true; self.triangles.len()];
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.nodes.iter().any(|&id| id >= n) {
                report.push(IssueKind::MissingNode, format!("triangle {ti} references a missing node"));
                good_triangles[ti] = false;
                continue;
            }
            let [a, b, c] = t.nodes;
            if a == b || b == c || a == c {
                report.push(
                    IssueKind::DegenerateElement,
                    format!("degenerate element: triangle {ti} repeats a node"),
                );
                good_triangles[ti] = false;
                continue;
            }
            if self.triangle_area(t) <= 1e-14 * scale {
                report.push(
                    IssueKind::DegenerateElement,
                    format!("degenerate element: triangle {ti} has no area"),
                );
                good_triangles[ti] = false;
            }
            if !self.tags.contains(TagKind::Region, t.region) {
                report.push(
                    IssueKind::UndeclaredTag,
                    format!("triangle {ti} uses undeclared region tag {}", t.region),
                );
            }
        }
        let edge_map = self.edge_triangles();
        for (ei, e) in self.edges.iter().enumerate() {
            if e.nodes.iter().any(|&id| id >= n) {
                report.push(IssueKind::MissingNode, format!("boundary edge {ei} references a missing node"));
                continue;
            }
            if !self.tags.contains(TagKind::Curve, e.curve) {
                report.push(
                    IssueKind::UndeclaredTag,
                    format!("boundary edge {ei} uses undeclared curve tag {}", e.curve),
                );
            }
            let owners = edge_map.get(&edge_key(e.nodes[0], e.nodes[1])).map_or(0, Vec::len);
            if owners != 1 {
                report.push(
                    IssueKind::BoundaryEdgeOwnership,
                    format!("boundary edge {ei} belongs to {owners} triangles"),
                );
            }
        }
        for (&(a, b), owners) in &edge_map {
            if owners.len() > 2 {
                report.push(
                    IssueKind::NonManifoldEdge,
                    format!("edge ({a}, {b}) is shared by {} triangles", owners.len()),
                );
            }
        }
        self.check_hanging_nodes(&edge_map, &good_triangles, &mut report);
        for layer in &self.layers {
            for name in [Some(&layer.side1), Some(&layer.side2), layer.caps[0].as_ref(), layer.caps[1].as_ref()]
                .into_iter()
                .flatten()
            {
                if self.curve_tag(name).is_none() {
                    report.push(
                        IssueKind::UndeclaredTag,
                        format!("collapsed layer `{}` references undeclared curve `{name}`", layer.name),
                    );
                }
            }
            if !(layer.thickness >= 0.0 && layer.thickness.is_finite()) {
                report.push(
                    IssueKind::InvalidLayer,
                    format!("collapsed layer `{}` has negative thickness", layer.name),
                );
            }
        }
        report
    }

    /// A node lying strictly inside an open edge of a triangle of the same
    /// region breaks conformity within that region.
    fn check_hanging_nodes(
        &self,
        edge_map: &HashMap<(usize, usize), Vec<usize>>,
        good: &[bool],
        report: &mut ValidationReport,
    ) {
        let mut open: Vec<((usize, usize), i32)> = edge_map
            .iter()
            .filter(|(_, owners)| owners.len() == 1 && good[owners[0]])
            .map(|(&k, owners)| (k, self.triangles[owners[0]].region))
            .collect();
        open.sort_unstable();
        let mut node_regions: BTreeMap<usize, Vec<i32>> = BTreeMap::new();
        for &((a, b), region) in &open {
            node_regions.entry(a).or_default().push(region);
            node_regions.entry(b).or_default().push(region);
        }
        // Bucket open-edge nodes on a coarse grid to keep the search local.
        let (lo, hi) = self.bounding_box();
        let cells = (open.len() as f64).sqrt().ceil().max(1.0);
        let cw = ((hi[0] - lo[0]) / cells).max(f64::MIN_POSITIVE);
        let ch = ((hi[1] - lo[1]) / cells).max(f64::MIN_POSITIVE);
        let cell_of = |p: [f64; 2]| -> (i64, i64) {
            (((p[0] - lo[0]) / cw).floor() as i64, ((p[1] - lo[1]) / ch).floor() as i64)
        };
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for &id in node_regions.keys() {
            grid.entry(cell_of(self.nodes[id])).or_default().push(id);
        }
        for &((a, b), region) in &open {
            let pa = self.nodes[a];
            let pb = self.nodes[b];
            let (ca, cb) = (cell_of(pa), cell_of(pb));
            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
            for cx in ca.0.min(cb.0)..=ca.0.max(cb.0) {
                for cy in ca.1.min(cb.1)..=ca.1.max(cb.1) {
                    let Some(ids) = grid.get(&(cx, cy)) else { continue };
                    for &id in ids {
                        if id == a || id == b || !node_regions[&id].contains(&region) {
                            continue;
                        }
                        let p = self.nodes[id];
                        let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                        if t <= 0.0 || t >= 1.0 {
                            continue;
                        }
                        let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                        if cross.abs() <= GEOM_TOL * len2.sqrt() {
                            report.push(
                                IssueKind::HangingNode,
                                format!("node {id} hangs on edge ({a}, {b})"),
                            );
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    NonFiniteNode,
    MissingNode,
    DegenerateElement,
    UndeclaredTag,
    BoundaryEdgeOwnership,
    NonManifoldEdge,
    HangingNode,
    InvalidLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    /// Triangles flipped to counter-clockwise order during construction.
    pub reoriented: usize,
}

impl ValidationReport {
    fn push(&mut self, kind: IssueKind, message: String) {
        self.issues.push(Issue { kind, message });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            write!(f, "mesh valid")?;
        } else {
            write!(f, "{} issue(s):", self.issues.len())?;
            for issue in &self.issues {
                write!(f, "\n  - {}", issue.message)?;
            }
        }
        if self.reoriented > 0 {
            write!(f, "\n  ({} triangle(s) reoriented)", self.reoriented)?;
        }
        Ok(())
    }
}
