//! Ordered 1D trace meshes extracted from boundary curves.

use std::collections::BTreeMap;

use super::{edge_key, Mesh};
use crate::{Error, Result};

/// Which side of a collapsed interface a trace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceSide {
    External1,
    External2,
    Virtual,
}

/// Open polyline of mesh nodes ordered by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMesh {
    pub curve: i32,
    pub node_ids: Vec<usize>,
    /// Arc length from the first node, strictly increasing.
    pub s: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub side: TraceSide,
}

impl TraceMesh {
    /// Builds a trace from an ordered point chain.
    pub fn from_points(curve: i32, node_ids: Vec<usize>, points: Vec<[f64; 2]>, side: TraceSide) -> Result<Self> {
        if points.len() < 2 || points.len() != node_ids.len() {
            return Err(Error::Trace { curve, message: "a trace needs at least two nodes".into() });
        }
        let mut s = Vec::with_capacity(points.len());
        s.push(0.0);
        for w in points.windows(2) {
            let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            if !(len > 0.0) {
                return Err(Error::Trace { curve, message: "zero-length segment".into() });
            }
            s.push(s.last().unwrap() + len);
        }
        Ok(TraceMesh { curve, node_ids, s, points, side })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn segments(&self) -> usize {
        self.node_ids.len().saturating_sub(1)
    }

    pub fn length(&self) -> f64 {
        *self.s.last().unwrap_or(&0.0)
    }

    pub fn start(&self) -> [f64; 2] {
        self.points[0]
    }

    pub fn end(&self) -> [f64; 2] {
        *self.points.last().unwrap()
    }

    pub fn segment_length(&self, seg: usize) -> f64 {
        self.s[seg + 1] - self.s[seg]
    }

    /// Unit tangent of segment `seg` in the direction of travel.
    pub fn tangent(&self, seg: usize) -> [f64; 2] {
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let l = self.segment_length(seg);
        [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
    }

    /// Unit normal pointing to the right of the direction of travel.
    pub fn right_normal(&self, seg: usize) -> [f64; 2] {
        let t = self.tangent(seg);
        [t[1], -t[0]]
    }

    /// Same chain traversed in the opposite direction.
    pub fn reversed(&self) -> TraceMesh {
        let total = self.length();
        let mut s: Vec<f64> = self.s.iter().rev().map(|v| total - v).collect();
        s[0] = 0.0;
        TraceMesh {
            curve: self.curve,
            node_ids: self.node_ids.iter().rev().copied().collect(),
            s,
            points: self.points.iter().rev().copied().collect(),
            side: self.side,
        }
    }

    pub fn with_side(mut self, side: TraceSide) -> TraceMesh {
        self.side = side;
        self
    }

    /// Segment containing arc length `s` (clamped to the trace) and the
    /// local coordinate in `[0, 1]`.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.segments();
        let seg = match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let t = ((s - self.s[seg]) / self.segment_length(seg)).clamp(0.0, 1.0);
        (seg, t)
    }

    /// Piecewise-linear interpolation of nodal `values` at arc length `s`.
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let (seg, t) = self.locate(s);
        values[seg] * (1.0 - t) + values[seg + 1] * t
    }

    /// Physical point at arc length `s`.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let (seg, t) = self.locate(s);
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    /// Per-segment difference quotient of nodal values along the trace.
    pub fn tangential_gradient(&self, values: &[f64]) -> Result<Vec<f64>> {
        if self.len() < 2 {
            return Err(Error::Trace { curve: self.curve, message: "a trace needs at least two nodes".into() });
        }
        if values.len() != self.len() {
            return Err(Error::Trace {
                curve: self.curve,
                message: format!("{} values for {} trace nodes", values.len(), self.len()),
            });
        }
        (0..self.segments())
            .map(|k| {
                let ds = self.segment_length(k);
                if !(ds > 0.0) {
                    return Err(Error::Trace { curve: self.curve, message: "zero-length segment".into() });
                }
                Ok((values[k + 1] - values[k]) / ds)
            })
            .collect()
    }
}

/// Orders the boundary edges tagged `curve_tag` into one open chain with the
/// adjacent triangles on the left of the direction of travel.
pub fn extract_trace(mesh: &Mesh, curve_tag: i32) -> Result<TraceMesh> {
    let err = |message: String| Error::Trace { curve: curve_tag, message };
    let edges: Vec<[usize; 2]> = mesh.curve_edges(curve_tag).map(|e| e.nodes).collect();
    if edges.is_empty() {
        return Err(err("curve has no boundary edges".into()));
    }
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &[a, b] in &edges {
        if a == b {
            return Err(err(format!("edge with repeated node {a}")));
        }
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    if let Some((n, nb)) = adjacency.iter().find(|(_, nb)| nb.len() > 2) {
        return Err(err(format!("branching chain at node {n} ({} neighbours)", nb.len())));
    }
    let ends: Vec<usize> = adjacency.iter().filter(|(_, nb)| nb.len() == 1).map(|(&n, _)| n).collect();
    if ends.is_empty() {
        return Err(err("chain is closed".into()));
    }
    if ends.len() > 2 {
        return Err(err(format!("disconnected chain ({} pieces)", ends.len() / 2)));
    }
    let mut chain = vec![ends[0]];
    let mut prev = usize::MAX;
    let mut cur = ends[0];
    loop {
        let next = adjacency[&cur].iter().copied().find(|&n| n != prev);
        match next {
            Some(n) if chain.len() <= edges.len() => {
                chain.push(n);
                prev = cur;
                cur = n;
                if adjacency[&n].len() == 1 {
                    break;
                }
            }
            _ => break,
        }
    }
    if chain.len() != edges.len() + 1 {
        return Err(err("disconnected chain".into()));
    }
    let edge_map = mesh.edge_triangles();
    let (a, b) = (chain[0], chain[1]);
    let owner = edge_map
        .get(&edge_key(a, b))
        .and_then(|v| v.first())
        .ok_or_else(|| err("curve edge not on any triangle".into()))?;
    let tri = mesh.triangles()[*owner];
    let c = tri.nodes.into_iter().find(|&n| n != a && n != b).unwrap();
    let (pa, pb, pc) = (mesh.node(a), mesh.node(b), mesh.node(c));
    let cross = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
    if cross < 0.0 {
        chain.reverse();
    }
    let points = chain.iter().map(|&n| mesh.node(n)).collect();
    TraceMesh::from_points(curve_tag, chain, points, TraceSide::External1)
}
