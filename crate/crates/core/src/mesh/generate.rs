//! Deterministic block-structured triangulation of axis-aligned rectangles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{edge_key, BoundaryEdge, CollapsedLayer, Mesh, TagDict, TagKind, Triangle, GEOM_TOL};
use crate::{Error, Result};

/// Whether thin insulation layers are meshed or collapsed to shells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshMode {
    Reference,
    MortarTsa,
}

impl std::str::FromStr for MeshMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(MeshMode::Reference),
            "mortar_tsa" => Ok(MeshMode::MortarTsa),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected `reference` or `mortar_tsa`)"
            ))),
        }
    }
}

impl std::fmt::Display for MeshMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeshMode::Reference => "reference",
            MeshMode::MortarTsa => "mortar_tsa",
        })
    }
}

/// Two side-by-side rectangular cables separated by a vertical insulation
/// strip, resting on a filled gap and a collar block.
///
/// ```text
///   y
///   ^  +-----------+---+-----------+
///   |  | left      |ins| right     | <- cooling on the right face
///   |  | cable     |   | cable     |
///   |  +-----------+---+-----------+
///   |  | gap                       |
///   |  +---------------------------+
///   |  | collar                    |
///   +--+---------------------------+--> x
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagnetGeometry {
    pub cable_width: f64,
    pub cable_height: f64,
    pub insulation: f64,
    pub gap: f64,
    pub collar: f64,
}

impl Default for MagnetGeometry {
    fn default() -> Self {
        MagnetGeometry {
            cable_width: 2e-3,
            cable_height: 15e-3,
            insulation: 0.5e-3,
            gap: 1e-3,
            collar: 5e-3,
        }
    }
}

impl MagnetGeometry {
    pub fn width(&self) -> f64 {
        2.0 * self.cable_width + self.insulation
    }

    pub fn height(&self) -> f64 {
        self.collar + self.gap + self.cable_height
    }

    /// Bottom edge of the cable row.
    pub fn cable_bottom(&self) -> f64 {
        self.collar + self.gap
    }

    /// x range of the insulation strip.
    pub fn insulation_span(&self) -> (f64, f64) {
        (self.cable_width, self.cable_width + self.insulation)
    }

    /// Axis-aligned rectangle of the insulation strip between the cables.
    pub fn insulation_rect(&self) -> ([f64; 2], [f64; 2]) {
        let (x0, x1) = self.insulation_span();
        ([x0, self.cable_bottom()], [x1, self.height()])
    }

    /// y coordinate of the horizontal line through the middle of the cables.
    pub fn cable_mid_height(&self) -> f64 {
        self.cable_bottom() + 0.5 * self.cable_height
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("cable_width", self.cable_width),
            ("cable_height", self.cable_height),
            ("insulation", self.insulation),
            ("gap", self.gap),
            ("collar", self.collar),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn smallest_feature(&self) -> f64 {
        [self.cable_width, self.cable_height, self.insulation, self.gap, self.collar]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Two rectangles joined along a vertical line through a thin layer of
/// thickness `layer`. The layer is always collapsed; with `layer = 0`
/// the two blocks touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoBlockGeometry {
    pub width_left: f64,
    pub width_right: f64,
    pub height: f64,
    pub layer: f64,
}

impl Default for TwoBlockGeometry {
    fn default() -> Self {
        TwoBlockGeometry {
            width_left: 1.0,
            width_right: 1.0,
            height: 1.0,
            layer: 0.1,
        }
    }
}

struct Block {
    x: (f64, f64),
    y: (f64, f64),
    nx: usize,
    ny: usize,
    region: i32,
}

struct Segment {
    curve: i32,
    a: [f64; 2],
    b: [f64; 2],
}

fn divisions(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

fn check_h(h: f64, name: &str) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Geometry(format!("{name} must be positive, got {h}")));
    }
    Ok(())
}

fn on_segment(p: [f64; 2], s: &Segment) -> bool {
    let len = ((s.b[0] - s.a[0]).powi(2) + (s.b[1] - s.a[1]).powi(2)).sqrt();
    let cross = (s.b[0] - s.a[0]) * (p[1] - s.a[1]) - (s.b[1] - s.a[1]) * (p[0] - s.a[0]);
    if cross.abs() > GEOM_TOL * len {
        return false;
    }
    let t = ((p[0] - s.a[0]) * (s.b[0] - s.a[0]) + (p[1] - s.a[1]) * (s.b[1] - s.a[1])) / (len * len);
    (0.0..=1.0).contains(&t)
}

/// Triangulates the blocks, merging coincident nodes, and tags every
/// boundary edge with the first segment containing its midpoint (or
/// `fallback` if none does).
fn build(blocks: &[Block], segments: &[Segment], fallback: i32, tags: TagDict) -> Mesh {
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut triangles = Vec::new();
    let mut node_id = |p: [f64; 2]| -> usize {
        let key = ((p[0] / GEOM_TOL).round() as i64, (p[1] / GEOM_TOL).round() as i64);
        *index.entry(key).or_insert_with(|| {
            nodes.push(p);
            nodes.len() - 1
        })
    };
    for b in blocks {
        let xs: Vec<f64> = (0..=b.nx)
            .map(|i| if i == b.nx { b.x.1 } else { b.x.0 + (b.x.1 - b.x.0) * i as f64 / b.nx as f64 })
            .collect();
        let ys: Vec<f64> = (0..=b.ny)
            .map(|j| if j == b.ny { b.y.1 } else { b.y.0 + (b.y.1 - b.y.0) * j as f64 / b.ny as f64 })
            .collect();
        let mut ids = vec![0usize; (b.nx + 1) * (b.ny + 1)];
        for j in 0..=b.ny {
            for i in 0..=b.nx {
                ids[j * (b.nx + 1) + i] = node_id([xs[i], ys[j]]);
            }
        }
        for j in 0..b.ny {
            for i in 0..b.nx {
                let p00 = ids[j * (b.nx + 1) + i];
                let p10 = ids[j * (b.nx + 1) + i + 1];
                let p01 = ids[(j + 1) * (b.nx + 1) + i];
                let p11 = ids[(j + 1) * (b.nx + 1) + i + 1];
                triangles.push(Triangle { nodes: [p00, p10, p11], region: b.region });
                triangles.push(Triangle { nodes: [p00, p11, p01], region: b.region });
            }
        }
    }
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            *count.entry(edge_key(t.nodes[k], t.nodes[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut edges = Vec::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t.nodes[k], t.nodes[(k + 1) % 3]);
            if count[&edge_key(a, b)] != 1 {
                continue;
            }
            let mid = [0.5 * (nodes[a][0] + nodes[b][0]), 0.5 * (nodes[a][1] + nodes[b][1])];
            let curve = segments
                .iter()
                .find(|s| on_segment(mid, s))
                .map_or(fallback, |s| s.curve);
            edges.push(BoundaryEdge { nodes: [a, b], curve });
        }
    }
    Mesh::new(nodes, triangles, edges, tags)
}

/// Structured mesh of `[0, width] x [0, height]` with curves `bottom`,
/// `right`, `top`, `left` and a single region.
pub fn generate_rectangle(width: f64, height: f64, h: f64, region: &str) -> Result<Mesh> {
    for (name, v) in [("width", width), ("height", height)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
        }
    }
    check_h(h, "h")?;
    if h > width.min(height) * (1.0 + 1e-12) {
        return Err(Error::Geometry(format!(
            "mesh size {h} exceeds the smallest feature {}",
            width.min(height)
        )));
    }
    let mut tags = TagDict::new();
    let r = tags.declare(region, TagKind::Region);
    let names = ["bottom", "right", "top", "left"];
    let ids: Vec<i32> = names.iter().map(|n| tags.declare(n, TagKind::Curve)).collect();
    let corners = [[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]];
    let segments: Vec<Segment> = (0..4)
        .map(|k| Segment { curve: ids[k], a: corners[k], b: corners[(k + 1) % 4] })
        .collect();
    let block = Block {
        x: (0.0, width),
        y: (0.0, height),
        nx: divisions(width, h),
        ny: divisions(height, h),
        region: r,
    };
    Ok(build(&[block], &segments, ids[0], tags))
}

/// Generates the magnet cross-section.
///
/// In reference mode every block uses `min(h_left, h_right)` and the
/// insulation strip is meshed as region `insulation`. In mortar_tsa mode
/// the strip between the cables is removed and recorded as the collapsed
/// layer `insulation` between curves `interface_left` and
/// `interface_right`; the right cable (and the columns below it, in x)
/// use `h_right`, everything else `h_left`.
pub fn generate_magnet_geometry(
    spec: &MagnetGeometry,
    mode: MeshMode,
    h_left: f64,
    h_right: f64,
) -> Result<Mesh> {
    spec.check()?;
    check_h(h_left, "h_left")?;
    check_h(h_right, "h_right")?;
    let feature = spec.smallest_feature();
    if h_left.max(h_right) > feature * (1.0 + 1e-12) {
        return Err(Error::Geometry(format!(
            "mesh size {} exceeds the smallest feature {feature}",
            h_left.max(h_right)
        )));
    }
    let (hl, hr) = match mode {
        MeshMode::Reference => {
            let h = h_left.min(h_right);
            (h, h)
        }
        MeshMode::MortarTsa => (h_left, h_right),
    };

    let mut tags = TagDict::new();
    let collar = tags.declare("collar", TagKind::Region);
    let gap = tags.declare("gap", TagKind::Region);
    let left = tags.declare("left_cable", TagKind::Region);
    let right = tags.declare("right_cable", TagKind::Region);
    let insulation = tags.declare("insulation", TagKind::Region);
    let outer = tags.declare("outer", TagKind::Curve);
    let cooling = tags.declare("cooling", TagKind::Curve);
    let if_left = tags.declare("interface_left", TagKind::Curve);
    let if_right = tags.declare("interface_right", TagKind::Curve);
    let ins_top = tags.declare("insulation_top", TagKind::Curve);
    tags.declare("insulation_bottom", TagKind::Curve);
    let gap_slot = tags.declare("gap_slot", TagKind::Curve);

    let cw = spec.cable_width;
    let (x1, x2) = spec.insulation_span();
    let w = spec.width();
    let y1 = spec.collar;
    let y2 = spec.cable_bottom();
    let y3 = spec.height();

    let cols = [(0.0, x1, hl), (x1, x2, hl), (x2, w, hr)];
    let mut blocks = Vec::new();
    for (range, region) in [((0.0, y1), collar), ((y1, y2), gap)] {
        let ny = divisions(range.1 - range.0, hl);
        for &(a, b, h) in &cols {
            blocks.push(Block { x: (a, b), y: range, nx: divisions(b - a, h), ny, region });
        }
    }
    let cable_height = y3 - y2;
    match mode {
        MeshMode::Reference => {
            let ny = divisions(cable_height, hl);
            for (&(a, b, h), region) in cols.iter().zip([left, insulation, right]) {
                blocks.push(Block { x: (a, b), y: (y2, y3), nx: divisions(b - a, h), ny, region });
            }
        }
        MeshMode::MortarTsa => {
            blocks.push(Block {
                x: (0.0, x1),
                y: (y2, y3),
                nx: divisions(cw, hl),
                ny: divisions(cable_height, hl),
                region: left,
            });
            blocks.push(Block {
                x: (x2, w),
                y: (y2, y3),
                nx: divisions(cw, hr),
                ny: divisions(cable_height, hr),
                region: right,
            });
        }
    }
    let segments = [
        Segment { curve: cooling, a: [w, y2], b: [w, y3] },
        Segment { curve: if_left, a: [x1, y2], b: [x1, y3] },
        Segment { curve: if_right, a: [x2, y2], b: [x2, y3] },
        Segment { curve: ins_top, a: [x1, y3], b: [x2, y3] },
        Segment { curve: gap_slot, a: [x1, y2], b: [x2, y2] },
    ];
    let mesh = build(&blocks, &segments, outer, tags);
    Ok(match mode {
        MeshMode::Reference => mesh,
        MeshMode::MortarTsa => mesh.with_layer(CollapsedLayer {
            name: "insulation".into(),
            side1: "interface_left".into(),
            side2: "interface_right".into(),
            thickness: spec.insulation,
            caps: [Some("insulation_bottom".into()), Some("insulation_top".into())],
        }),
    })
}

/// Two blocks `left` and `right` separated by the collapsed layer
/// `interface`. Outer curves: `left`, `right`, `bottom`, `top` (the last
/// two spanning both blocks); shell end faces: `cap_bottom`, `cap_top`.
pub fn generate_two_blocks(spec: &TwoBlockGeometry, h_left: f64, h_right: f64) -> Result<Mesh> {
    for (name, v) in [
        ("width_left", spec.width_left),
        ("width_right", spec.width_right),
        ("height", spec.height),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
        }
    }
    if !(spec.layer >= 0.0 && spec.layer.is_finite()) {
        return Err(Error::Geometry(format!("layer must be non-negative, got {}", spec.layer)));
    }
    check_h(h_left, "h_left")?;
    check_h(h_right, "h_right")?;
    let feature = spec.width_left.min(spec.width_right).min(spec.height);
    if h_left.max(h_right) > feature * (1.0 + 1e-12) {
        return Err(Error::Geometry(format!(
            "mesh size {} exceeds the smallest feature {feature}",
            h_left.max(h_right)
        )));
    }
    let mut tags = TagDict::new();
    let rl = tags.declare("left", TagKind::Region);
    let rr = tags.declare("right", TagKind::Region);
    let c_left = tags.declare("left", TagKind::Curve);
    let c_right = tags.declare("right", TagKind::Curve);
    let c_bottom = tags.declare("bottom", TagKind::Curve);
    let c_top = tags.declare("top", TagKind::Curve);
    let if_left = tags.declare("interface_left", TagKind::Curve);
    let if_right = tags.declare("interface_right", TagKind::Curve);
    tags.declare("cap_bottom", TagKind::Curve);
    tags.declare("cap_top", TagKind::Curve);

    let x1 = spec.width_left;
    let x2 = x1 + spec.layer;
    let w = x2 + spec.width_right;
    let hgt = spec.height;
    let blocks = [
        Block {
            x: (0.0, x1),
            y: (0.0, hgt),
            nx: divisions(spec.width_left, h_left),
            ny: divisions(hgt, h_left),
            region: rl,
        },
        Block {
            x: (x2, w),
            y: (0.0, hgt),
            nx: divisions(spec.width_right, h_right),
            ny: divisions(hgt, h_right),
            region: rr,
        },
    ];
    let segments = [
        Segment { curve: c_left, a: [0.0, 0.0], b: [0.0, hgt] },
        Segment { curve: c_right, a: [w, 0.0], b: [w, hgt] },
        Segment { curve: if_left, a: [x1, 0.0], b: [x1, hgt] },
        Segment { curve: if_right, a: [x2, 0.0], b: [x2, hgt] },
        Segment { curve: c_bottom, a: [0.0, 0.0], b: [w, 0.0] },
        Segment { curve: c_top, a: [0.0, hgt], b: [w, hgt] },
    ];
    let mut mesh = build(&blocks, &segments, c_bottom, tags);
    if spec.layer == 0.0 {
        // Touching blocks share nodes only where partitions coincide; keep
        // the two sides topologically separate so each has its own trace.
        mesh = split_interface(mesh, rl, if_left, if_right, x1)?;
    }
    Ok(mesh.with_layer(CollapsedLayer {
        name: "interface".into(),
        side1: "interface_left".into(),
        side2: "interface_right".into(),
        thickness: spec.layer.max(0.0),
        caps: [Some("cap_bottom".into()), Some("cap_top".into())],
    }))
}

/// Duplicates nodes on the line `x = x_line` so that triangles of
/// `left_region` no longer share them with the triangles on the other side,
/// and tags the resulting boundary edges.
fn split_interface(mesh: Mesh, left_region: i32, if_left: i32, if_right: i32, x_line: f64) -> Result<Mesh> {
    let Mesh { mut nodes, mut triangles, mut edges, tags, .. } = mesh;
    let on_line = |p: [f64; 2]| (p[0] - x_line).abs() <= GEOM_TOL;
    let mut copies: HashMap<usize, usize> = HashMap::new();
    for t in triangles.iter_mut().filter(|t| t.region == left_region) {
        for n in t.nodes.iter_mut() {
            if on_line(nodes[*n]) {
                let p = nodes[*n];
                *n = *copies.entry(*n).or_insert_with(|| {
                    nodes.push(p);
                    nodes.len() - 1
                });
            }
        }
    }
    edges.retain(|e| !(on_line(nodes[e.nodes[0]]) && on_line(nodes[e.nodes[1]])));
    for e in &mut edges {
        let mid = 0.5 * (nodes[e.nodes[0]][0] + nodes[e.nodes[1]][0]);
        if mid < x_line {
            for n in e.nodes.iter_mut() {
                if let Some(&c) = copies.get(n) {
                    *n = c;
                }
            }
        }
    }
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t.nodes[k], t.nodes[(k + 1) % 3]);
            if on_line(nodes[a]) && on_line(nodes[b]) {
                let curve = if t.region == left_region { if_left } else { if_right };
                edges.push(BoundaryEdge { nodes: [a, b], curve });
            }
        }
    }
    Ok(Mesh::new(nodes, triangles, edges, tags))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inside(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
        p[0] > lo[0] + GEOM_TOL && p[0] < hi[0] - GEOM_TOL && p[1] > lo[1] + GEOM_TOL && p[1] < hi[1] - GEOM_TOL
    }

    #[test]
    fn unit_square_with_unit_h_is_two_triangles() {
        let mesh = generate_rectangle(1.0, 1.0, 1.0, "domain").unwrap();
        assert_eq!(mesh.nodes().len(), 4);
        assert_eq!(mesh.triangles().len(), 2);
        assert_eq!(mesh.boundary_edges().len(), 4);
        assert!(mesh.validate().is_empty());
    }

    #[test]
    fn structured_counts_match_closed_form() {
        let mesh = generate_rectangle(1.0, 0.5, 0.1, "domain").unwrap();
        let (nx, ny) = (10, 5);
        assert_eq!(mesh.nodes().len(), (nx + 1) * (ny + 1));
        assert_eq!(mesh.triangles().len(), 2 * nx * ny);
        assert_eq!(mesh.boundary_edges().len(), 2 * (nx + ny));
    }

    #[test]
    fn magnet_meshes_are_valid_with_exact_area() {
        let spec = MagnetGeometry::default();
        for mode in [MeshMode::Reference, MeshMode::MortarTsa] {
            let mesh = generate_magnet_geometry(&spec, mode, 2.5e-4, 1e-4).unwrap();
            let report = mesh.validate();
            assert!(report.is_empty(), "{mode}: {report}");
            let mut area = spec.width() * spec.height();
            if mode == MeshMode::MortarTsa {
                area -= spec.insulation * spec.cable_height;
            }
            assert!((mesh.total_area() - area).abs() <= 1e-12 * area, "{mode}");
        }
    }

    #[test]
    fn mortar_mode_has_no_nodes_inside_insulation() {
        let spec = MagnetGeometry::default();
        let (lo, hi) = spec.insulation_rect();
        let tsa = generate_magnet_geometry(&spec, MeshMode::MortarTsa, 2.5e-4, 1e-4).unwrap();
        assert_eq!(tsa.nodes().iter().filter(|&&p| inside(p, lo, hi)).count(), 0);
        let reference = generate_magnet_geometry(&spec, MeshMode::Reference, 2.5e-4, 1e-4).unwrap();
        assert!(reference.nodes().iter().filter(|&&p| inside(p, lo, hi)).count() > 0);
        let ins = reference.region_tag("insulation").unwrap();
        assert!(reference.region_area(ins) > 0.0);
        assert_eq!(tsa.region_area(tsa.region_tag("insulation").unwrap()), 0.0);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let spec = MagnetGeometry { insulation: 0.0, ..Default::default() };
        assert!(generate_magnet_geometry(&spec, MeshMode::Reference, 1e-4, 1e-4).is_err());
        let spec = MagnetGeometry::default();
        assert!(generate_magnet_geometry(&spec, MeshMode::Reference, 1e-3, 1e-4).is_err());
        assert!(generate_magnet_geometry(&spec, MeshMode::Reference, -1.0, 1e-4).is_err());
        assert!(generate_rectangle(1.0, 1.0, 2.0, "d").is_err());
    }

    #[test]
    fn touching_blocks_are_split() {
        let spec = TwoBlockGeometry { layer: 0.0, ..Default::default() };
        let mesh = generate_two_blocks(&spec, 0.25, 0.1).unwrap();
        assert!(mesh.validate().is_empty(), "{}", mesh.validate());
        let il = mesh.curve_tag("interface_left").unwrap();
        let ir = mesh.curve_tag("interface_right").unwrap();
        assert_eq!(mesh.curve_edges(il).count(), 4);
        assert_eq!(mesh.curve_edges(ir).count(), 10);
        let conforming = generate_two_blocks(&spec, 0.25, 0.25).unwrap();
        assert!(conforming.validate().is_empty());
        assert_eq!(conforming.curve_edges(il).count(), 4);
        assert_eq!(conforming.curve_edges(ir).count(), 4);
    }
}
