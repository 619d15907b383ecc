//! ASCII MSH 2.2 subset: 2-node lines and 3-node triangles with physical tags.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BoundaryEdge, Mesh, TagDict, TagKind, Triangle};
use crate::{Error, Result};

struct Lines<'a> {
    path: PathBuf,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::MshParse { path: self.path.clone(), line: self.line, message: message.into() }
    }

    fn next(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        let l = self.next()?;
        if l != token {
            return Err(self.err(format!("expected `{token}`, found `{l}`")));
        }
        Ok(())
    }

    fn count(&mut self) -> Result<usize> {
        let l = self.next()?;
        l.parse().map_err(|_| self.err(format!("expected a count, found `{l}`")))
    }

    fn parse<T: std::str::FromStr>(&self, token: Option<&str>, what: &str) -> Result<T> {
        let token = token.ok_or_else(|| self.err(format!("missing {what}")))?;
        token.parse().map_err(|_| self.err(format!("invalid {what} `{token}`")))
    }
}

/// Reads an MSH 2.2 ASCII file.
pub fn load_msh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text, path)
}

/// Parses MSH 2.2 ASCII text; `path` is only used in error messages.
pub fn parse_msh(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let mut lines = Lines { path: path.as_ref().to_path_buf(), inner: text.lines().enumerate(), line: 0 };
    let mut tags: Option<TagDict> = None;
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut raw_elements: Vec<(usize, i64, i32, Vec<u64>)> = Vec::new();
    let mut seen_format = false;
    let mut seen_nodes = false;
    let mut seen_elements = false;

    loop {
        let header = match lines.next() {
            Ok(h) => h,
            Err(_) if seen_format => break,
            Err(e) => return Err(e),
        };
        match header {
            "$MeshFormat" => {
                let l = lines.next()?;
                let mut it = l.split_whitespace();
                let version = it.next().unwrap_or("");
                if version != "2.2" {
                    return Err(lines.err(format!("unsupported format version `{version}` (expected 2.2)")));
                }
                if it.next() != Some("0") {
                    return Err(lines.err("only ASCII (file-type 0) is supported"));
                }
                if it.next() != Some("8") {
                    return Err(lines.err("data-size must be 8"));
                }
                lines.expect("$EndMeshFormat")?;
                seen_format = true;
            }
            "$PhysicalNames" => {
                let n = lines.count()?;
                let mut dict = TagDict::new();
                for _ in 0..n {
                    let l = lines.next()?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let dim: u8 = lines.parse(it.next(), "physical dimension")?;
                    let tag: i32 = lines.parse(it.next(), "physical tag")?;
                    let name = it.next().map(str::trim).unwrap_or("");
                    let name = name.strip_prefix('"').and_then(|s| s.strip_suffix('"')).ok_or_else(|| {
                        lines.err(format!("physical name must be quoted, found `{name}`"))
                    })?;
                    let kind = match dim {
                        1 => TagKind::Curve,
                        2 => TagKind::Region,
                        d => return Err(lines.err(format!("unsupported physical dimension {d}"))),
                    };
                    dict.insert(name, kind, tag).map_err(|e| lines.err(e.to_string()))?;
                }
                lines.expect("$EndPhysicalNames")?;
                tags = Some(dict);
            }
            "$Nodes" => {
                let n = lines.count()?;
                nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.next()?;
                    let mut it = l.split_whitespace();
                    let id: u64 = lines.parse(it.next(), "node id")?;
                    let x: f64 = lines.parse(it.next(), "x coordinate")?;
                    let y: f64 = lines.parse(it.next(), "y coordinate")?;
                    let z: f64 = lines.parse(it.next(), "z coordinate")?;
                    if z != 0.0 {
                        return Err(lines.err("only planar meshes (z = 0) are supported"));
                    }
                    if node_index.insert(id, nodes.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    nodes.push([x, y]);
                }
                lines.expect("$EndNodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                let n = lines.count()?;
                for _ in 0..n {
                    let l = lines.next()?;
                    let mut it = l.split_whitespace();
                    let _id: u64 = lines.parse(it.next(), "element id")?;
                    let kind: i64 = lines.parse(it.next(), "element type")?;
                    let ntags: usize = lines.parse(it.next(), "tag count")?;
                    let expected = match kind {
                        1 => 2,
                        2 => 3,
                        other => return Err(lines.err(format!("unsupported element type {other}"))),
                    };
                    if ntags == 0 {
                        return Err(lines.err("element without physical tag"));
                    }
                    let physical: i32 = lines.parse(it.next(), "physical tag")?;
                    for _ in 1..ntags {
                        let _: i64 = lines.parse(it.next(), "element tag")?;
                    }
                    let ids: Vec<u64> =
                        (0..expected).map(|_| lines.parse(it.next(), "element node")).collect::<Result<_>>()?;
                    if it.next().is_some() {
                        return Err(lines.err("too many entries on element line"));
                    }
                    raw_elements.push((lines.line, kind, physical, ids));
                }
                lines.expect("$EndElements")?;
                seen_elements = true;
            }
            other if other.starts_with('$') => {
                return Err(lines.err(format!("unsupported section `{other}`")));
            }
            other => return Err(lines.err(format!("unexpected line `{other}`"))),
        }
    }
    let tags = tags.ok_or_else(|| lines.err("missing $PhysicalNames section"))?;
    if !seen_nodes || !seen_elements {
        return Err(lines.err("missing $Nodes or $Elements section"));
    }
    let mut triangles = Vec::new();
    let mut edges = Vec::new();
    for (line, kind, physical, ids) in raw_elements {
        let map = |id: &u64| {
            node_index.get(id).copied().ok_or_else(|| Error::MshParse {
                path: lines.path.clone(),
                line,
                message: format!("element references unknown node {id}"),
            })
        };
        let ids: Vec<usize> = ids.iter().map(map).collect::<Result<_>>()?;
        let (tag_kind, what) = if kind == 2 { (TagKind::Region, "region") } else { (TagKind::Curve, "curve") };
        if !tags.contains(tag_kind, physical) {
            return Err(Error::MshParse {
                path: lines.path.clone(),
                line,
                message: format!("{what} tag {physical} not declared in $PhysicalNames"),
            });
        }
        if kind == 2 {
            triangles.push(Triangle { nodes: [ids[0], ids[1], ids[2]], region: physical });
        } else {
            edges.push(BoundaryEdge { nodes: [ids[0], ids[1]], curve: physical });
        }
    }
    Ok(Mesh::new(nodes, triangles, edges, tags))
}

/// Serializes the mesh in the same MSH 2.2 subset. Coordinates are written
/// with 17 significant digits.
pub fn write_msh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$PhysicalNames\n{}", mesh.tags().len());
    for e in mesh.tags().iter() {
        let _ = writeln!(out, "{} {} \"{}\"", e.kind.dim(), e.tag, e.name);
    }
    out.push_str("$EndPhysicalNames\n");
    let _ = writeln!(out, "$Nodes\n{}", mesh.nodes().len());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(out, "{} {:.16e} {:.16e} 0", i + 1, p[0], p[1]);
    }
    out.push_str("$EndNodes\n");
    let total = mesh.boundary_edges().len() + mesh.triangles().len();
    let _ = writeln!(out, "$Elements\n{total}");
    let mut id = 0;
    for e in mesh.boundary_edges() {
        id += 1;
        let _ = writeln!(out, "{id} 1 2 {c} {c} {} {}", e.nodes[0] + 1, e.nodes[1] + 1, c = e.curve);
    }
    for t in mesh.triangles() {
        id += 1;
        let [a, b, c] = t.nodes;
        let _ = writeln!(out, "{id} 2 2 {r} {r} {} {} {}", a + 1, b + 1, c + 1, r = t.region);
    }
    out.push_str("$EndElements\n");
    out
}
