//! TOML problem configuration: schema, validation, dotted-path overrides,
//! hashing and problem construction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{BoundaryCondition, BcKind, DirichletValue, RegionTable};
use crate::materials::{preset, Material, PropertyCurve};
use crate::mesh::{
    generate_magnet_geometry, generate_rectangle, generate_two_blocks, load_msh, CollapsedLayer, MagnetGeometry, Mesh,
    MeshMode, TwoBlockGeometry,
};
use crate::solver::{EliminateSide, Problem, TransientConfig, TsaInterfaceSpec};
use crate::tsa::TsaStack;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Magnet,
    TwoBlocks,
    Rectangle,
    Msh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleConfig {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_region")]
    pub region: String,
}

fn default_region() -> String {
    "body".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub name: String,
    pub side1: String,
    pub side2: String,
    pub thickness: f64,
    #[serde(default)]
    pub caps: [Option<String>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MshConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub layers: Vec<LayerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Mesh size of the left (coarser) part.
    pub h_left: f64,
    /// Mesh size of the right part.
    pub h_right: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnet: Option<MagnetGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_blocks: Option<TwoBlockGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rectangle: Option<RectangleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msh: Option<MshConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_v: Option<f64>,
    /// `[[T, kappa], ...]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_table: Option<Vec<[f64; 2]>>,
    /// `[[T, c_v], ...]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_v_table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub name: String,
    pub material: String,
    #[serde(default)]
    pub source: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Adiabatic,
    Robin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub curve: String,
    pub kind: BoundaryKind,
    /// Dirichlet value, a number or `{ t0, gx, gy }`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<DirichletValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsaConfig {
    pub layer: String,
    /// Number of shell layers when `thicknesses` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    /// Per-layer thicknesses; defaults to equal splits of the layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thicknesses: Option<Vec<f64>>,
    /// One material for all layers, or `materials` per layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materials: Option<Vec<String>>,
    #[serde(default)]
    pub source: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eliminate: Option<EliminateSide>,
    #[serde(default = "yes")]
    pub capacity: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Height of the horizontal control line; defaults to the mid-height
    /// of the magnet cables or of the domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_y: Option<f64>,
    pub profile_samples: usize,
    pub profile_times: Vec<f64>,
    pub vtk_times: Vec<f64>,
    pub monitor: Vec<String>,
    /// Threshold used by `compare` unless given on the command line.
    pub threshold: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            profile_y: None,
            profile_samples: 401,
            profile_times: Vec::new(),
            vtk_times: Vec::new(),
            monitor: vec!["right_cable".into(), "left_cable".into()],
            threshold: 2e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mode: MeshMode,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialConfig>,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub boundaries: Vec<BoundaryConfig>,
    #[serde(default)]
    pub tsa: Vec<TsaConfig>,
    #[serde(default)]
    pub solver: TransientConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

/// Parses a command-line value as a TOML value, falling back to a string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets `path` (dot separated, numeric parts index arrays) in `root`.
fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{path}`: empty key segment")));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(part.to_string(), value);
                    return Ok(());
                }
                t.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("override `{path}`: `{part}` is not an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("override `{path}`: index {idx} out of range ({len} entries)")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("override `{path}`: `{part}` is not inside a table"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text` after applying `key=value` overrides.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = toml::from_str::<toml::Table>(text)
            .map(toml::Value::Table)
            .map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form key=value")))?;
            set_path(&mut value, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: ProblemConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_with(&text, overrides)?;
        if let Some(msh) = &mut cfg.geometry.msh {
            if msh.path.is_relative() {
                if let Some(dir) = path.parent() {
                    msh.path = dir.join(&msh.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256(&self.to_toml()?))
    }

    /// SHA-256 of the geometry without mesh sizes, so runs of the same
    /// domain in either mode or resolution compare.
    pub fn geometry_hash(&self) -> Result<String> {
        let mut g = self.geometry.clone();
        g.h_left = 0.0;
        g.h_right = 0.0;
        Ok(sha256(&toml::to_string(&g).map_err(|e| Error::Config(e.to_string()))?))
    }

    /// Checks references between sections; messages name the key.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let present = [
            (GeometryKind::Magnet, g.magnet.is_some(), "magnet"),
            (GeometryKind::TwoBlocks, g.two_blocks.is_some(), "two_blocks"),
            (GeometryKind::Rectangle, g.rectangle.is_some(), "rectangle"),
            (GeometryKind::Msh, g.msh.is_some(), "msh"),
        ];
        for (kind, set, key) in present {
            if set && kind != g.kind {
                return Err(Error::Config(format!("geometry.{key} given but geometry.kind is not `{key}`")));
            }
        }
        if g.kind == GeometryKind::Rectangle && g.rectangle.is_none() {
            return Err(Error::Config("geometry.rectangle: missing width and height".into()));
        }
        if g.kind == GeometryKind::Msh && g.msh.is_none() {
            return Err(Error::Config("geometry.msh: missing path".into()));
        }
        for (key, h) in [("geometry.h_left", g.h_left), ("geometry.h_right", g.h_right)] {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("{key}: mesh size must be positive, got {h}")));
            }
        }
        for (name, m) in &self.materials {
            self.resolve_material_config(name, m)?;
        }
        for (i, r) in self.regions.iter().enumerate() {
            self.material(&r.material).map_err(|e| Error::Config(format!("regions[{i}].material: {e}")))?;
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            b.to_condition().map_err(|e| Error::Config(format!("boundaries[{i}]: {e}")))?;
        }
        for (i, t) in self.tsa.iter().enumerate() {
            for m in t.material.iter().chain(t.materials.iter().flatten()) {
                self.material(m).map_err(|e| Error::Config(format!("tsa[{i}].material: {e}")))?;
            }
        }
        for (i, r) in self.output.monitor.iter().enumerate() {
            if !self.regions.iter().any(|reg| &reg.name == r) {
                return Err(Error::Config(format!("output.monitor[{i}]: no region `{r}` is configured")));
            }
        }
        self.solver.check().map_err(|e| Error::Config(format!("solver: {e}")))?;
        self.solver.steps().map_err(|e| Error::Config(format!("solver: {e}")))?;
        Ok(())
    }

    fn resolve_material_config(&self, name: &str, m: &MaterialConfig) -> Result<Material> {
        let err = |msg: String| Error::Config(format!("materials.{name}: {msg}"));
        let curve = |c: Option<f64>, table: &Option<Vec<[f64; 2]>>, prop: &str| -> Result<PropertyCurve> {
            match (c, table) {
                (Some(v), None) => PropertyCurve::constant(v),
                (None, Some(t)) => PropertyCurve::new(&t.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>()),
                _ => Err(Error::Config(format!("give exactly one of `{prop}` and `{prop}_table`"))),
            }
            .map_err(|e| err(e.to_string()))
        };
        if let Some(p) = &m.preset {
            if m.kappa.is_some() || m.c_v.is_some() || m.kappa_table.is_some() || m.c_v_table.is_some() {
                return Err(err("`preset` excludes explicit properties".into()));
            }
            let mut mat = preset(p).map_err(|e| err(e.to_string()))?;
            mat.name = name.to_string();
            return Ok(mat);
        }
        Ok(Material::new(name, curve(m.kappa, &m.kappa_table, "kappa")?, curve(m.c_v, &m.c_v_table, "c_v")?))
    }

    /// A material by its configured name, or a preset name.
    pub fn material(&self, name: &str) -> Result<Material> {
        match self.materials.get(name) {
            Some(m) => self.resolve_material_config(name, m),
            None => preset(name).map_err(|_| Error::Config(format!("unknown material `{name}`"))),
        }
    }

    pub fn build_mesh(&self, mode: MeshMode) -> Result<Mesh> {
        let g = &self.geometry;
        match g.kind {
            GeometryKind::Magnet => generate_magnet_geometry(&g.magnet.unwrap_or_default(), mode, g.h_left, g.h_right),
            GeometryKind::TwoBlocks => generate_two_blocks(&g.two_blocks.unwrap_or_default(), g.h_left, g.h_right),
            GeometryKind::Rectangle => {
                let r = g.rectangle.as_ref().expect("validated");
                generate_rectangle(r.width, r.height, g.h_left, &r.region)
            }
            GeometryKind::Msh => {
                let m = g.msh.as_ref().expect("validated");
                let mut mesh = load_msh(&m.path)?;
                for l in &m.layers {
                    mesh = mesh.with_layer(CollapsedLayer {
                        name: l.name.clone(),
                        side1: l.side1.clone(),
                        side2: l.side2.clone(),
                        thickness: l.thickness,
                        caps: l.caps.clone(),
                    });
                }
                Ok(mesh)
            }
        }
    }

    /// Default control-line height.
    pub fn profile_y(&self, mesh: &Mesh) -> f64 {
        if let Some(y) = self.output.profile_y {
            return y;
        }
        match self.geometry.kind {
            GeometryKind::Magnet => self.geometry.magnet.unwrap_or_default().cable_mid_height(),
            _ => {
                let (lo, hi) = mesh.bounding_box();
                0.5 * (lo[1] + hi[1])
            }
        }
    }

    fn stack(&self, t: &TsaConfig, thickness: f64, index: usize) -> Result<TsaStack> {
        let key = |k: &str| format!("tsa[{index}].{k}");
        let thicknesses = match (&t.thicknesses, t.layers) {
            (Some(th), None) => th.clone(),
            (Some(th), Some(n)) if th.len() == n => th.clone(),
            (Some(th), Some(n)) => {
                return Err(Error::Config(format!("{}: {} thicknesses for {n} layers", key("thicknesses"), th.len())))
            }
            (None, Some(n)) if n > 0 => vec![thickness / n as f64; n],
            (None, _) => return Err(Error::Config(format!("{}: give `layers` or `thicknesses`", key("layers")))),
        };
        let materials: Vec<Material> = match (&t.material, &t.materials) {
            (Some(m), None) => vec![self.material(m)?; thicknesses.len()],
            (None, Some(ms)) if ms.len() == thicknesses.len() => {
                ms.iter().map(|m| self.material(m)).collect::<Result<_>>()?
            }
            (None, Some(ms)) => {
                return Err(Error::Config(format!("{}: {} materials for {} layers", key("materials"), ms.len(), thicknesses.len())))
            }
            _ => return Err(Error::Config(format!("{}: give exactly one of `material` and `materials`", key("material")))),
        };
        let n = thicknesses.len();
        let mut stack = TsaStack::new(thicknesses, materials, vec![t.source; n]).map_err(|e| Error::Config(format!("tsa[{index}]: {e}")))?;
        if !t.capacity {
            stack = stack.without_capacity();
        }
        Ok(stack)
    }

    /// Assembles the discrete problem in `mode`.
    pub fn build_problem(&self, mode: MeshMode) -> Result<Problem> {
        let mesh = self.build_mesh(mode)?;
        self.build_problem_on(mesh, mode)
    }

    /// Assembles the discrete problem on an already built mesh.
    pub fn build_problem_on(&self, mesh: Mesh, mode: MeshMode) -> Result<Problem> {
        let mut regions = RegionTable::new();
        for (i, r) in self.regions.iter().enumerate() {
            match mesh.region_tag(&r.name) {
                Some(tag) => regions.insert(tag, self.material(&r.material)?, r.source),
                None if mesh.collapsed_layer(&r.name).is_some() => {}
                None if mode == MeshMode::MortarTsa && self.tsa.iter().any(|t| t.layer == r.name) => {}
                None => return Err(Error::Config(format!("regions[{i}].name: mesh has no region `{}`", r.name))),
            }
        }
        let bcs = self
            .boundaries
            .iter()
            .enumerate()
            .map(|(i, b)| b.to_condition().map_err(|e| Error::Config(format!("boundaries[{i}]: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut tsa = Vec::new();
        for layer in mesh.collapsed_layers() {
            let (index, t) = self
                .tsa
                .iter()
                .enumerate()
                .find(|(_, t)| t.layer == layer.name)
                .ok_or_else(|| Error::Config(format!("tsa: no entry for collapsed layer `{}`", layer.name)))?;
            tsa.push(TsaInterfaceSpec {
                layer: layer.name.clone(),
                stack: self.stack(t, layer.thickness, index)?,
                eliminate: t.eliminate,
            });
        }
        Problem::new(mesh, regions, bcs, tsa)
    }
}

impl BoundaryConfig {
    pub fn to_condition(&self) -> Result<BoundaryCondition> {
        let kind = match self.kind {
            BoundaryKind::Dirichlet => {
                if self.h.is_some() || self.t_ref.is_some() {
                    return Err(Error::Config(format!("curve `{}`: Dirichlet takes only `value`", self.curve)));
                }
                BcKind::Dirichlet(
                    self.value
                        .ok_or_else(|| Error::Config(format!("curve `{}`: Dirichlet needs `value`", self.curve)))?,
                )
            }
            BoundaryKind::Robin => {
                let (Some(h), Some(t_ref)) = (self.h, self.t_ref) else {
                    return Err(Error::Config(format!("curve `{}`: Robin needs `h` and `t_ref`", self.curve)));
                };
                if self.value.is_some() {
                    return Err(Error::Config(format!("curve `{}`: Robin takes no `value`", self.curve)));
                }
                BcKind::Robin { h, t_ref }
            }
            BoundaryKind::Adiabatic => {
                if self.value.is_some() || self.h.is_some() || self.t_ref.is_some() {
                    return Err(Error::Config(format!("curve `{}`: adiabatic takes no data", self.curve)));
                }
                BcKind::Adiabatic
            }
        };
        Ok(BoundaryCondition { curve: self.curve.clone(), kind })
    }
}
