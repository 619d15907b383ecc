//! Reported quantities: regional maxima over time, control-line profiles
//! across collapsed interfaces, relative errors and VTK/CSV export.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::{Mesh, TagKind};
use crate::solver::Problem;
use crate::{Error, Result};

/// Floor of the denominator in relative errors.
pub const REL_EPS: f64 = 1e-30;

/// Maximum nodal temperature over the nodes of `region`.
pub fn max_in_region(mesh: &Mesh, volume: &[f64], region: &str) -> Result<f64> {
    let tag = mesh
        .region_tag(region)
        .ok_or_else(|| Error::Postproc(format!("unknown region `{region}`")))?;
    let nodes = mesh.region_nodes(tag);
    if nodes.is_empty() {
        return Err(Error::Postproc(format!("region `{region}` has no nodes")));
    }
    Ok(nodes.iter().map(|&n| volume[n]).fold(f64::NEG_INFINITY, f64::max))
}

/// Where a profile sample comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleSide {
    /// P1 interpolation inside a triangle.
    Volume,
    /// One-sided trace value of an interface (side 1 or 2).
    Trace(u8),
    /// Shell sheet `j`.
    Sheet(usize),
}

impl std::fmt::Display for SampleSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleSide::Volume => f.write_str("volume"),
            SampleSide::Trace(s) => write!(f, "side{s}"),
            SampleSide::Sheet(j) => write!(f, "sheet{j}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSample {
    pub x: f64,
    pub t: f64,
    /// Region of the sampled triangle; for interface samples the curve tag
    /// of the trace (side 1 for sheets).
    pub region_tag: i32,
    pub side: SampleSide,
}

/// Temperatures along the horizontal line `y`, ordered by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    pub y: f64,
    pub samples: Vec<ProfileSample>,
}

impl LineProfile {
    pub fn volume_samples(&self) -> impl Iterator<Item = &ProfileSample> {
        self.samples.iter().filter(|s| s.side == SampleSide::Volume)
    }

    /// Spread of the volume samples in `region_tag`.
    pub fn variation(&self, region_tag: i32) -> Option<f64> {
        let vals: Vec<f64> = self.volume_samples().filter(|s| s.region_tag == region_tag).map(|s| s.t).collect();
        if vals.is_empty() {
            return None;
        }
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max - min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,T,region_tag,side\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.16e},{:.16e},{},{}", s.x, s.t, s.region_tag, s.side);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::Postproc(format!("profile line {}: malformed `{line}`", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let side = match f[3] {
                "volume" => SampleSide::Volume,
                s if s.starts_with("side") => SampleSide::Trace(s[4..].parse().map_err(|_| bad())?),
                s if s.starts_with("sheet") => SampleSide::Sheet(s[5..].parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            };
            samples.push(ProfileSample {
                x: f[0].parse().map_err(|_| bad())?,
                t: f[1].parse().map_err(|_| bad())?,
                region_tag: f[2].parse().map_err(|_| bad())?,
                side,
            });
        }
        Ok(LineProfile { y: f64::NAN, samples })
    }
}

fn barycentric(c: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let l1 = ((p[0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (p[1] - c[0][1])) / det;
    let l2 = ((c[1][0] - c[0][0]) * (p[1] - c[0][1]) - (p[0] - c[0][0]) * (c[1][1] - c[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Samples the solution `x` of `problem` on `n_samples` equally spaced
/// points of the line `y` across the bounding box, plus both trace values
/// and all sheet values wherever the line crosses a collapsed interface.
pub fn sample_line(problem: &Problem, x: &[f64], y: f64, n_samples: usize) -> Result<LineProfile> {
    let mesh = problem.mesh();
    let (lo, hi) = mesh.bounding_box();
    if !(y >= lo[1] && y <= hi[1]) {
        return Err(Error::Postproc(format!("line y = {y} lies outside the domain [{}, {}]", lo[1], hi[1])));
    }
    if n_samples < 2 {
        return Err(Error::Postproc("a profile needs at least two samples".into()));
    }
    let tol = 1e-12 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let candidates: Vec<usize> = (0..mesh.triangles().len())
        .filter(|&i| {
            let c = mesh.triangle_coords(&mesh.triangles()[i]);
            let (a, b) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
            y >= a - tol && y <= b + tol
        })
        .collect();
    let vol = problem.volume_values(x);
    let mut samples = Vec::new();
    for i in 0..n_samples {
        let px = lo[0] + (hi[0] - lo[0]) * i as f64 / (n_samples - 1) as f64;
        let p = [px, y];
        let hit = candidates.iter().find_map(|&ti| {
            let t = &mesh.triangles()[ti];
            let l = barycentric(mesh.triangle_coords(t), p);
            l.iter().all(|&v| v >= -1e-12).then_some((t, l))
        });
        if let Some((t, l)) = hit {
            let value = (0..3).map(|k| l[k] * vol[t.nodes[k]]).sum();
            samples.push(ProfileSample { x: px, t: value, region_tag: t.region, side: SampleSide::Volume });
        }
    }
    for (i, iface) in problem.interfaces().iter().enumerate() {
        let g = &iface.traces.gamma_hat;
        let Some((seg, s)) = (0..g.segments()).find_map(|k| {
            let (a, b) = (g.points[k][1] - y, g.points[k + 1][1] - y);
            (a * b <= 0.0 && a != b).then(|| (k, g.s[k] + a / (a - b) * g.segment_length(k)))
        }) else {
            continue;
        };
        let gp = g.point_at(s);
        let n = iface.traces.normals[seg];
        let scale = iface.traces.offset / iface.stack.total_thickness();
        let sheets = problem.sheet_values(x, i);
        for (j, w) in iface.stack.breakpoints().into_iter().enumerate() {
            samples.push(ProfileSample {
                x: gp[0] + w * scale * n[0],
                t: g.interpolate(&sheets[j], s),
                region_tag: iface.traces.side1.curve,
                side: SampleSide::Sheet(j),
            });
        }
        for side in 0..2 {
            let tr = iface.external(side);
            let values: Vec<f64> = tr.node_ids.iter().map(|&id| vol[id]).collect();
            samples.push(ProfileSample {
                x: tr.point_at(s)[0],
                t: tr.interpolate(&values, s),
                region_tag: tr.curve,
                side: SampleSide::Trace(side as u8 + 1),
            });
        }
    }
    let rank = |s: &SampleSide| match s {
        SampleSide::Trace(1) => 0,
        SampleSide::Volume => 1,
        SampleSide::Sheet(j) => 2 + *j,
        SampleSide::Trace(_) => usize::MAX,
    };
    samples.sort_by(|a, b| a.x.total_cmp(&b.x).then(rank(&a.side).cmp(&rank(&b.side))));
    Ok(LineProfile { y, samples })
}

/// Pointwise `|a - b| / max(|b|, ε)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Postproc("relative error of an empty series".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Postproc(format!("series lengths differ ({} vs {})", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(REL_EPS)).collect())
}

/// Largest relative error between the volume samples of two profiles at
/// identical positions; `b` is the reference.
pub fn profile_error(a: &LineProfile, b: &LineProfile) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for sa in a.volume_samples() {
        if let Some(sb) = b.volume_samples().find(|sb| sb.x == sa.x) {
            let e = (sa.t - sb.t).abs() / sb.t.abs().max(REL_EPS);
            worst = Some(worst.map_or(e, |w: f64| w.max(e)));
        }
    }
    worst.ok_or_else(|| Error::Postproc("profiles share no sample positions".into()))
}

/// Regional maxima per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub picard_iters: Vec<usize>,
}

impl TimeSeries {
    pub fn new(regions: &[String]) -> Self {
        TimeSeries {
            names: regions.iter().map(|r| format!("T_max_{r}")).collect(),
            times: Vec::new(),
            values: Vec::new(),
            picard_iters: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, values: Vec<f64>, picard_iters: usize) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Postproc("record does not match the series columns".into()));
        }
        if self.times.last().is_some_and(|&t| time <= t) {
            return Err(Error::Postproc(format!("time {time} does not increase")));
        }
        self.times.push(time);
        self.values.push(values);
        self.picard_iters.push(picard_iters);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|v| v[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",picard_iters\n");
        for ((t, v), it) in self.times.iter().zip(&self.values).zip(&self.picard_iters) {
            let _ = write!(out, "{t:.16e}");
            for x in v {
                let _ = write!(out, ",{x:.16e}");
            }
            let _ = writeln!(out, ",{it}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::Postproc("empty time series".into()))?.split(',').collect();
        if header.len() < 2 || header[0] != "time" || header[header.len() - 1] != "picard_iters" {
            return Err(Error::Postproc("unexpected time series header".into()));
        }
        let mut series = TimeSeries {
            names: header[1..header.len() - 1].iter().map(|s| s.to_string()).collect(),
            times: Vec::new(),
            values: Vec::new(),
            picard_iters: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let bad = || Error::Postproc(format!("time series line {}: malformed `{line}`", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != header.len() {
                return Err(bad());
            }
            let nums: Vec<f64> = f[..f.len() - 1].iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
            series.push(nums[0], nums[1..].to_vec(), f[f.len() - 1].parse().map_err(|_| bad())?)?;
        }
        Ok(series)
    }
}

/// Legacy ASCII VTK of the volume field.
pub fn vtk_string(mesh: &Mesh, values: &[f64]) -> String {
    let mut out = String::from("# vtk DataFile Version 3.0\ntemperature\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.nodes().len());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let nt = mesh.triangles().len();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for t in mesh.triangles() {
        let _ = writeln!(out, "{}", t.region);
    }
    point_data(&mut out, values);
    out
}

fn point_data(out: &mut String, values: &[f64]) {
    let _ = writeln!(out, "POINT_DATA {}\nSCALARS T double 1\nLOOKUP_TABLE default", values.len());
    for v in values {
        let _ = writeln!(out, "{v:.16e}");
    }
}

/// One polyline dataset for sheet `j` of interface `i`, at its physical
/// position.
pub fn sheet_vtk_string(problem: &Problem, x: &[f64], i: usize, j: usize) -> String {
    let iface = &problem.interfaces()[i];
    let values = &problem.sheet_values(x, i)[j];
    let m = values.len();
    let mut out = format!("# vtk DataFile Version 3.0\n{} sheet {j}\nASCII\nDATASET UNSTRUCTURED_GRID\n", iface.name);
    let _ = writeln!(out, "POINTS {m} double");
    for k in 0..m {
        let p = iface.sheet_point(j, k);
        let _ = writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS 1 {}", m + 1);
    let ids: Vec<String> = (0..m).map(|k| k.to_string()).collect();
    let _ = writeln!(out, "{m} {}", ids.join(" "));
    out.push_str("CELL_TYPES 1\n4\n");
    point_data(&mut out, values);
    out
}

/// Writes the volume field to `path` and each sheet to
/// `<stem>_<interface>_sheet<j>.vtk` beside it. Returns all written files.
pub fn export_fields(problem: &Problem, x: &[f64], path: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = vec![path.to_path_buf()];
    std::fs::write(path, vtk_string(problem.mesh(), problem.volume_values(x))).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    for (i, iface) in problem.interfaces().iter().enumerate() {
        for j in 0..iface.stack.sheets() {
            let p = path.with_file_name(format!("{stem}_{}_sheet{j}.vtk", iface.name));
            std::fs::write(&p, sheet_vtk_string(problem, x, i, j)).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Point count and point temperatures of a legacy VTK file.
pub fn read_vtk_point_data(text: &str) -> Result<(usize, Vec<f64>)> {
    let bad = |m: &str| Error::Postproc(format!("VTK: {m}"));
    let mut lines = text.lines();
    let mut n_points = None;
    while let Some(line) = lines.next() {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.first() {
            Some(&"POINTS") => n_points = Some(f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad POINTS"))?),
            Some(&"POINT_DATA") => {
                let n: usize = f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad POINT_DATA"))?;
                lines.next();
                lines.next();
                let values: Vec<f64> = lines
                    .by_ref()
                    .take(n)
                    .map(|l| l.trim().parse().map_err(|_| bad("bad value")))
                    .collect::<Result<_>>()?;
                if values.len() != n {
                    return Err(bad("truncated POINT_DATA"));
                }
                return Ok((n_points.ok_or_else(|| bad("POINT_DATA before POINTS"))?, values));
            }
            _ => {}
        }
    }
    Err(bad("no POINT_DATA section"))
}

/// Region tag by name, for profile analysis.
pub fn region_tag(mesh: &Mesh, name: &str) -> Result<i32> {
    mesh.tags()
        .tag(name, TagKind::Region)
        .ok_or_else(|| Error::Postproc(format!("unknown region `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{BoundaryCondition, RegionTable};
    use crate::materials::Material;
    use crate::mesh::generate_rectangle;

    fn unit_problem(h: f64) -> Problem {
        let mesh = generate_rectangle(1.0, 1.0, h, "body").unwrap();
        let mut regions = RegionTable::new();
        regions.insert(mesh.region_tag("body").unwrap(), Material::constant(1.0, 1.0).unwrap(), 0.0);
        Problem::new(mesh, regions, vec![BoundaryCondition::adiabatic("left")], vec![]).unwrap()
    }

    #[test]
    fn region_maxima() {
        let p = unit_problem(0.25);
        let uniform = vec![3.5; p.mesh().nodes().len()];
        assert_eq!(max_in_region(p.mesh(), &uniform, "body").unwrap(), 3.5);
        let x: Vec<f64> = p.mesh().nodes().iter().map(|q| q[0]).collect();
        assert_eq!(max_in_region(p.mesh(), &x, "body").unwrap(), 1.0);
        assert!(max_in_region(p.mesh(), &x, "nowhere").is_err());
    }

    #[test]
    fn linear_field_sampled_exactly() {
        let p = unit_problem(0.2);
        let x: Vec<f64> = p.mesh().nodes().iter().map(|q| 2.0 + 3.0 * q[0] - q[1]).collect();
        let prof = sample_line(&p, &x, 0.37, 41).unwrap();
        assert_eq!(prof.samples.len(), 41);
        for s in &prof.samples {
            assert!((s.t - (2.0 + 3.0 * s.x - 0.37)).abs() < 1e-13);
        }
        assert!(prof.samples.windows(2).all(|w| w[0].x < w[1].x));
        assert!(sample_line(&p, &x, 1.5, 10).is_err());
        let back = LineProfile::from_csv(&prof.to_csv()).unwrap();
        assert_eq!(back.samples, prof.samples);
    }

    #[test]
    fn relative_errors() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let e = relative_error(&[2.002], &[2.0]).unwrap()[0];
        assert!((e - 1e-3).abs() < 1e-15);
        assert!(relative_error(&[], &[]).is_err());
        assert!(relative_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn time_series_round_trip() {
        let mut ts = TimeSeries::new(&["right_cable".into(), "left_cable".into()]);
        ts.push(0.0, vec![4.2, 4.2], 0).unwrap();
        ts.push(0.01, vec![4.25, 1.0 / 3.0], 3).unwrap();
        assert!(ts.push(0.01, vec![1.0, 1.0], 1).is_err());
        let csv = ts.to_csv();
        assert!(csv.starts_with("time,T_max_right_cable,T_max_left_cable,picard_iters\n"));
        assert_eq!(TimeSeries::from_csv(&csv).unwrap(), ts);
    }

    #[test]
    fn vtk_two_triangles() {
        let mesh = generate_rectangle(1.0, 1.0, 1.0, "body").unwrap();
        let values = vec![1.0 / 3.0, 2.0, std::f64::consts::PI, 4.0];
        let text = vtk_string(&mesh, &values);
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        let (n, back) = read_vtk_point_data(&text).unwrap();
        assert_eq!(n, 4);
        assert_eq!(back, values);
    }
}
