//! Temperature-dependent thermal properties.
//!
//! Property curves are tabulated `(T, value)` pairs interpolated linearly
//! in `(log T, log value)` and clamped at both ends of the table. The named
//! presets are read from `data/materials.txt`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use crate::{Error, Result};

const PRESET_TABLE: &str = include_str!("../data/materials.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCurve {
    temps: Vec<f64>,
    values: Vec<f64>,
}

impl PropertyCurve {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Material("property curve needs at least one breakpoint".into()));
        }
        for (i, &(t, v)) in points.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Material(format!("breakpoint temperature must be positive, got {t}")));
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Material(format!("property value must be positive, got {v} at T = {t}")));
            }
            if i > 0 && t <= points[i - 1].0 {
                return Err(Error::Material(format!(
                    "breakpoint temperatures must increase strictly ({} then {t})",
                    points[i - 1].0
                )));
            }
        }
        Ok(PropertyCurve {
            temps: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(&[(1.0, value)])
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.temps.iter().copied().zip(self.values.iter().copied())
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || t.is_nan() {
            return Err(Error::Material(format!("temperature must be positive, got {t}")));
        }
        let n = self.temps.len();
        if t <= self.temps[0] {
            return Ok(self.values[0]);
        }
        if t >= self.temps[n - 1] {
            return Ok(self.values[n - 1]);
        }
        let i = self.temps.partition_point(|&x| x <= t) - 1;
        if t == self.temps[i] {
            return Ok(self.values[i]);
        }
        let (t0, t1) = (self.temps[i], self.temps[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let theta = (t / t0).ln() / (t1 / t0).ln();
        Ok(v0 * (v1 / v0).powf(theta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub kappa: PropertyCurve,
    pub c_v: PropertyCurve,
}

impl Material {
    pub fn new(name: impl Into<String>, kappa: PropertyCurve, c_v: PropertyCurve) -> Self {
        Material { name: name.into(), kappa, c_v }
    }

    pub fn constant(kappa: f64, c_v: f64) -> Result<Self> {
        Ok(Material {
            name: format!("constant({kappa}, {c_v})"),
            kappa: PropertyCurve::constant(kappa)?,
            c_v: PropertyCurve::constant(c_v)?,
        })
    }

    /// True if neither property depends on temperature.
    pub fn is_linear(&self) -> bool {
        self.kappa.is_constant() && self.c_v.is_constant()
    }

    pub fn kappa(&self, t: f64) -> Result<f64> {
        self.kappa.eval(t)
    }

    pub fn c_v(&self, t: f64) -> Result<f64> {
        self.c_v.eval(t)
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Names accepted by [`preset`] besides `constant(kappa, c_v)`.
pub const PRESET_NAMES: [&str; 3] = ["nbti_composite", "kapton", "steel"];

static PRESETS: LazyLock<BTreeMap<String, Material>> =
    LazyLock::new(|| parse_table(PRESET_TABLE).expect("bundled material table is valid"));

fn parse_table(text: &str) -> Result<BTreeMap<String, Material>> {
    let mut rows: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("format-version") {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.to_string());
            rows.entry(name.to_string()).or_default();
            continue;
        }
        let name = current
            .as_ref()
            .ok_or_else(|| Error::Material(format!("material table line {}: row outside a section", i + 1)))?;
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Material(format!("material table line {}: {e}", i + 1)))?;
        if cols.len() != 3 {
            return Err(Error::Material(format!("material table line {}: expected 3 columns", i + 1)));
        }
        rows.get_mut(name).unwrap().push((cols[0], cols[1], cols[2]));
    }
    rows.into_iter()
        .map(|(name, r)| {
            let kappa: Vec<(f64, f64)> = r.iter().map(|&(t, k, _)| (t, k)).collect();
            let c_v: Vec<(f64, f64)> = r.iter().map(|&(t, _, c)| (t, c)).collect();
            let m = Material::new(name.clone(), PropertyCurve::new(&kappa)?, PropertyCurve::new(&c_v)?);
            Ok((name, m))
        })
        .collect()
}

/// Looks up a named preset: `nbti_composite`, `kapton`, `steel` or
/// `constant(kappa, c_v)`.
pub fn preset(name: &str) -> Result<Material> {
    let name = name.trim();
    if let Some(args) = name.strip_prefix("constant(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Material(format!("`{name}`: constant() takes kappa and c_v")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Material(format!("`{name}`: invalid number `{s}`")))
        };
        return Material::constant(parse(parts[0])?, parse(parts[1])?);
    }
    PRESETS
        .get(name)
        .cloned()
        .ok_or_else(|| Error::Material(format!("unknown material preset `{name}`")))
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        preset(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_curve() {
        let c = PropertyCurve::new(&[(1.0, 5.0), (500.0, 5.0)]).unwrap();
        assert_eq!(c.eval(77.0).unwrap(), 5.0);
    }

    #[test]
    fn log_log_midpoint() {
        let c = PropertyCurve::new(&[(10.0, 1.0), (1000.0, 100.0)]).unwrap();
        let theta = (100f64.log10() - 10f64.log10()) / (1000f64.log10() - 10f64.log10());
        let expected = 10f64.powf(1f64.log10() + theta * (100f64.log10() - 1f64.log10()));
        assert!((c.eval(100.0).unwrap() - expected).abs() < 1e-13);
        assert!((c.eval(100.0).unwrap() - 10.0).abs() < 1e-13);
    }

    #[test]
    fn clamped_below_and_above() {
        let c = PropertyCurve::new(&[(1.0, 3.0), (10.0, 7.0)]).unwrap();
        assert_eq!(c.eval(0.5).unwrap(), 3.0);
        assert_eq!(c.eval(1e4).unwrap(), 7.0);
        assert!(c.eval(0.0).is_err());
        assert!(c.eval(-1.0).is_err());
        assert!(c.eval(f64::NAN).is_err());
    }

    #[test]
    fn invalid_curves_rejected() {
        assert!(PropertyCurve::new(&[]).is_err());
        assert!(PropertyCurve::new(&[(2.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(PropertyCurve::new(&[(1.0, -1.0)]).is_err());
        assert!(PropertyCurve::new(&[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn constant_preset() {
        let m = preset("constant(1, 1)").unwrap();
        for t in [1.0, 4.2, 300.0] {
            assert_eq!((m.kappa(t).unwrap(), m.c_v(t).unwrap()), (1.0, 1.0));
        }
        assert!(m.is_linear());
        assert!(preset("unobtainium").is_err());
        assert!(preset("constant(1)").is_err());
    }

    #[test]
    fn cable_conducts_much_better_than_insulation() {
        let nbti = preset("nbti_composite").unwrap();
        let kapton = preset("kapton").unwrap();
        assert!(nbti.kappa(4.2).unwrap() / kapton.kappa(4.2).unwrap() > 100.0);
        assert!(!nbti.is_linear());
    }

    #[test]
    fn kapton_conductivity_is_monotone() {
        let kapton = preset("kapton").unwrap();
        let mut prev = 0.0;
        for i in 0..=2960 {
            let t = 4.0 + 0.1 * i as f64;
            let k = kapton.kappa(t).unwrap();
            assert!(k >= prev, "kappa decreases at {t}");
            prev = k;
        }
    }

    #[test]
    fn presets_positive_on_operating_range() {
        for name in PRESET_NAMES {
            let m = preset(name).unwrap();
            for i in 0..=499 {
                let t = 1.0 + i as f64;
                assert!(m.kappa(t).unwrap() > 0.0 && m.c_v(t).unwrap() > 0.0, "{name} at {t}");
            }
        }
    }

    proptest! {
        #[test]
        fn eval_is_bounded_by_neighbouring_breakpoints(t in 1.0f64..500.0) {
            for name in PRESET_NAMES {
                let m = preset(name).unwrap();
                for curve in [&m.kappa, &m.c_v] {
                    let v = curve.eval(t).unwrap();
                    let i = curve.temps.partition_point(|&x| x <= t).clamp(1, curve.temps.len() - 1);
                    let (lo, hi) = if t >= curve.temps[curve.temps.len() - 1] {
                        let last = curve.values[curve.values.len() - 1];
                        (last, last)
                    } else if t <= curve.temps[0] {
                        (curve.values[0], curve.values[0])
                    } else {
                        let (a, b) = (curve.values[i - 1], curve.values[i]);
                        (a.min(b), a.max(b))
                    };
                    prop_assert!(v >= lo * (1.0 - 1e-14) && v <= hi * (1.0 + 1e-14));
                }
            }
        }

        #[test]
        fn eval_is_continuous(t in 1.0f64..499.0) {
            let m = preset("nbti_composite").unwrap();
            let dt = 1e-9;
            let (a, b) = (m.kappa(t).unwrap(), m.kappa(t + dt).unwrap());
            prop_assert!((a - b).abs() <= 1e-5 * a);
        }
    }
}
