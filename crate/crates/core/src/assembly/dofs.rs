//! Global numbering of volume temperatures, shell sheets and multipliers.
//!
//! Families are laid out contiguously: all volume DoFs (one per mesh node,
//! numbered like the nodes), then the sheets of every interface, then the
//! multipliers of every interface side.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofFamily {
    Volume,
    Sheet { interface: usize, sheet: usize },
    Multiplier { interface: usize, side: usize },
}

/// Sizes of one collapsed interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceDofSpec {
    pub layers: usize,
    pub trace_nodes: usize,
    /// Volume DoFs that replace sheet 0 (index 0) or sheet N (index 1)
    /// when that side is eliminated.
    pub alias: [Option<Vec<usize>>; 2],
    /// Multiplier counts for side 1 and side 2.
    pub multipliers: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
struct InterfaceDofs {
    layers: usize,
    trace_nodes: usize,
    /// Global DoF of sheet `j` at trace node `i`, stored at `j * m + i`.
    sheets: Vec<usize>,
    own_sheets: Range<usize>,
    multipliers: [Range<usize>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n_volume: usize,
    interfaces: Vec<InterfaceDofs>,
    sheet_offset: usize,
    multiplier_offset: usize,
    total: usize,
    dirichlet: Vec<bool>,
}

impl DofMap {
    pub fn new(n_volume: usize, specs: &[InterfaceDofSpec]) -> Self {
        let mut next = n_volume;
        let mut interfaces = Vec::with_capacity(specs.len());
        for spec in specs {
            let m = spec.trace_nodes;
            let start = next;
            let mut sheets = vec![usize::MAX; (spec.layers + 1) * m];
            for j in 0..=spec.layers {
                let alias = match j {
                    0 => spec.alias[0].as_ref(),
                    j if j == spec.layers => spec.alias[1].as_ref(),
                    _ => None,
                };
                for i in 0..m {
                    sheets[j * m + i] = match alias {
                        Some(ids) => ids[i],
                        None => {
                            next += 1;
                            next - 1
                        }
                    };
                }
            }
            interfaces.push(InterfaceDofs {
                layers: spec.layers,
                trace_nodes: m,
                sheets,
                own_sheets: start..next,
                multipliers: [0..0, 0..0],
            });
        }
        let multiplier_offset = next;
        for (iface, spec) in interfaces.iter_mut().zip(specs) {
            for side in 0..2 {
                iface.multipliers[side] = next..next + spec.multipliers[side];
                next += spec.multipliers[side];
            }
        }
        DofMap {
            n_volume,
            interfaces,
            sheet_offset: n_volume,
            multiplier_offset,
            total: next,
            dirichlet: vec![false; next],
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn n_volume(&self) -> usize {
        self.n_volume
    }

    /// Number of DoFs carrying a temperature (volume and own sheet DoFs).
    pub fn n_temperature(&self) -> usize {
        self.multiplier_offset
    }

    pub fn n_sheet_dofs(&self) -> usize {
        self.multiplier_offset - self.sheet_offset
    }

    pub fn n_multipliers(&self) -> usize {
        self.total - self.multiplier_offset
    }

    pub fn volume_range(&self) -> Range<usize> {
        0..self.n_volume
    }

    pub fn sheet_range(&self) -> Range<usize> {
        self.sheet_offset..self.multiplier_offset
    }

    pub fn multiplier_range_all(&self) -> Range<usize> {
        self.multiplier_offset..self.total
    }

    pub fn n_interfaces(&self) -> usize {
        self.interfaces.len()
    }

    pub fn layers(&self, interface: usize) -> usize {
        self.interfaces[interface].layers
    }

    pub fn trace_nodes(&self, interface: usize) -> usize {
        self.interfaces[interface].trace_nodes
    }

    /// Global DoF of sheet `sheet` at Γ̂ node `node`.
    #[inline]
    pub fn sheet(&self, interface: usize, sheet: usize, node: usize) -> usize {
        let f = &self.interfaces[interface];
        f.sheets[sheet * f.trace_nodes + node]
    }

    pub fn sheet_dofs(&self, interface: usize, sheet: usize) -> &[usize] {
        let f = &self.interfaces[interface];
        &f.sheets[sheet * f.trace_nodes..(sheet + 1) * f.trace_nodes]
    }

    /// Multiplier range of `side` (0 for side 1, 1 for side 2).
    pub fn multiplier_range(&self, interface: usize, side: usize) -> Range<usize> {
        self.interfaces[interface].multipliers[side].clone()
    }

    pub fn family(&self, dof: usize) -> Option<DofFamily> {
        if dof >= self.total {
            return None;
        }
        if dof < self.n_volume {
            return Some(DofFamily::Volume);
        }
        for (k, f) in self.interfaces.iter().enumerate() {
            if f.own_sheets.contains(&dof) {
                let pos = f.sheets.iter().position(|&d| d == dof).unwrap();
                return Some(DofFamily::Sheet { interface: k, sheet: pos / f.trace_nodes });
            }
            for side in 0..2 {
                if f.multipliers[side].contains(&dof) {
                    return Some(DofFamily::Multiplier { interface: k, side });
                }
            }
        }
        None
    }

    pub fn flag_dirichlet(&mut self, dof: usize) {
        self.dirichlet[dof] = true;
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet[dof]
    }

    pub fn dirichlet_count(&self) -> usize {
        self.dirichlet.iter().filter(|&&d| d).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alias: [Option<Vec<usize>>; 2], multipliers: [usize; 2]) -> InterfaceDofSpec {
        InterfaceDofSpec { layers: 2, trace_nodes: 3, alias, multipliers }
    }

    #[test]
    fn families_are_contiguous_and_disjoint() {
        let map = DofMap::new(10, &[spec([None, None], [3, 3])]);
        assert_eq!(map.total(), 10 + 9 + 6);
        assert_eq!(map.sheet_range(), 10..19);
        assert_eq!(map.multiplier_range(0, 0), 19..22);
        assert_eq!(map.multiplier_range(0, 1), 22..25);
        assert_eq!(map.sheet(0, 2, 1), 10 + 2 * 3 + 1);
        assert_eq!(map.family(3), Some(DofFamily::Volume));
        assert_eq!(map.family(14), Some(DofFamily::Sheet { interface: 0, sheet: 1 }));
        assert_eq!(map.family(23), Some(DofFamily::Multiplier { interface: 0, side: 1 }));
        assert_eq!(map.family(25), None);
    }

    #[test]
    fn eliminated_side_aliases_volume_dofs() {
        let map = DofMap::new(10, &[spec([Some(vec![7, 8, 9]), None], [0, 3])]);
        assert_eq!(map.sheet_dofs(0, 0), &[7, 8, 9]);
        assert_eq!(map.n_sheet_dofs(), 6);
        assert_eq!(map.multiplier_range(0, 0).len(), 0);
        assert_eq!(map.total(), 10 + 6 + 3);
    }
}
