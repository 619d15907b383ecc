//! Triplet builder and compressed sparse row matrices.
//!
//! Summation of duplicate triplets is deterministic and independent of the
//! order in which contributions were added: duplicates are grouped by
//! `(row, col)` and their values are summed in `f64::total_cmp` order.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseBuilder { nrows, ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        SparseBuilder {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Adds one triplet. Panics on out-of-range indices.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.nrows && col < self.ncols, "triplet ({row}, {col}) outside {}x{}", self.nrows, self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(value);
    }

    /// Adds a dense element block `block[a][b]` at `(dofs[a], dofs[b])`.
    pub fn add_block<const N: usize>(&mut self, dofs: &[usize; N], block: &[[f64; N]; N]) {
        for a in 0..N {
            for b in 0..N {
                self.add(dofs[a], dofs[b], block[a][b]);
            }
        }
    }

    pub fn finalize(&self) -> CsrMatrix {
        let mut cache = PatternCache::default();
        self.finalize_cached(&mut cache)
    }

    /// Like [`finalize`](Self::finalize) but reuses the sorting permutation
    /// from a previous call with the same triplet index sequence.
    pub fn finalize_cached(&self, cache: &mut PatternCache) -> CsrMatrix {
        if !cache.matches(self) {
            *cache = PatternCache::build(self);
        }
        let mut values = Vec::with_capacity(cache.col_idx.len());
        let mut scratch: Vec<f64> = Vec::new();
        for g in 0..cache.col_idx.len() {
            let members = &cache.perm[cache.group_ptr[g]..cache.group_ptr[g + 1]];
            let sum = if members.len() == 1 {
                self.vals[members[0]]
            } else {
                scratch.clear();
                scratch.extend(members.iter().map(|&i| self.vals[i]));
                scratch.sort_unstable_by(f64::total_cmp);
                scratch.iter().sum()
            };
            values.push(sum);
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: cache.row_ptr.clone(),
            col_idx: cache.col_idx.clone(),
            values,
        }
    }
}

/// Sorted structure of a triplet sequence.
#[derive(Debug, Clone, Default)]
pub struct PatternCache {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    perm: Vec<usize>,
    group_ptr: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl PatternCache {
    fn matches(&self, b: &SparseBuilder) -> bool {
        !self.row_ptr.is_empty()
            && self.nrows == b.nrows
            && self.ncols == b.ncols
            && self.rows == b.rows
            && self.cols == b.cols
    }

    fn build(b: &SparseBuilder) -> Self {
        let mut perm: Vec<usize> = (0..b.vals.len()).collect();
        perm.sort_unstable_by_key(|&i| (b.rows[i], b.cols[i], i));
        let mut group_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut row_ptr = vec![0usize; b.nrows + 1];
        let mut k = 0;
        while k < perm.len() {
            let (r, c) = (b.rows[perm[k]], b.cols[perm[k]]);
            let mut e = k + 1;
            while e < perm.len() && b.rows[perm[e]] == r && b.cols[perm[e]] == c {
                e += 1;
            }
            col_idx.push(c);
            row_ptr[r + 1] += 1;
            group_ptr.push(e);
            k = e;
        }
        for r in 0..b.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        PatternCache {
            nrows: b.nrows,
            ncols: b.ncols,
            rows: b.rows.clone(),
            cols: b.cols.clone(),
            perm,
            group_ptr,
            row_ptr,
            col_idx,
        }
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from raw CSR arrays, checking their consistency.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len()
            || col_idx.len() != values.len()
        {
            return Err(Error::Assembly("inconsistent CSR arrays".into()));
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if row_ptr[r] > row_ptr[r + 1] || cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::Assembly(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        Ok(CsrMatrix { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = SparseBuilder::new(rows.len(), ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        b.finalize()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = next[c];
                col_idx[k] = r;
                values[k] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && *self == self.transpose()
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let diff = CsrMatrix::linear_combination(&[(1.0, self), (-1.0, &t)]);
        diff.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    /// `sum_k a_k * M_k` over matrices of equal shape. Entries present in
    /// several terms are added in term order, so equal inputs give
    /// bit-identical outputs.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let (nrows, ncols) = terms.first().map_or((0, 0), |t| (t.1.nrows, t.1.ncols));
        assert!(terms.iter().all(|t| t.1.nrows == nrows && t.1.ncols == ncols), "shape mismatch");
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut cursors = vec![0usize; terms.len()];
        for r in 0..nrows {
            for (k, t) in terms.iter().enumerate() {
                cursors[k] = t.1.row_ptr[r];
            }
            loop {
                let mut next = usize::MAX;
                for (k, t) in terms.iter().enumerate() {
                    if cursors[k] < t.1.row_ptr[r + 1] {
                        next = next.min(t.1.col_idx[cursors[k]]);
                    }
                }
                if next == usize::MAX {
                    break;
                }
                let mut sum = 0.0;
                for (k, t) in terms.iter().enumerate() {
                    if cursors[k] < t.1.row_ptr[r + 1] && t.1.col_idx[cursors[k]] == next {
                        sum += t.0 * t.1.values[cursors[k]];
                        cursors[k] += 1;
                    }
                }
                col_idx.push(next);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    /// Embeds the matrix at offset `(r0, c0)` of a larger `nrows x ncols`
    /// zero matrix.
    pub fn embed(&self, nrows: usize, ncols: usize, r0: usize, c0: usize) -> CsrMatrix {
        assert!(r0 + self.nrows <= nrows && c0 + self.ncols <= ncols);
        let mut row_ptr = vec![0; nrows + 1];
        for r in 0..nrows {
            let len = if r >= r0 && r < r0 + self.nrows { self.row_ptr[r - r0 + 1] - self.row_ptr[r - r0] } else { 0 };
            row_ptr[r + 1] = row_ptr[r] + len;
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx: self.col_idx.iter().map(|c| c + c0).collect(),
            values: self.values.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_sum() {
        let mut b = SparseBuilder::new(2, 2);
        b.add(0, 0, 1.0);
        b.add(1, 0, 2.0);
        b.add(0, 0, 3.0);
        let m = b.finalize();
        assert_eq!(m.to_dense(), vec![vec![4.0, 0.0], vec![2.0, 0.0]]);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn transpose_and_symmetry() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 4.0]]);
        assert_eq!(m.transpose().to_dense(), vec![vec![1.0, 0.0], vec![2.0, 3.0], vec![0.0, 4.0]]);
        let s = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 5.0]]);
        assert!(s.is_symmetric());
        assert!(!CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.5, 5.0]]).is_symmetric());
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = CsrMatrix::from_dense(&[vec![0.0, 2.0], vec![3.0, 4.0]]);
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (0.5, &b)]);
        assert_eq!(c.to_dense(), vec![vec![2.0, 1.0], vec![1.5, 4.0]]);
    }

    #[test]
    fn embed_places_block() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0]]);
        let e = a.embed(3, 4, 1, 2);
        assert_eq!(e.get(1, 2), 1.0);
        assert_eq!(e.get(1, 3), 2.0);
        assert_eq!(e.nnz(), 2);
    }

    #[test]
    fn cached_finalize_matches_fresh() {
        let mut b = SparseBuilder::new(3, 3);
        for (r, c, v) in [(2, 1, 1.5), (0, 0, 1.0), (2, 1, -0.25), (1, 2, 7.0)] {
            b.add(r, c, v);
        }
        let mut cache = PatternCache::default();
        let first = b.finalize_cached(&mut cache);
        assert_eq!(first, b.finalize());
        b.vals[0] = 10.0;
        let second = b.finalize_cached(&mut cache);
        assert_eq!(second.get(2, 1), 9.75);
    }

    proptest! {
        #[test]
        fn summation_is_order_independent(
            entries in prop::collection::vec((0usize..5, 0usize..5, -1e3f64..1e3), 1..60),
            seed in any::<u64>(),
        ) {
            let mut a = SparseBuilder::new(5, 5);
            for &(r, c, v) in &entries {
                a.add(r, c, v);
            }
            let mut shuffled = entries.clone();
            // Deterministic Fisher-Yates driven by the proptest seed.
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let mut b = SparseBuilder::new(5, 5);
            for &(r, c, v) in &shuffled {
                b.add(r, c, v);
            }
            let (ma, mb) = (a.finalize(), b.finalize());
            prop_assert_eq!(ma.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            mb.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(ma, mb);
        }
    }
}
