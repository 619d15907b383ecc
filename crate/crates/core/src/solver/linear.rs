//! Sparse direct solves backed by faer.
//!
//! Exactly symmetric systems are factored by LDLᵀ with an AMD ordering in
//! which rows with a zero diagonal (the multipliers) come last, so every
//! pivot of the positive definite temperature block precedes the negative
//! Schur complement of the multipliers. When that fails, or its residual is
//! too large, LU with partial pivoting takes over.

use std::cell::OnceCell;
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::amd;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};

use crate::assembly::CsrMatrix;
use crate::{Error, Result};

/// Required relative residual `‖Ax − b‖ / ‖b‖` of every solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Pattern of a symmetric matrix in lower-triangular CSC form.
#[derive(Debug, Clone, PartialEq)]
struct LowerPattern {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

/// Lower triangle in CSC form: the upper triangle of the CSR rows read
/// column-wise.
fn lower_csc(m: &CsrMatrix) -> (LowerPattern, Vec<f64>) {
    let n = m.nrows();
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for r in 0..n {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= r {
                row_idx.push(c);
                values.push(v);
            }
        }
        col_ptr.push(row_idx.len());
    }
    (LowerPattern { col_ptr, row_idx }, values)
}

fn to_csc(m: &CsrMatrix) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let t = m.transpose();
    (t.row_ptr().to_vec(), t.col_idx().to_vec(), t.values().to_vec())
}

/// AMD order of the full pattern with zero-diagonal rows moved last.
fn saddle_ordering(m: &CsrMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = m.nrows();
    let (col_ptr, row_idx, _) = to_csc(m);
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
    let mut perm = vec![0usize; n];
    let mut inv = vec![0usize; n];
    let mut mem = MemBuffer::new(amd::order_scratch::<usize>(n, row_idx.len()));
    amd::order(&mut perm, &mut inv, sym, amd::Control::default(), MemStack::new(&mut mem))
        .map_err(|e| Error::LinearSolver(format!("ordering failed: {e:?}")))?;
    let diag = m.diagonal();
    let (mut fwd, last): (Vec<usize>, Vec<usize>) = perm.iter().partition(|&&i| diag[i] != 0.0);
    fwd.extend(last);
    let mut inv = vec![0usize; n];
    for (new, &old) in fwd.iter().enumerate() {
        inv[old] = new;
    }
    Ok((fwd, inv))
}

#[derive(Debug)]
enum SymbolicKind {
    Ldlt { pattern: LowerPattern, symbolic: Arc<SymbolicCholesky<usize>> },
    Lu { col_ptr: Vec<usize>, row_idx: Vec<usize>, symbolic: SymbolicLu<usize> },
}

/// Symbolic analysis reusable for matrices with the same pattern.
#[derive(Debug)]
pub struct SymbolicFactor {
    n: usize,
    kind: SymbolicKind,
}

impl SymbolicFactor {
    pub fn analyze(matrix: &CsrMatrix) -> Result<Self> {
        if matrix.is_symmetric() {
            if let Ok(s) = Self::analyze_ldlt(matrix) {
                return Ok(s);
            }
        }
        Self::analyze_lu(matrix)
    }

    fn analyze_ldlt(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let (pattern, _) = lower_csc(matrix);
        let (fwd, inv) = saddle_ordering(matrix)?;
        let perm = faer::perm::PermRef::new_checked(&fwd, &inv, n);
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &pattern.col_ptr, None, &pattern.row_idx);
        let symbolic = factorize_symbolic_cholesky(
            sym,
            Side::Lower,
            SymmetricOrdering::Custom(perm),
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::LinearSolver(format!("symbolic analysis failed: {e:?}")))?;
        Ok(SymbolicFactor { n, kind: SymbolicKind::Ldlt { pattern, symbolic: Arc::new(symbolic) } })
    }

    fn analyze_lu(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let (col_ptr, row_idx, _) = to_csc(matrix);
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLu::try_new(sym).map_err(|e| Error::LinearSolver(format!("symbolic analysis failed: {e:?}")))?;
        Ok(SymbolicFactor { n, kind: SymbolicKind::Lu { col_ptr, row_idx, symbolic } })
    }

    fn matches(&self, matrix: &CsrMatrix) -> bool {
        if matrix.nrows() != self.n {
            return false;
        }
        match &self.kind {
            SymbolicKind::Ldlt { pattern, .. } => matrix.is_symmetric() && lower_csc(matrix).0 == *pattern,
            SymbolicKind::Lu { col_ptr, row_idx, .. } => {
                let (c, r, _) = to_csc(matrix);
                c == *col_ptr && r == *row_idx
            }
        }
    }
}

enum Backend {
    Empty,
    Ldlt { symbolic: Arc<SymbolicCholesky<usize>>, values: Vec<f64> },
    Lu(Lu<usize, f64>),
}

/// Numeric factorization of a square sparse matrix.
pub struct Factorization {
    matrix: CsrMatrix,
    backend: Backend,
    fallback: OnceCell<Result<Lu<usize, f64>, String>>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backend {
            Backend::Empty => "empty",
            Backend::Ldlt { .. } => "ldlt",
            Backend::Lu(_) => "lu",
        };
        f.debug_struct("Factorization").field("n", &self.matrix.nrows()).field("kind", &kind).finish()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lu_numeric(matrix: &CsrMatrix, symbolic: Option<&SymbolicLu<usize>>) -> Result<Lu<usize, f64>> {
    let n = matrix.nrows();
    let (col_ptr, row_idx, values) = to_csc(matrix);
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
    let owned;
    let symbolic = match symbolic {
        Some(s) => s,
        None => {
            owned = SymbolicLu::try_new(sym).map_err(|e| Error::LinearSolver(format!("symbolic analysis failed: {e:?}")))?;
            &owned
        }
    };
    let mat = SparseColMatRef::new(sym, &values);
    Lu::try_new_with_symbolic(symbolic.clone(), mat).map_err(|e| match e {
        LuError::SymbolicSingular { index } => {
            Error::LinearSolver(format!("singular matrix: no pivot found at elimination step {index} of {n}"))
        }
        LuError::Generic(g) => Error::LinearSolver(format!("factorization failed: {g:?}")),
    })
}

fn ldlt_numeric(matrix: &CsrMatrix, pattern: &LowerPattern, symbolic: &SymbolicCholesky<usize>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    let (_, values) = lower_csc(matrix);
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &pattern.col_ptr, None, &pattern.row_idx);
    let mat = SparseColMatRef::new(sym, &values);
    let mut l_values = vec![0.0; symbolic.len_val()];
    let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
    symbolic
        .factorize_numeric_ldlt(
            &mut l_values,
            mat,
            Side::Lower,
            Default::default(),
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .map_err(|e| Error::LinearSolver(format!("LDLT factorization failed: {e:?}")))?;
    if l_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolver("LDLT factorization produced non-finite values".into()));
    }
    Ok(l_values)
}

impl Factorization {
    /// Factors `matrix`, reusing `symbolic` when its pattern matches.
    pub fn new(matrix: &CsrMatrix, symbolic: Option<&SymbolicFactor>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::LinearSolver(format!("matrix is {}x{}, not square", n, matrix.ncols())));
        }
        let make = |backend| Factorization { matrix: matrix.clone(), backend, fallback: OnceCell::new() };
        if n == 0 {
            return Ok(make(Backend::Empty));
        }
        if let Some(v) = matrix.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::LinearSolver(format!("matrix contains non-finite entry {v}")));
        }
        let owned;
        let symbolic = match symbolic {
            Some(s) if s.matches(matrix) => s,
            _ => {
                owned = SymbolicFactor::analyze(matrix)?;
                &owned
            }
        };
        match &symbolic.kind {
            SymbolicKind::Ldlt { pattern, symbolic } => match ldlt_numeric(matrix, pattern, symbolic) {
                Ok(values) => Ok(make(Backend::Ldlt { symbolic: Arc::clone(symbolic), values })),
                Err(e) => {
                    log::debug!("{e}; falling back to LU");
                    Ok(make(Backend::Lu(lu_numeric(matrix, None)?)))
                }
            },
            SymbolicKind::Lu { symbolic, .. } => Ok(make(Backend::Lu(lu_numeric(matrix, Some(symbolic))?))),
        }
    }

    fn apply_lu(lu: &Lu<usize, f64>, rhs: &mut [f64]) {
        let n = rhs.len();
        lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
    }

    fn apply(&self, backend: &Backend, rhs: &mut [f64]) {
        let n = rhs.len();
        match backend {
            Backend::Empty => {}
            Backend::Lu(lu) => Self::apply_lu(lu, rhs),
            Backend::Ldlt { symbolic, values } => {
                let ldlt = LdltRef::new(symbolic, values);
                let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                ldlt.solve_in_place_with_conj(
                    Conj::No,
                    MatMut::from_column_major_slice_mut(rhs, n, 1),
                    Par::Seq,
                    MemStack::new(&mut mem),
                );
            }
        }
    }

    /// Solve with up to three steps of iterative refinement, keeping the
    /// best iterate. Returns the solution and its relative residual.
    fn refine(&self, backend: &Backend, rhs: &[f64], b_norm: f64) -> (Vec<f64>, f64) {
        let residual = |x: &[f64]| -> (Vec<f64>, f64) {
            let ax = self.matrix.mul_vec(x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let rel = norm(&r) / b_norm;
            (r, rel)
        };
        let mut x = rhs.to_vec();
        self.apply(backend, &mut x);
        let (mut r, mut rel) = residual(&x);
        for _ in 0..3 {
            if !rel.is_finite() || rel < 1e-15 {
                break;
            }
            self.apply(backend, &mut r);
            let candidate: Vec<f64> = x.iter().zip(&r).map(|(a, d)| a + d).collect();
            let (r_new, rel_new) = residual(&candidate);
            if !(rel_new < rel) {
                break;
            }
            x = candidate;
            r = r_new;
            rel = rel_new;
        }
        (x, rel)
    }

    /// Solves `A x = b` and checks the relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        if rhs.len() != n {
            return Err(Error::LinearSolver(format!("right-hand side has {} entries for {n} unknowns", rhs.len())));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let b_norm = norm(rhs);
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let (mut x, mut rel) = self.refine(&self.backend, rhs, b_norm);
        if !(rel < RESIDUAL_TOL) && matches!(self.backend, Backend::Ldlt { .. }) {
            log::debug!("LDLT residual {rel:.3e}; falling back to LU");
            let lu = self.fallback.get_or_init(|| lu_numeric(&self.matrix, None).map_err(|e| e.to_string()));
            match lu {
                Ok(lu) => {
                    let backend = Backend::Lu(lu.clone());
                    (x, rel) = self.refine(&backend, rhs, b_norm);
                }
                Err(e) => return Err(Error::LinearSolver(e.clone())),
            }
        }
        if !rel.is_finite() {
            return Err(Error::LinearSolver("numerically singular matrix (non-finite solution)".into()));
        }
        if rel >= RESIDUAL_TOL {
            return Err(Error::LinearSolver(format!(
                "relative residual {rel:.3e} exceeds {RESIDUAL_TOL:.0e} (numerically singular matrix?)"
            )));
        }
        Ok(x)
    }
}

/// One-shot factor and solve.
pub fn solve_sparse(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(matrix, None)?.solve(rhs)
}
