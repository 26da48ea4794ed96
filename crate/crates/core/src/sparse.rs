//! Compressed sparse row storage and the direct solver used by Newton.
//!
//! Assembly goes through [`Triplets`], which are compressed into a
//! [`CsrMatrix`] with duplicates summed in insertion order. The summation
//! order is fixed, so identical triplet streams give bitwise-identical
//! matrices.
//!
//! [`LuSolver`] factors with a supernodal sparse LU (partial pivoting) from
//! `faer`. The symbolic analysis depends only on the sparsity pattern and is
//! kept between calls, since the Newton Jacobian pattern is fixed per mesh.

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{ColMut, Par};

use crate::error::{Error, Result};

/// Relative residual the direct solve must reach.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

const MAX_REFINEMENT_STEPS: usize = 3;

/// Coordinate-format accumulator. Duplicates are allowed and summed by
/// [`Triplets::compress`].
#[derive(Debug, Clone)]
pub struct Triplets {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self::with_capacity(n_rows, n_cols, 0)
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Builds the CSR matrix. Entries in a row are sorted by column with a
    /// stable sort, so duplicates are summed in the order they were pushed.
    pub fn compress(&self) -> Result<CsrMatrix> {
        for &(r, c, _) in &self.entries {
            if r >= self.n_rows {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.n_rows,
                });
            }
            if c >= self.n_cols {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: self.n_cols,
                });
            }
        }

        // counting sort by row keeps insertion order inside each row
        let mut counts = vec![0usize; self.n_rows + 1];
        for &(r, _, _) in &self.entries {
            counts[r + 1] += 1;
        }
        for i in 0..self.n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut by_row = vec![(0usize, 0.0f64); self.entries.len()];
        for &(r, c, v) in &self.entries {
            by_row[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        row_ptr.push(0);
        for r in 0..self.n_rows {
            let row = &mut by_row[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == col {
                    sum += row[k].1;
                    k += 1;
                }
                col_idx.push(col);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }

        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
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

    /// Mutable access to the stored values; the pattern stays fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::LengthMismatch {
                expected: self.nnz(),
                actual: values.len(),
            });
        }
        Ok(Self { values, ..self.clone() })
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Position of `(row, col)` in the value array, if stored.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[span.clone()]
            .binary_search(&col)
            .ok()
            .map(|k| span.start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`, summing each row in stored column order.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols {
            return Err(Error::LengthMismatch {
                expected: self.n_cols,
                actual: x.len(),
            });
        }
        if y.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                expected: self.n_rows,
                actual: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.matvec(y)?;
        if x.len() != ay.len() {
            return Err(Error::LengthMismatch {
                expected: ay.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter().zip(&ay).map(|(a, b)| a * b).sum())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        dense
    }
}

/// Sparse LU solver that caches the symbolic factorization per pattern.
#[derive(Default)]
pub struct LuSolver {
    cached: Option<CachedSymbolic>,
}

struct CachedSymbolic {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

fn check_square(a: &CsrMatrix, b: &[f64]) -> Result<usize> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: a.n_cols(),
        });
    }
    if b.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    Ok(n)
}

impl LuSolver {
    pub fn new() -> Self {
        Self::default()
    }

    fn factor(&mut self, a: &CsrMatrix) -> Result<Factors> {
        let n = a.n_rows();
        // The CSR arrays of A are the CSC arrays of Aᵀ: factor Aᵀ and solve
        // with the transposed factors.
        let transposed = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let reuse = matches!(&self.cached, Some(c)
            if c.n == n && c.row_ptr == a.row_ptr && c.col_idx == a.col_idx);
        if !reuse {
            let symbolic = SymbolicLu::try_new(transposed).map_err(|_| Error::Singular { column: 0 })?;
            self.cached = Some(CachedSymbolic {
                n,
                row_ptr: a.row_ptr.clone(),
                col_idx: a.col_idx.clone(),
                symbolic,
            });
        }
        let symbolic = self.cached.as_ref().map(|c| c.symbolic.clone()).expect("cached");

        faer::set_global_parallelism(Par::Seq);
        let lu =
            Lu::try_new_with_symbolic(symbolic, SparseColMatRef::new(transposed, &a.values)).map_err(|e| match e {
                LuError::SymbolicSingular { index } => Error::Singular { column: index },
                LuError::Generic(_) => Error::Singular { column: 0 },
            })?;
        Ok(Factors {
            lu,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
        })
    }

    /// Solves `A x = b`.
    ///
    /// The relative residual is driven below [`SOLVE_RESIDUAL_TOL`] by a few
    /// Krylov steps preconditioned with the fresh factors, which amounts to
    /// iterative refinement. A zero or numerically negligible pivot yields
    /// [`Error::Singular`] naming the first unknown that could not be
    /// resolved.
    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = check_square(a, b)?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let factors = self.factor(a)?;
        let target = SOLVE_RESIDUAL_TOL * norm2(b);
        let (x, rel, _) = factors.krylov(a, b, target, MAX_REFINEMENT_STEPS + 1)?;
        singular_unless_converged(a, b, &x, rel)?;
        Ok(x)
    }
}

/// Numeric LU factors of one matrix.
struct Factors {
    lu: Lu<usize, f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Factors {
    fn apply(&self, v: &mut [f64]) -> Result<()> {
        self.lu.solve_transpose_in_place(ColMut::from_slice_mut(v));
        match v.iter().position(|x| !x.is_finite()) {
            Some(column) => Err(Error::Singular { column }),
            None => Ok(()),
        }
    }

    /// Right-preconditioned GMRES on `A x = b` with these factors as the
    /// preconditioner, started from zero and stopped once `‖b − Ax‖₂ ≤
    /// target` or after `max_iter` steps. Returns the iterate, its true
    /// relative residual and the number of steps taken.
    fn krylov(&self, a: &CsrMatrix, b: &[f64], target: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
        let n = b.len();
        let b_norm = norm2(b);
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok((x, 0.0, 0));
        }
        let mut r = b.to_vec();
        let mut done = 0;
        loop {
            let beta = norm2(&r);
            if beta <= target || done == max_iter {
                return Ok((x, beta / b_norm, done));
            }
            let m = max_iter - done;
            let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
            let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
            let mut h = vec![vec![0.0; m]; m + 1];
            let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
            let mut g = vec![0.0; m + 1];
            g[0] = beta;
            let mut k = 0;
            while k < m {
                let mut zk = v[k].clone();
                self.apply(&mut zk)?;
                let mut w = a.matvec(&zk)?;
                z.push(zk);
                for (i, vi) in v.iter().enumerate() {
                    let hik: f64 = w.iter().zip(vi).map(|(p, q)| p * q).sum();
                    h[i][k] = hik;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= hik * vj;
                    }
                }
                let w_norm = norm2(&w);
                h[k + 1][k] = w_norm;
                for (i, &(c, s)) in rot.iter().enumerate() {
                    let (p, q) = (h[i][k], h[i + 1][k]);
                    h[i][k] = c * p + s * q;
                    h[i + 1][k] = -s * p + c * q;
                }
                let (p, q) = (h[k][k], h[k + 1][k]);
                let d = p.hypot(q);
                let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (p / d, q / d) };
                rot.push((c, s));
                h[k][k] = d;
                h[k + 1][k] = 0.0;
                g[k + 1] = -s * g[k];
                g[k] *= c;
                k += 1;
                if g[k].abs() <= target || w_norm == 0.0 {
                    break;
                }
                v.push(w.iter().map(|wi| wi / w_norm).collect());
            }
            done += k;
            // back substitution on the rotated Hessenberg matrix
            let mut y = vec![0.0; k];
            for i in (0..k).rev() {
                let mut acc = g[i];
                for j in i + 1..k {
                    acc -= h[i][j] * y[j];
                }
                y[i] = if h[i][i] == 0.0 { 0.0 } else { acc / h[i][i] };
            }
            for (yi, zi) in y.iter().zip(&z) {
                for (xj, zj) in x.iter_mut().zip(zi) {
                    *xj += yi * zj;
                }
            }
            if let Some(column) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::Singular { column });
            }
            r = residual(a, &x, b)?;
        }
    }
}

/// Refinement that stalls far above the target means the factorization is
/// useless, which only happens for (near-)singular systems.
fn singular_unless_converged(a: &CsrMatrix, b: &[f64], x: &[f64], rel: f64) -> Result<()> {
    if rel > SOLVE_RESIDUAL_TOL.sqrt() {
        let r = residual(a, x, b)?;
        let column = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(i, _)| i);
        return Err(Error::Singular { column });
    }
    Ok(())
}

/// Counters of a [`ReusingSolver`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: usize,
    pub factorizations: usize,
    pub krylov_iterations: usize,
}

/// Solver for a sequence of nearby matrices sharing one pattern, such as
/// Newton Jacobians of consecutive time steps.
///
/// The LU factors of an earlier matrix precondition GMRES on the current
/// one. The operator is always the current matrix, so the answer meets the
/// same residual bound as a direct solve; only the work changes. When the
/// old factors stop being a good preconditioner the current matrix is
/// refactored.
pub struct ReusingSolver {
    lu: LuSolver,
    factors: Option<Factors>,
    max_stale_iter: usize,
    stats: SolverStats,
}

impl Default for ReusingSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl ReusingSolver {
    pub fn new() -> Self {
        Self {
            lu: LuSolver::new(),
            factors: None,
            max_stale_iter: 8,
            stats: SolverStats::default(),
        }
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Drops the stored factors; the next solve refactors.
    pub fn invalidate(&mut self) {
        self.factors = None;
    }

    /// Solves `A x = b` to the relative residual [`SOLVE_RESIDUAL_TOL`].
    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_within(a, b, 0.0)
    }

    /// Solves `A x = b` until `‖b − Ax‖₂ ≤ max(tol, SOLVE_RESIDUAL_TOL ‖b‖₂)`.
    /// Inexact Newton methods pass a loose `tol` in early iterations.
    pub fn solve_within(&mut self, a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let n = check_square(a, b)?;
        self.stats.solves += 1;
        if n == 0 {
            return Ok(Vec::new());
        }
        let b_norm = norm2(b);
        let target = tol.max(SOLVE_RESIDUAL_TOL * b_norm);
        if let Some(f) = &self.factors {
            if f.row_ptr == a.row_ptr && f.col_idx == a.col_idx {
                if let Ok((x, rel, iters)) = f.krylov(a, b, target, self.max_stale_iter) {
                    self.stats.krylov_iterations += iters;
                    if rel * b_norm <= target {
                        return Ok(x);
                    }
                }
            }
        }
        self.factors = None;
        let f = self.lu.factor(a)?;
        self.stats.factorizations += 1;
        let (x, rel, iters) = f.krylov(a, b, target, MAX_REFINEMENT_STEPS + 1)?;
        self.stats.krylov_iterations += iters;
        if rel * b_norm > target {
            singular_unless_converged(a, b, &x, rel)?;
        }
        self.factors = Some(f);
        Ok(x)
    }
}

/// One-shot solve without pattern caching.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuSolver::new().solve(a, b)
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut r = a.matvec(x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
