//! Small shared linear-algebra utilities: triplet-based sparse matrices with
//! a sparse-LU solve (backed by `faer`), and dense solves for the tiny
//! per-element systems that finite element assembly produces.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::{Error, Result};

/// A sparse matrix under assembly, stored as (row, col, value) triplets.
/// Duplicate entries are summed when the matrix is finalized.
#[derive(Debug, Clone)]
pub struct Triplets {
    /// Number of rows.
    pub nrows: usize,
    /// Number of columns.
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    /// Empty matrix of the given shape.
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    /// Adds `value` at `(row, col)`.
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Raw triplet entries.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Number of stored (pre-summation) entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Appends every entry of `other`, scaled by `scale`, at the given
    /// row/column offsets. Used to place blocks into a larger system.
    pub fn push_block(&mut self, row_off: usize, col_off: usize, other: &Triplets, scale: f64) {
        debug_assert!(row_off + other.nrows <= self.nrows);
        debug_assert!(col_off + other.ncols <= self.ncols);
        for &(r, c, v) in &other.entries {
            self.push(row_off + r, col_off + c, scale * v);
        }
    }

    /// As `push_block` with rows and columns swapped (places the transpose).
    pub fn push_block_transposed(
        &mut self,
        row_off: usize,
        col_off: usize,
        other: &Triplets,
        scale: f64,
    ) {
        debug_assert!(row_off + other.ncols <= self.nrows);
        debug_assert!(col_off + other.nrows <= self.ncols);
        for &(r, c, v) in &other.entries {
            self.push(row_off + c, col_off + r, scale * v);
        }
    }

    /// Matrix-vector product (duplicates contribute additively).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Transposed matrix-vector product.
    pub fn matvec_transposed(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
        y
    }

    /// Dense copy (test/diagnostic helper; intended for small matrices).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.ncols]; self.nrows];
        for &(r, c, v) in &self.entries {
            m[r][c] += v;
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &self.entries)
            .map_err(|e| Error::Numerical(format!("sparse matrix construction failed: {e:?}")))
    }
}

/// A factorized sparse system, reusable for multiple right-hand sides.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    /// Sparse LU factorization of a square matrix.
    pub fn factorize(matrix: &Triplets) -> Result<SparseLu> {
        if matrix.nrows != matrix.ncols {
            return Err(Error::ShapeMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                matrix.nrows, matrix.ncols
            )));
        }
        let a = matrix.to_faer()?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu {
            lu,
            n: matrix.nrows,
        })
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "rhs length {} does not match system size {}",
                rhs.len(),
                self.n
            )));
        }
        let b = faer::Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        Ok((0..self.n).map(|i| x.read(i, 0)).collect())
    }
}

/// Solves the dense system `a x = b` in place with partial pivoting.
/// Intended for the small (≤ ~10) per-element systems of FEM assembly.
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::ShapeMismatch("dense solve shape mismatch".into()));
    }
    for k in 0..n {
        let (piv, max) = (k..n)
            .map(|i| (i, a[i][k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if max <= 0.0 || !max.is_finite() {
            return Err(Error::Numerical(format!(
                "singular dense system (pivot {max} at column {k})"
            )));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in (k + 1)..n {
            let factor = a[i][k] / a[k][k];
            if factor == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                a[i][j] -= factor * a[k][j];
            }
            a[i][k] = 0.0;
            b[i] -= factor * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in (k + 1)..n {
            s -= a[k][j] * b[j];
        }
        b[k] = s / a[k][k];
    }
    Ok(())
}

/// Inverse of a small dense matrix (column-by-column solve).
pub fn invert_dense(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut work: Vec<Vec<f64>> = a.to_vec();
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        solve_dense(&mut work, &mut e)?;
        for (row, val) in e.into_iter().enumerate() {
            inv[row][col] = val;
        }
    }
    Ok(inv)
}

/// Inverse of a 2×2 matrix; errors when the determinant is numerically zero
/// relative to the matrix scale.
pub fn invert_2x2(m: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
        .powi(2);
    if det.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "2x2 matrix is numerically singular (det = {det})"
        )));
    }
    Ok([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}
