//! Dense linear algebra used throughout the crate.
//!
//! Matrices are column-major: entry `(i, j)` lives at `data[i + j * rows]`,
//! so each column is a contiguous slice. Products go through
//! `matrixmultiply::dgemm`; factorizations are implemented here.

mod cholesky;
mod eigen;
mod standardize;

pub use cholesky::{cholesky, Cholesky};
pub use eigen::{sym_eigen, sym_eigen_jacobi, sym_eigen_tridiagonal, sym_eigenvalues, SymEigen};
pub use standardize::{standardize_columns, ColumnScaler, Standardized};

use crate::{Error, Result};

/// Real vectors are plain `Vec<f64>` / `&[f64]`.
pub type RealVector = Vec<f64>;

/// A dense, column-major real matrix with at least one row and one column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps column-major `data`. Rejects empty shapes, length mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("matrix shape {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite entry at ({}, {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for data known to be well-formed.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows > 0 && cols > 0 && data.len() == rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape {rows}x{cols} is empty");
        Self::from_parts(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self::from_parts(rows, cols, data)
    }

    /// Builds a matrix from row slices; handy in tests.
    ///
    /// # Panics
    /// Panics on ragged or empty input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty(), "empty matrix");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| rows[i][j])
    }

    /// A single-column matrix.
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        Self::new(v.len(), 1, v.to_vec())
    }

    /// Stacks columns given as slices of equal length.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::dim("columns have different lengths"));
        }
        let data = columns.iter().flat_map(|c| c.iter().copied()).collect();
        Self::new(rows, columns.len(), data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// New matrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<DenseMatrix> {
        if columns.is_empty() {
            return Err(Error::dim("no columns selected"));
        }
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for &j in columns {
            if j >= self.cols {
                return Err(Error::dim(format!("column {j} out of range 0..{}", self.cols)));
            }
            data.extend_from_slice(self.col(j));
        }
        Ok(DenseMatrix::from_parts(self.rows, columns.len(), data))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<DenseMatrix> {
        if rows.is_empty() {
            return Err(Error::dim("no rows selected"));
        }
        if let Some(&i) = rows.iter().find(|&&i| i >= self.rows) {
            return Err(Error::dim(format!("row {i} out of range 0..{}", self.rows)));
        }
        Ok(DenseMatrix::from_fn(rows.len(), self.cols, |i, j| self.get(rows[i], j)))
    }

    /// Column-wise concatenation `[self, other]`.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::dim(format!(
                "cannot stack {} rows next to {} rows",
                self.rows, other.rows
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix::from_parts(self.rows, self.cols + other.cols, data))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            (&self.data, 1, m as isize),
            (&other.data, 1, k as isize),
            (&mut out, 1, m as isize),
        );
        Ok(DenseMatrix::from_parts(m, n, out))
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k, n) = (self.cols, self.rows, other.cols);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            (&self.data, k as isize, 1),
            (&other.data, 1, k as isize),
            (&mut out, 1, m as isize),
        );
        Ok(DenseMatrix::from_parts(m, n, out))
    }

    /// `selfᵀ self` (cols x cols), exactly symmetric.
    pub fn gram(&self) -> DenseMatrix {
        let (n, d) = (self.rows, self.cols);
        let mut out = vec![0.0; d * d];
        gemm(
            d,
            n,
            d,
            (&self.data, n as isize, 1),
            (&self.data, 1, n as isize),
            (&mut out, 1, d as isize),
        );
        let mut g = DenseMatrix::from_parts(d, d, out);
        g.symmetrize();
        g
    }

    /// `self selfᵀ` (rows x rows), exactly symmetric.
    pub fn outer_gram(&self) -> DenseMatrix {
        let (n, d) = (self.rows, self.cols);
        let mut out = vec![0.0; n * n];
        gemm(
            n,
            d,
            n,
            (&self.data, 1, n as isize),
            (&self.data, n as isize, 1),
            (&mut out, 1, n as isize),
        );
        let mut g = DenseMatrix::from_parts(n, n, out);
        g.symmetrize();
        g
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "vector of length {} does not match {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.col(j), &mut out);
            }
        }
        Ok(out)
    }

    /// `selfᵀ * v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::dim(format!(
                "vector of length {} does not match {} rows",
                v.len(),
                self.rows
            )));
        }
        Ok((0..self.cols).map(|j| dot(self.col(j), v)).collect())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        for i in 0..self.rows.min(self.cols) {
            let k = i + i * self.rows;
            self.data[k] += v;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(DenseMatrix::from_parts(self.rows, self.cols, data))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest asymmetry `|a_ij - a_ji|`, or `None` for non-square input.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst = 0.0_f64;
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        Some(worst)
    }

    /// Replaces the matrix by `(A + Aᵀ) / 2`. Square input only.
    pub(crate) fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        let n = self.rows;
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (self.data[i + j * n] + self.data[j + i * n]);
                self.data[i + j * n] = v;
                self.data[j + i * n] = v;
            }
        }
    }
}

type MatRef<'a> = (&'a [f64], isize, isize);
type MatMut<'a> = (&'a mut [f64], isize, isize);

/// `c = a * b` for an `m x k` times `k x n` product with explicit strides.
fn gemm(m: usize, k: usize, n: usize, a: MatRef<'_>, b: MatRef<'_>, c: MatMut<'_>) {
    assert!(a.0.len() >= m * k && b.0.len() >= k * n && c.0.len() >= m * n);
    // SAFETY: the assertion above guarantees that every index reachable through
    // the given strides lies inside the three slices, and `c` does not alias
    // `a` or `b` because it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            0.0,
            c.0.as_mut_ptr(),
            c.1,
            c.2,
        );
    }
}

/// Relative cut-off below which a singular value obtained from a Gram matrix
/// is treated as zero. Squaring halves the usable precision, so eigenvalues at
/// rounding level (`~n·ε·λ_max`) surface as singular values near `1e-7·σ_max`.
pub const SINGULAR_RTOL: f64 = 1e-6;

/// Singular values of `x`, descending, from the Gram matrix on the smaller
/// side.
pub fn singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    let g = if x.rows() <= x.cols() { x.outer_gram() } else { x.gram() };
    Ok(sym_eigenvalues(&g)?.into_iter().map(|l| l.max(0.0).sqrt()).collect())
}

/// Number of singular values above `SINGULAR_RTOL·σ_max`.
pub fn numerical_rank(singular: &[f64]) -> usize {
    let top = singular.first().copied().unwrap_or(0.0);
    singular.iter().filter(|&&s| s > SINGULAR_RTOL * top).count()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// `‖a - b‖₂`.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    fn sample(rows: usize, cols: usize, salt: f64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| ((i * 7 + j * 13) as f64 * 0.37 + salt).sin())
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(DenseMatrix::new(0, 3, vec![]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn storage_is_column_major() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(m.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m.col(1), &[2.0, 4.0]);
        assert_eq!(m.row(1), vec![3.0, 4.0]);
    }

    #[test]
    fn products_match_naive_loops() {
        let a = sample(7, 5, 0.1);
        let b = sample(5, 4, 0.7);
        let c = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        assert!(c.sub(&want).unwrap().max_abs() < 1e-12);

        let at_b = a.t_matmul(&sample(7, 3, 0.3)).unwrap();
        let want = naive_matmul(&a.transpose(), &sample(7, 3, 0.3));
        assert!(at_b.sub(&want).unwrap().max_abs() < 1e-12);

        let g = a.gram();
        assert!(g.sub(&naive_matmul(&a.transpose(), &a)).unwrap().max_abs() < 1e-12);
        assert_eq!(g.asymmetry(), Some(0.0));
        let o = a.outer_gram();
        assert!(o.sub(&naive_matmul(&a, &a.transpose())).unwrap().max_abs() < 1e-12);

        let v: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let mv = a.matvec(&v).unwrap();
        for (i, x) in mv.iter().enumerate() {
            let want: f64 = (0..5).map(|j| a.get(i, j) * v[j]).sum();
            assert!((x - want).abs() < 1e-12);
        }
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn column_selection_and_stacking() {
        let a = sample(3, 4, 0.0);
        let s = a.select_columns(&[3, 1]).unwrap();
        assert_eq!(s.col(0), a.col(3));
        assert_eq!(s.col(1), a.col(1));
        let h = a.hstack(&s).unwrap();
        assert_eq!(h.shape(), (3, 6));
        assert_eq!(h.col(5), a.col(1));
        assert!(a.select_columns(&[4]).is_err());
        assert!(a.hstack(&sample(2, 1, 0.0)).is_err());
    }
}
