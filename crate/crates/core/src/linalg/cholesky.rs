use super::{axpy, dot, DenseMatrix};
use crate::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

/// Factorizes `s = L Lᵀ` and returns `L`.
pub fn cholesky(s: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::new(s).map(Cholesky::into_lower)
}

impl Cholesky {
    /// Factorizes `s`. Only the lower triangle is read, but the input is
    /// checked for symmetry first.
    pub fn new(s: &DenseMatrix) -> Result<Self> {
        let asym = s
            .asymmetry()
            .ok_or_else(|| Error::dim(format!("cholesky of non-square {:?}", s.shape())))?;
        if asym > 1e-10 * s.max_abs().max(1.0) {
            return Err(Error::Validation(format!(
                "cholesky input is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Self::factor(s, 0.0)
    }

    /// Factorization that fails when a pivot drops to `rel_tol` times the
    /// original diagonal entry or below. Used to detect numerically singular
    /// normal equations.
    pub(crate) fn factor(s: &DenseMatrix, rel_tol: f64) -> Result<Self> {
        let n = s.rows();
        // Column-major lower triangle, built column by column (right-looking).
        let mut a = s.clone();
        for j in 0..n {
            let d = a.get(j, j);
            if d.is_nan() || d <= rel_tol * s.get(j, j).abs() || d <= 0.0 {
                return Err(Error::Decomposition(format!(
                    "matrix is not positive definite (pivot {d:e} at {j})"
                )));
            }
            let piv = d.sqrt();
            let col = a.col_mut(j);
            col[j] = piv;
            for v in &mut col[j + 1..] {
                *v /= piv;
            }
            let below: Vec<f64> = a.col(j)[j + 1..].to_vec();
            for (off, &ljk) in below.iter().enumerate() {
                let k = j + 1 + off;
                if ljk != 0.0 {
                    axpy(-ljk, &below[off..], &mut a.col_mut(k)[k..]);
                }
            }
        }
        for j in 1..n {
            a.col_mut(j)[..j].fill(0.0);
        }
        Ok(Self { l: a })
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn into_lower(self) -> DenseMatrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // L y = b, column-oriented.
        for j in 0..n {
            let col = self.l.col(j);
            b[j] /= col[j];
            let bj = b[j];
            if bj != 0.0 {
                let (_, tail) = b.split_at_mut(j + 1);
                axpy(-bj, &col[j + 1..], tail);
            }
        }
        // Lᵀ x = y, row j of Lᵀ is column j of L.
        for j in (0..n).rev() {
            let col = self.l.col(j);
            let s = dot(&col[j + 1..], &b[j + 1..]);
            b[j] = (b[j] - s) / col[j];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut x = b.clone();
        for j in 0..x.cols() {
            self.solve_in_place(x.col_mut(j));
        }
        x
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| 2.0 * self.l.get(i, i).ln()).sum()
    }
}
