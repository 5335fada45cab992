//! Single-machine comparison estimators. Each returns coefficients for the
//! original `p` features.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, DenseMatrix};
use crate::projections::{ProjectionKind, ProjectionSpec};
use crate::solvers::{ridge_closed_form, RidgeProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BaselineKind {
    FullRidge,
    DiagonalApprox,
    ColumnCompression { tau_subs: usize },
    RowCompression { n_subs: usize },
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::FullRidge => "full_ridge",
            BaselineKind::DiagonalApprox => "diagonal_approx",
            BaselineKind::ColumnCompression { .. } => "column_compression",
            BaselineKind::RowCompression { .. } => "row_compression",
        }
    }
}

/// Runs a baseline. `seed` and `kind` only matter for the compression methods.
pub fn fit_baseline(
    method: BaselineKind,
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    seed: u64,
    kind: ProjectionKind,
) -> Result<Vec<f64>> {
    match method {
        BaselineKind::FullRidge => ridge_closed_form(&RidgeProblem::new(x, y, lambda)?),
        BaselineKind::DiagonalApprox => diagonal_approx(x, y),
        BaselineKind::ColumnCompression { tau_subs } => {
            column_compression(x, y, lambda, tau_subs, seed, kind)
        }
        BaselineKind::RowCompression { n_subs } => row_compression(x, y, lambda, n_subs, seed, kind),
    }
}

/// `diag(XᵀX)⁻¹XᵀY`: every coefficient fitted as if its feature were alone.
pub fn diagonal_approx(x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != x.rows() {
        return Err(Error::dim("response length does not match design"));
    }
    (0..x.cols())
        .map(|j| {
            let c = x.col(j);
            let nn = dot(c, c);
            if nn == 0.0 {
                Err(Error::DegenerateColumn { column: j })
            } else {
                Ok(dot(c, y) / nn)
            }
        })
        .collect()
}

/// Ridge on `XΠ` (`p → τ_subs` columns), lifted back as `Πα`.
pub fn column_compression(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    tau_subs: usize,
    seed: u64,
    kind: ProjectionKind,
) -> Result<Vec<f64>> {
    let proj = ProjectionSpec::new(kind, x.cols(), tau_subs, seed)?.realize()?;
    let z = proj.apply(x)?;
    let alpha = ridge_closed_form(&RidgeProblem::new(&z, y, lambda)?)?;
    proj.lift(&alpha)
}

/// Ridge on the row sketch `Πᵀ[X | Y]` with `n_subs` rows.
///
/// The penalty is rescaled to `λ·n/n_subs` so that the sketched objective is an
/// unbiased estimate of the original one up to a constant factor.
pub fn row_compression(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    n_subs: usize,
    seed: u64,
    kind: ProjectionKind,
) -> Result<Vec<f64>> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::dim("response length does not match design"));
    }
    let proj = ProjectionSpec::new(kind, n, n_subs, seed)?.realize()?;
    let joint = x.hstack(&DenseMatrix::column_vector(y)?)?;
    let sketched = proj.apply(&joint.transpose())?.transpose();
    let p = x.cols();
    let xs = sketched.select_columns(&(0..p).collect::<Vec<_>>())?;
    let ys = sketched.col(p).to_vec();
    let scaled = lambda * n as f64 / n_subs as f64;
    ridge_closed_form(&RidgeProblem::new(&xs, &ys, scaled)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(n: usize, p: usize) -> (DenseMatrix, Vec<f64>) {
        let x = DenseMatrix::from_fn(n, p, |i, j| ((i * 31 + j * 17) as f64 * 0.13).sin());
        let y = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        (x, y)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        crate::linalg::distance(a, b) <= tol * crate::linalg::norm(b).max(1.0)
    }

    #[test]
    fn diagonal_blind_to_duplicates() {
        let v = [1.0, 2.0, -1.0];
        let x = DenseMatrix::from_columns(&[&v, &v]).unwrap();
        assert_eq!(diagonal_approx(&x, &v).unwrap(), vec![1.0, 1.0]);
        let z = DenseMatrix::from_columns(&[&v, &[0.0; 3]]).unwrap();
        assert!(matches!(diagonal_approx(&z, &v), Err(Error::DegenerateColumn { column: 1 })));
    }

    #[test]
    fn full_width_srht_sketches_reproduce_ridge() {
        let (x, y) = design(16, 8);
        let full = fit_baseline(BaselineKind::FullRidge, &x, &y, 0.1, 0, ProjectionKind::Srht).unwrap();
        let col = column_compression(&x, &y, 0.1, 8, 3, ProjectionKind::Srht).unwrap();
        assert!(close(&col, &full, 1e-8));
        let row = row_compression(&x, &y, 0.1, 16, 3, ProjectionKind::Srht).unwrap();
        assert!(close(&row, &full, 1e-8));
    }

    #[test]
    fn degenerate_sizes() {
        let (x, y) = design(12, 6);
        let proj = ProjectionSpec::new(ProjectionKind::Sparse, 6, 1, 4).unwrap().realize().unwrap();
        let b = column_compression(&x, &y, 0.5, 1, 4, ProjectionKind::Sparse).unwrap();
        let col = proj.to_dense().col(0).to_vec();
        // b is a multiple of Π's only column.
        let k = dot(&b, &col) / dot(&col, &col);
        assert!(b.iter().zip(&col).all(|(u, v)| (u - k * v).abs() < 1e-12));
        assert_eq!(row_compression(&x, &y, 0.5, 1, 4, ProjectionKind::Sparse).unwrap().len(), 6);
        assert!(column_compression(&x, &y, 0.5, 7, 4, ProjectionKind::Sparse).is_err());
    }
}
