//! Ridge regression solvers for `min_β n⁻¹‖Y − Xβ‖² + λ‖β‖²`.

use std::time::{Duration, Instant};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, Cholesky, DenseMatrix};
use crate::rng::{stream_rng, streams};
use crate::{Error, Result};

/// Relative pivot floor used to declare the unregularized normal equations
/// singular.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct RidgeProblem<'a> {
    pub x: &'a DenseMatrix,
    pub y: &'a [f64],
    pub lambda: f64,
}

impl<'a> RidgeProblem<'a> {
    pub fn new(x: &'a DenseMatrix, y: &'a [f64], lambda: f64) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::dim(format!(
                "response has length {}, design has {} rows",
                y.len(),
                x.rows()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("response has non-finite entries".into()));
        }
        Ok(Self { x, y, lambda })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }
}

/// `n⁻¹‖y − Xβ‖² + λ‖β‖²`.
pub fn ridge_objective(x: &DenseMatrix, y: &[f64], beta: &[f64], lambda: f64) -> Result<f64> {
    let fit = x.matvec(beta)?;
    let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(rss / x.rows() as f64 + lambda * dot(beta, beta))
}

/// A factorized ridge system that can be solved for many responses.
///
/// Uses the `d×d` normal equations when `d ≤ n` and the `n×n` dual system
/// `(XXᵀ + nλI)α = Y`, `β = Xᵀα` otherwise.
#[derive(Debug, Clone)]
pub struct RidgeFactor {
    x: DenseMatrix,
    chol: Cholesky,
    dual: bool,
}

impl RidgeFactor {
    pub fn new(x: &DenseMatrix, lambda: f64) -> Result<Self> {
        Self::from_owned(x.clone(), lambda)
    }

    pub fn from_owned(x: DenseMatrix, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let (n, d) = x.shape();
        let dual = d > n;
        if lambda == 0.0 && dual {
            return Err(Error::Rank(format!(
                "XᵀX is {d}x{d} but has rank at most {n}"
            )));
        }
        let mut g = if dual { x.outer_gram() } else { x.gram() };
        g.add_to_diagonal(n as f64 * lambda);
        let chol = if lambda == 0.0 {
            Cholesky::factor(&g, RANK_TOL)
                .map_err(|_| Error::Rank("XᵀX is numerically singular".into()))?
        } else {
            Cholesky::factor(&g, 0.0)?
        };
        Ok(Self { x, chol, dual })
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.x.rows() {
            return Err(Error::dim(format!(
                "response has length {}, design has {} rows",
                y.len(),
                self.x.rows()
            )));
        }
        if self.dual {
            let alpha = self.chol.solve(y);
            self.x.t_matvec(&alpha)
        } else {
            let mut b = self.x.t_matvec(y)?;
            self.chol.solve_in_place(&mut b);
            Ok(b)
        }
    }

    /// Solves for every column of `ys` (`n×m`), returning `d×m`.
    pub fn solve_many(&self, ys: &DenseMatrix) -> Result<DenseMatrix> {
        if ys.rows() != self.x.rows() {
            return Err(Error::dim("response block has the wrong number of rows"));
        }
        if self.dual {
            let alpha = self.chol.solve_matrix(ys);
            self.x.t_matmul(&alpha)
        } else {
            let rhs = self.x.t_matmul(ys)?;
            Ok(self.chol.solve_matrix(&rhs))
        }
    }
}

/// Exact ridge solution `(XᵀX + nλI)⁻¹XᵀY`.
pub fn ridge_closed_form(p: &RidgeProblem<'_>) -> Result<Vec<f64>> {
    RidgeFactor::new(p.x, p.lambda)?.solve(p.y)
}

/// Least-squares solution of minimal norm, taken as ridge with a vanishing
/// penalty.
pub fn ols_min_norm(x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = x.shape();
    let fro2 = x.frobenius_norm().powi(2);
    if fro2 == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let mut lambda = 1e-10 * fro2 / (n * d) as f64;
    let mut beta = ridge_closed_form(&RidgeProblem::new(x, y, lambda)?)?;
    for _ in 0..8 {
        lambda /= 2.0;
        let next = ridge_closed_form(&RidgeProblem::new(x, y, lambda)?)?;
        let change = crate::linalg::distance(&beta, &next);
        let size = crate::linalg::norm(&next);
        beta = next;
        if change <= 1e-6 * size || size == 0.0 {
            break;
        }
    }
    Ok(beta)
}

/// Coefficient `j` of the least-squares fit, computed from the residual `ẑ`
/// of column `j` regressed on the other columns: `(ẑ·Y)/(ẑ·Xʲ)`.
pub fn residual_coefficient(x: &DenseMatrix, y: &[f64], j: usize) -> Result<f64> {
    let (n, d) = x.shape();
    if j >= d {
        return Err(Error::dim(format!("column {j} out of range 0..{d}")));
    }
    if y.len() != n {
        return Err(Error::dim("response length does not match design"));
    }
    let xj = x.col(j);
    let xj_norm = crate::linalg::norm(xj);
    if xj_norm == 0.0 {
        return Err(Error::DegenerateColumn { column: j });
    }
    let mut z = xj.to_vec();
    if d > 1 {
        let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
        let rest = x.select_columns(&others)?;
        let gamma = match ridge_closed_form(&RidgeProblem::new(&rest, xj, 0.0)?) {
            Ok(g) => g,
            Err(Error::Rank(_)) => ols_min_norm(&rest, xj)?,
            Err(e) => return Err(e),
        };
        let fitted = rest.matvec(&gamma)?;
        axpy(-1.0, &fitted, &mut z);
    }
    if crate::linalg::norm(&z) < 1e-10 * xj_norm {
        return Err(Error::Collinearity { column: j });
    }
    Ok(dot(&z, y) / dot(&z, xj))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdcaOptions {
    pub gap_tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SdcaOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, max_epochs: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub epochs: usize,
    /// Final duality gap (SDCA) or zero for the direct solver.
    pub gap: f64,
    pub converged: bool,
    #[serde(with = "crate::duration_secs")]
    pub wall_time: Duration,
}

impl SolverDiagnostics {
    pub fn direct(wall_time: Duration) -> Self {
        Self { epochs: 0, gap: 0.0, converged: true, wall_time }
    }
}

/// Stochastic dual coordinate ascent on the squared loss.
///
/// With `λ' = 2λ` the problem reads `n⁻¹Σφᵢ(xᵢᵀw) + (λ'/2)‖w‖²`,
/// `φᵢ(a) = (a − yᵢ)²`, and `w(α) = (λ'n)⁻¹ Σ αᵢxᵢ`. Each epoch performs
/// `n` exact coordinate maximizations at uniformly drawn indices; the duality
/// gap is evaluated at the end of every epoch.
pub fn ridge_sdca(p: &RidgeProblem<'_>, opts: &SdcaOptions) -> Result<(Vec<f64>, SolverDiagnostics)> {
    if p.lambda <= 0.0 {
        return Err(Error::Unsupported(
            "SDCA needs a strictly positive lambda".into(),
        ));
    }
    let start = Instant::now();
    let (n, d) = (p.n(), p.d());
    let lp = 2.0 * p.lambda;
    let ln = lp * n as f64;
    // Rows of X as contiguous columns.
    let xt = p.x.transpose();
    let sq: Vec<f64> = (0..n).map(|i| dot(xt.col(i), xt.col(i))).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut rng = stream_rng(opts.seed, streams::SOLVER);

    let gap_of = |alpha: &[f64], w: &[f64]| -> Result<f64> {
        let primal = ridge_objective(p.x, p.y, w, p.lambda)?;
        let dual_loss: f64 = alpha
            .iter()
            .zip(p.y)
            .map(|(a, y)| a * y - a * a / 4.0)
            .sum::<f64>()
            / n as f64;
        let dual = dual_loss - p.lambda * dot(w, w);
        Ok((primal - dual).max(0.0))
    };

    let mut gap = gap_of(&alpha, &w)?;
    let mut epochs = 0;
    let mut converged = false;
    while epochs < opts.max_epochs {
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let xi = xt.col(i);
            let delta = (p.y[i] - dot(xi, &w) - alpha[i] / 2.0) / (0.5 + sq[i] / ln);
            if delta != 0.0 {
                alpha[i] += delta;
                axpy(delta / ln, xi, &mut w);
            }
        }
        epochs += 1;
        // Rebuild w from α so rounding does not accumulate across epochs.
        w.fill(0.0);
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                axpy(a / ln, xt.col(i), &mut w);
            }
        }
        gap = gap_of(&alpha, &w)?;
        if gap <= opts.gap_tol {
            converged = true;
            break;
        }
    }
    Ok((
        w,
        SolverDiagnostics { epochs, gap, converged, wall_time: start.elapsed() },
    ))
}
