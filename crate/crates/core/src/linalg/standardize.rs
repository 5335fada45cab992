use super::DenseMatrix;
use crate::{Error, Result};

/// Per-column location and scale, fitted on one matrix and applicable to
/// another with the same columns (e.g. train statistics applied to test rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler {
    pub means: Vec<f64>,
    /// Divisor-n standard deviations. Zero marks a constant column.
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Standardized {
    pub matrix: DenseMatrix,
    /// Indices of zero-variance columns, which come back as all zeros.
    pub zero_variance: Vec<usize>,
}

/// Centers every column and scales it to unit divisor-n standard deviation.
pub fn standardize_columns(m: &DenseMatrix) -> Result<Standardized> {
    let scaler = ColumnScaler::fit(m)?;
    let matrix = scaler.transform(m)?;
    Ok(Standardized {
        matrix,
        zero_variance: scaler.zero_variance(),
    })
}

impl ColumnScaler {
    pub fn fit(m: &DenseMatrix) -> Result<Self> {
        let n = m.rows();
        if n < 2 {
            return Err(Error::dim(format!("standardization needs at least 2 rows, got {n}")));
        }
        let mut means = Vec::with_capacity(m.cols());
        let mut stds = Vec::with_capacity(m.cols());
        for j in 0..m.cols() {
            let col = m.col(j);
            let mu = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            // Constant columns can pick up rounding noise in the mean.
            let tiny = 1e-13 * mu.abs().max(f64::MIN_POSITIVE);
            means.push(mu);
            stds.push(if sd <= tiny { 0.0 } else { sd });
        }
        Ok(Self { means, stds })
    }

    pub fn zero_variance(&self) -> Vec<usize> {
        (0..self.stds.len()).filter(|&j| self.stds[j] == 0.0).collect()
    }

    pub fn transform(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.cols() != self.means.len() {
            return Err(Error::dim(format!(
                "scaler fitted on {} columns, got {}",
                self.means.len(),
                m.cols()
            )));
        }
        let mut out = m.clone();
        for j in 0..m.cols() {
            let (mu, sd) = (self.means[j], self.stds[j]);
            let col = out.col_mut(j);
            if sd == 0.0 {
                col.fill(0.0);
            } else {
                col.iter_mut().for_each(|x| *x = (*x - mu) / sd);
            }
        }
        Ok(out)
    }
}
