//! Prediction and coefficient metrics.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    Length { left: usize, right: usize },
    TooShort(usize),
    /// The reference has no spread, so the ratio is undefined.
    Degenerate(&'static str),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::Length { left, right } => write!(f, "length mismatch: {left} vs {right}"),
            MetricError::TooShort(n) => write!(f, "need at least two values, got {n}"),
            MetricError::Degenerate(what) => write!(f, "{what} is degenerate"),
        }
    }
}

impl std::error::Error for MetricError {}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Length { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(MetricError::TooShort(a.len()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `‖y − ŷ‖² / ‖y − ȳ‖²`; predicting the mean scores 1.
pub fn normalized_mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    same_len(y_true, y_pred)?;
    let m = mean(y_true);
    let spread: f64 = y_true.iter().map(|y| (y - m) * (y - m)).sum();
    if spread == 0.0 {
        return Err(MetricError::Degenerate("constant response"));
    }
    let err: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(err / spread)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    same_len(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricError::Degenerate("zero-variance vector"));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// `(‖β̂ − β‖²/‖β‖², corr(β̂, β))`.
pub fn coefficient_metrics(beta_hat: &[f64], beta_ref: &[f64]) -> Result<(f64, f64), MetricError> {
    same_len(beta_hat, beta_ref)?;
    let denom: f64 = beta_ref.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(MetricError::Degenerate("reference coefficients"));
    }
    let num: f64 = beta_hat.iter().zip(beta_ref).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((num / denom, pearson(beta_hat, beta_ref)?))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn average(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| mean(values))
}
