//! Synthetic regression data with block-correlated Gaussian features.
//!
//! Features are split into `R` blocks. Within block `r` every pair of
//! features has correlation `σ_r`; features in different blocks are
//! independent. The true coefficients of block `r` are `N(μ_r, 0.5)` around a
//! block mean `μ_r` drawn from `{−10, …, −1, 1, …, 10}`. Responses are
//! `Y = Xβ* + (σ_s/SNR)ε` with `σ_s` the (divisor-n) standard deviation of the
//! noiseless training signal. Finally the columns of `X` and the entries of
//! `β*` are shuffled by one shared permutation.

mod io;

pub use io::{read_dataset, read_matrix, write_dataset, write_matrix};

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, singular_values, DenseMatrix, SINGULAR_RTOL};
use crate::rng::{derive_seed, stream_rng, Rng};
use crate::{Error, Result};

/// Integer pool for the block means.
const MEAN_POOL: [i32; 20] = [-10, -9, -8, -7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

// Sub-seeds for the independent pieces of a dataset.
const X_TRAIN: u64 = 11;
const X_TEST: u64 = 12;
const MEANS: u64 = 13;
const BETA: u64 = 14;
const NOISE_TRAIN: u64 = 15;
const NOISE_TEST: u64 = 16;
const PERMUTATION: u64 = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Correlation {
    Uniform(f64),
    PerBlock(Vec<f64>),
}

impl Correlation {
    fn for_block(&self, r: usize) -> f64 {
        match self {
            Correlation::Uniform(s) => *s,
            Correlation::PerBlock(v) => v[r],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    /// Number of correlation blocks `R`.
    pub blocks: usize,
    pub correlation: Correlation,
    pub snr: f64,
    pub seed: u64,
    #[serde(default)]
    pub n_test: usize,
    /// Draw block means with replacement, which lifts the `R ≤ 20` cap.
    #[serde(default)]
    pub allow_mean_reuse: bool,
}

impl SimSpec {
    pub fn new(n: usize, p: usize, blocks: usize, correlation: f64, snr: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            blocks,
            correlation: Correlation::Uniform(correlation),
            snr,
            seed,
            n_test: 0,
            allow_mean_reuse: false,
        }
    }

    /// Named desk-scale presets: `scenario-one-desk` and `scenario-two-desk`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "scenario-one-desk" => Ok(Self {
                n_test: 250,
                ..Self::new(1000, 4096, 16, 0.7, 1.0, seed)
            }),
            "scenario-two-desk" => Ok(Self {
                n_test: 500,
                allow_mean_reuse: true,
                ..Self::new(2000, 16384, 32, 0.7, 1.0, seed)
            }),
            other => Err(Error::config(format!("unknown dataset preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::config(format!("need n >= 2 and p >= 1, got n={} p={}", self.n, self.p)));
        }
        if self.blocks == 0 || self.blocks > self.p {
            return Err(Error::config(format!(
                "block count {} must lie in 1..={}",
                self.blocks, self.p
            )));
        }
        if self.blocks > MEAN_POOL.len() && !self.allow_mean_reuse {
            return Err(Error::config(format!(
                "{} blocks exceed the {} distinct block means; set allow_mean_reuse",
                self.blocks,
                MEAN_POOL.len()
            )));
        }
        if let Correlation::PerBlock(v) = &self.correlation {
            if v.len() != self.blocks {
                return Err(Error::config(format!(
                    "{} correlations given for {} blocks",
                    v.len(),
                    self.blocks
                )));
            }
        }
        for r in 0..self.blocks {
            let s = self.correlation.for_block(r);
            if !(0.0..1.0).contains(&s) {
                return Err(Error::config(format!("block correlation {s} outside [0, 1)")));
            }
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::config(format!("SNR must be positive, got {}", self.snr)));
        }
        Ok(())
    }

    /// Sizes of the correlation blocks, larger ones first.
    pub fn block_sizes(&self) -> Vec<usize> {
        let (base, extra) = (self.p / self.blocks, self.p % self.blocks);
        (0..self.blocks).map(|r| base + usize::from(r < extra)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub spec: SimSpec,
    pub x_train: DenseMatrix,
    pub y_train: Vec<f64>,
    /// `None` when `n_test = 0`.
    pub x_test: Option<DenseMatrix>,
    pub y_test: Vec<f64>,
    /// True coefficients, in the permuted column order of `x_train`.
    pub beta_star: Vec<f64>,
    /// `std(Xβ*)` on the training rows.
    pub signal_std: f64,
    /// Standard deviation of the added noise, `signal_std / snr`.
    pub noise_scale: f64,
    /// Column `j` of the stored data is column `permutation[j]` of the
    /// block-ordered data.
    pub permutation: Vec<usize>,
    /// Correlation block of each stored column.
    pub feature_block: Vec<usize>,
}

/// Draws `rows` samples with the block covariance of `spec`, in block order.
fn block_design(spec: &SimSpec, factors: &[DenseMatrix], rows: usize, rng: &mut Rng) -> DenseMatrix {
    let mut data = Vec::with_capacity(rows * spec.p);
    for l in factors {
        let z = DenseMatrix::from_fn(rows, l.rows(), |_, _| gauss(rng));
        // Rows x = L z, i.e. X_block = Z Lᵀ.
        let xb = z.matmul(&l.transpose()).expect("block shapes agree");
        data.extend_from_slice(xb.as_slice());
    }
    DenseMatrix::from_parts(rows, spec.p, data)
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn divisor_n_std(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Generates a dataset. The same spec always yields the same bits.
pub fn generate(spec: &SimSpec) -> Result<SimulatedDataset> {
    spec.validate()?;
    let sizes = spec.block_sizes();
    let factors = sizes
        .iter()
        .enumerate()
        .map(|(r, &b)| {
            let s = spec.correlation.for_block(r);
            cholesky(&DenseMatrix::from_fn(b, b, |i, j| if i == j { 1.0 } else { s }))
        })
        .collect::<Result<Vec<_>>>()?;
    let sub = |k| stream_rng(derive_seed(spec.seed, k), 0);

    let x_ordered = block_design(spec, &factors, spec.n, &mut sub(X_TRAIN));
    let x_test_ordered =
        (spec.n_test > 0).then(|| block_design(spec, &factors, spec.n_test, &mut sub(X_TEST)));

    let mut mean_rng = sub(MEANS);
    let means: Vec<f64> = if spec.allow_mean_reuse {
        (0..spec.blocks)
            .map(|_| MEAN_POOL[mean_rng.random_range(0..MEAN_POOL.len())] as f64)
            .collect()
    } else {
        index::sample(&mut mean_rng, MEAN_POOL.len(), spec.blocks)
            .into_iter()
            .map(|i| MEAN_POOL[i] as f64)
            .collect()
    };
    let mut beta_rng = sub(BETA);
    let mut beta_ordered = Vec::with_capacity(spec.p);
    let mut block_ordered = Vec::with_capacity(spec.p);
    for (r, &b) in sizes.iter().enumerate() {
        let dist = Normal::new(means[r], 0.5_f64.sqrt()).expect("positive sd");
        for _ in 0..b {
            beta_ordered.push(dist.sample(&mut beta_rng));
            block_ordered.push(r);
        }
    }

    let mut permutation: Vec<usize> = (0..spec.p).collect();
    permutation.shuffle(&mut sub(PERMUTATION));
    let x_train = x_ordered.select_columns(&permutation)?;
    let x_test = x_test_ordered.map(|x| x.select_columns(&permutation)).transpose()?;
    let beta_star: Vec<f64> = permutation.iter().map(|&i| beta_ordered[i]).collect();
    let feature_block = permutation.iter().map(|&i| block_ordered[i]).collect();

    let signal = x_train.matvec(&beta_star)?;
    let signal_std = divisor_n_std(&signal);
    let noise_scale = signal_std / spec.snr;
    let mut noise_rng = sub(NOISE_TRAIN);
    let y_train = signal
        .iter()
        .map(|s| s + noise_scale * gauss(&mut noise_rng))
        .collect();
    let y_test = match &x_test {
        Some(x) => {
            let mut rng = sub(NOISE_TEST);
            x.matvec(&beta_star)?
                .iter()
                .map(|s| s + noise_scale * gauss(&mut rng))
                .collect()
        }
        None => Vec::new(),
    };

    Ok(SimulatedDataset {
        spec: spec.clone(),
        x_train,
        y_train,
        x_test,
        y_test,
        beta_star,
        signal_std,
        noise_scale,
        permutation,
        feature_block,
    })
}

/// `X = G·M/√rank` with Gaussian `G` (`n×rank`) and `M` (`rank×p`), an exactly
/// rank-`rank` design.
pub fn low_rank_design(n: usize, p: usize, rank: usize, seed: u64) -> Result<DenseMatrix> {
    if rank == 0 || rank > n.min(p) {
        return Err(Error::config(format!("rank {rank} impossible for a {n}x{p} design")));
    }
    let mut rng = stream_rng(derive_seed(seed, 21), 0);
    let g = DenseMatrix::from_fn(n, rank, |_, _| gauss(&mut rng));
    let m = DenseMatrix::from_fn(rank, p, |_, _| gauss(&mut rng));
    let mut x = g.matmul(&m)?;
    x.scale(1.0 / (rank as f64).sqrt());
    Ok(x)
}

/// `σ_R / σ_{R+1}` of the singular values of a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankGap {
    pub sigma_r: f64,
    pub sigma_next: f64,
    /// `f64::INFINITY` when `σ_{R+1}` is numerically zero (see
    /// [`SINGULAR_RTOL`]).
    pub ratio: f64,
}

pub fn effective_rank_report(x: &DenseMatrix, r: usize) -> Result<RankGap> {
    let (n, p) = x.shape();
    if r == 0 || n < r + 1 || p < r + 1 {
        return Err(Error::dim(format!("need n, p >= R + 1 = {} for a {n}x{p} design", r + 1)));
    }
    let sv = singular_values(x)?;
    let (sigma_r, sigma_next) = (sv[r - 1], sv[r]);
    let ratio = if sigma_next <= SINGULAR_RTOL * sv[0] { f64::INFINITY } else { sigma_r / sigma_next };
    Ok(RankGap { sigma_r, sigma_next, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(SimSpec::new(10, 8, 2, 1.0, 1.0, 0).validate().is_err());
        assert!(SimSpec::new(10, 40, 21, 0.5, 1.0, 0).validate().is_err());
        let mut s = SimSpec::new(10, 40, 21, 0.5, 1.0, 0);
        s.allow_mean_reuse = true;
        assert!(s.validate().is_ok());
        assert!(SimSpec::new(10, 8, 2, 0.5, 0.0, 0).validate().is_err());
        assert!(SimSpec::preset("scenario-one-desk", 1).unwrap().validate().is_ok());
        assert!(SimSpec::preset("scenario-two-desk", 1).unwrap().validate().is_ok());
        assert!(SimSpec::preset("nope", 1).is_err());
    }

    #[test]
    fn deterministic_and_permutation_consistent() {
        let mut spec = SimSpec::new(30, 12, 3, 0.6, 2.0, 5);
        spec.n_test = 7;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.x_train, b.x_train);
        assert_eq!(a.y_test, b.y_test);
        assert_eq!(a.x_test.as_ref().unwrap().rows(), 7);

        // Undo the permutation and compare the signal.
        let mut inverse = vec![0; 12];
        for (j, &i) in a.permutation.iter().enumerate() {
            inverse[i] = j;
        }
        let x_ordered = a.x_train.select_columns(&inverse).unwrap();
        let beta_ordered: Vec<f64> = inverse.iter().map(|&j| a.beta_star[j]).collect();
        let s1 = a.x_train.matvec(&a.beta_star).unwrap();
        let s2 = x_ordered.matvec(&beta_ordered).unwrap();
        assert!(crate::linalg::distance(&s1, &s2) < 1e-10);
        assert!((a.noise_scale - a.signal_std / 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_low_rank_has_infinite_gap() {
        let x = low_rank_design(20, 30, 4, 1).unwrap();
        let gap = effective_rank_report(&x, 4).unwrap();
        assert!(gap.ratio.is_infinite());
        assert!(effective_rank_report(&x, 20).is_err());
    }
}
