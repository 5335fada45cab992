//! Random projections `Π ∈ ℝ^{τ×τ_subs}` applied on the right of a data
//! block, `X ↦ XΠ`.
//!
//! Every kind is scaled so that `E[ΠΠᵀ] = I`. A [`ProjectionSpec`] (kind,
//! dimensions, seed) determines the realized operator bit for bit.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, DenseMatrix};
use crate::rng::{stream_rng, streams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    /// `√(τ_pad/τ_subs)·D·H·S`: random signs, normalized Walsh-Hadamard,
    /// uniform column sampling without replacement.
    #[default]
    Srht,
    /// i.i.d. entries `+1, 0, −1` with probabilities `1/6, 2/3, 1/6`,
    /// scaled by `√(3/τ_subs)`.
    Sparse,
    /// i.i.d. `N(0, 1/τ_subs)` entries.
    Gaussian,
    /// i.i.d. `±1/√τ_subs` entries.
    Sign,
}

impl ProjectionKind {
    /// Excess kurtosis `E[r⁴] − 3` of a unit-variance entry, for the kinds
    /// with i.i.d. entries.
    pub fn kurtosis(self) -> Option<f64> {
        match self {
            ProjectionKind::Srht => None,
            ProjectionKind::Sparse | ProjectionKind::Gaussian => Some(0.0),
            ProjectionKind::Sign => Some(-2.0),
        }
    }

    pub fn has_iid_entries(self) -> bool {
        self.kurtosis().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    /// `τ`, the number of input columns.
    pub input_dim: usize,
    /// `τ_subs`, the number of output columns.
    pub output_dim: usize,
    pub seed: u64,
}

impl ProjectionSpec {
    pub fn new(kind: ProjectionKind, input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        let spec = Self { kind, input_dim, output_dim, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::dim(format!(
                "projection dimensions must be positive, got {} -> {}",
                self.input_dim, self.output_dim
            )));
        }
        if self.output_dim > self.input_dim {
            return Err(Error::dim(format!(
                "cannot project {} columns up to {}",
                self.input_dim, self.output_dim
            )));
        }
        Ok(())
    }

    pub fn realize(&self) -> Result<Projection> {
        Projection::new(*self)
    }
}

#[derive(Debug, Clone)]
enum Operator {
    Srht {
        pad: usize,
        signs: Vec<f64>,
        sample: Vec<usize>,
        scale: f64,
    },
    /// Column `c` of Π holds `±scale` at the listed input rows.
    Sparse {
        columns: Vec<Vec<(usize, f64)>>,
        scale: f64,
    },
    Dense(DenseMatrix),
}

/// A realized projection operator.
#[derive(Debug, Clone)]
pub struct Projection {
    spec: ProjectionSpec,
    op: Operator,
}

impl Projection {
    pub fn new(spec: ProjectionSpec) -> Result<Self> {
        spec.validate()?;
        let (tau, out) = (spec.input_dim, spec.output_dim);
        let mut rng = stream_rng(spec.seed, streams::PROJECTION);
        let op = match spec.kind {
            ProjectionKind::Srht => {
                let pad = tau.next_power_of_two();
                let signs = (0..tau)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect();
                let mut sample = index::sample(&mut rng, pad, out).into_vec();
                sample.sort_unstable();
                Operator::Srht {
                    pad,
                    signs,
                    sample,
                    scale: (pad as f64 / out as f64).sqrt(),
                }
            }
            ProjectionKind::Sparse => {
                let columns = (0..out)
                    .map(|_| {
                        (0..tau)
                            .filter_map(|i| {
                                let u: f64 = rng.random();
                                if u < 1.0 / 6.0 {
                                    Some((i, 1.0))
                                } else if u < 1.0 / 3.0 {
                                    Some((i, -1.0))
                                } else {
                                    None
                                }
                            })
                            .collect()
                    })
                    .collect();
                Operator::Sparse {
                    columns,
                    scale: (3.0 / out as f64).sqrt(),
                }
            }
            ProjectionKind::Gaussian => {
                let s = 1.0 / (out as f64).sqrt();
                Operator::Dense(DenseMatrix::from_fn(tau, out, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s * z
                }))
            }
            ProjectionKind::Sign => {
                let s = 1.0 / (out as f64).sqrt();
                Operator::Dense(DenseMatrix::from_fn(tau, out, |_, _| {
                    if rng.random::<bool>() {
                        s
                    } else {
                        -s
                    }
                }))
            }
        };
        Ok(Self { spec, op })
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    /// `XΠ` for an `n×τ` block.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::dim(format!(
                "projection expects {} columns, block has {}",
                self.spec.input_dim,
                x.cols()
            )));
        }
        let n = x.rows();
        let out = self.spec.output_dim;
        Ok(match &self.op {
            Operator::Srht { pad, signs, sample, scale } => {
                // Butterflies act on whole columns, so each stage is a pair of
                // contiguous vector updates.
                let mut buf = vec![0.0; n * pad];
                for (j, &s) in signs.iter().enumerate() {
                    let dst = &mut buf[j * n..(j + 1) * n];
                    dst.iter_mut().zip(x.col(j)).for_each(|(d, v)| *d = s * v);
                }
                butterflies(&mut buf, n, *pad);
                let norm = scale / (*pad as f64).sqrt();
                let mut data = Vec::with_capacity(n * out);
                for &c in sample {
                    data.extend(buf[c * n..(c + 1) * n].iter().map(|v| v * norm));
                }
                DenseMatrix::from_parts(n, out, data)
            }
            Operator::Sparse { columns, scale } => {
                let mut y = DenseMatrix::zeros(n, out);
                for (c, entries) in columns.iter().enumerate() {
                    let dst = y.col_mut(c);
                    for &(i, s) in entries {
                        axpy(s * scale, x.col(i), dst);
                    }
                }
                y
            }
            Operator::Dense(p) => x.matmul(p)?,
        })
    }

    /// `Πv` for `v ∈ ℝ^{τ_subs}`, mapping a coefficient vector on the
    /// projected columns back to the input coordinates.
    pub fn lift(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.spec.output_dim {
            return Err(Error::dim(format!(
                "lift expects length {}, got {}",
                self.spec.output_dim,
                v.len()
            )));
        }
        let tau = self.spec.input_dim;
        Ok(match &self.op {
            Operator::Srht { pad, signs, sample, scale } => {
                let mut buf = vec![0.0; *pad];
                for (&c, &vi) in sample.iter().zip(v) {
                    buf[c] = vi;
                }
                fwht_in_place(&mut buf)?;
                (0..tau).map(|i| scale * signs[i] * buf[i]).collect()
            }
            Operator::Sparse { columns, scale } => {
                let mut out = vec![0.0; tau];
                for (entries, &vc) in columns.iter().zip(v) {
                    for &(i, s) in entries {
                        out[i] += s * scale * vc;
                    }
                }
                out
            }
            Operator::Dense(p) => p.matvec(v)?,
        })
    }

    /// `Πᵀu` for `u ∈ ℝ^τ`.
    pub fn restrict(&self, u: &[f64]) -> Result<Vec<f64>> {
        let row = DenseMatrix::new(1, u.len(), u.to_vec())?;
        Ok(self.apply(&row)?.into_vec())
    }

    /// The `τ×τ_subs` matrix Π.
    pub fn to_dense(&self) -> DenseMatrix {
        let (tau, out) = (self.spec.input_dim, self.spec.output_dim);
        let mut p = DenseMatrix::zeros(tau, out);
        let mut e = vec![0.0; out];
        for c in 0..out {
            e[c] = 1.0;
            let col = self.lift(&e).expect("dimensions match");
            p.col_mut(c).copy_from_slice(&col);
            e[c] = 0.0;
        }
        p
    }
}

/// In-place unnormalized Walsh-Hadamard butterflies over the `len` columns
/// (each of height `n`) stored in `buf`.
fn butterflies(buf: &mut [f64], n: usize, len: usize) {
    let mut h = 1;
    while h < len {
        for start in (0..len).step_by(2 * h) {
            for j in start..start + h {
                let (lo, hi) = buf.split_at_mut((j + h) * n);
                let a = &mut lo[j * n..(j + 1) * n];
                let b = &mut hi[..n];
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = u + v;
                    *y = u - v;
                }
            }
        }
        h *= 2;
    }
}

/// Normalized Walsh-Hadamard transform `Hv` with `H` orthonormal and symmetric.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let len = v.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::dim(format!("fwht length {len} is not a power of two")));
    }
    butterflies(v, 1, len);
    let s = 1.0 / (len as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    Ok(())
}

fn apply_kind(x: &DenseMatrix, spec: &ProjectionSpec, kind: ProjectionKind) -> Result<DenseMatrix> {
    if spec.kind != kind {
        return Err(Error::Config(format!("expected a {kind:?} spec, got {:?}", spec.kind)));
    }
    spec.realize()?.apply(x)
}

pub fn srht_apply(x: &DenseMatrix, spec: &ProjectionSpec) -> Result<DenseMatrix> {
    apply_kind(x, spec, ProjectionKind::Srht)
}

pub fn sparse_apply(x: &DenseMatrix, spec: &ProjectionSpec) -> Result<DenseMatrix> {
    apply_kind(x, spec, ProjectionKind::Sparse)
}

/// A worker's published sketch `X_k Π_k`.
#[derive(Debug, Clone)]
pub struct ProjectedBlock {
    pub worker_id: usize,
    pub data: DenseMatrix,
}

/// How a worker combines the sketches it receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMode {
    /// Side by side, in ascending worker id.
    #[default]
    Concatenate,
    /// Entrywise sum.
    Sum,
}

/// Merges every block except `self_id`'s.
pub fn merge_projections(
    blocks: &[&ProjectedBlock],
    mode: MergeMode,
    self_id: usize,
) -> Result<DenseMatrix> {
    let mut others: Vec<&ProjectedBlock> = blocks
        .iter()
        .copied()
        .filter(|b| b.worker_id != self_id)
        .collect();
    others.sort_by_key(|b| b.worker_id);
    let first = others
        .first()
        .ok_or_else(|| Error::dim("no projected blocks to merge"))?;
    let n = first.data.rows();
    if let Some(bad) = others.iter().find(|b| b.data.rows() != n) {
        return Err(Error::dim(format!(
            "block from worker {} has {} rows, expected {n}",
            bad.worker_id,
            bad.data.rows()
        )));
    }
    match mode {
        MergeMode::Concatenate => {
            let cols: usize = others.iter().map(|b| b.data.cols()).sum();
            let mut data = Vec::with_capacity(n * cols);
            for b in &others {
                data.extend_from_slice(b.data.as_slice());
            }
            Ok(DenseMatrix::from_parts(n, cols, data))
        }
        MergeMode::Sum => {
            let mut acc = first.data.clone();
            for b in &others[1..] {
                acc = acc.add(&b.data)?;
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(rows: usize, cols: usize, salt: f64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 + salt).sin())
    }

    #[test]
    fn hadamard_small_cases() {
        let h = fwht(&[1.0, 0.0]).unwrap();
        let r = 0.5_f64.sqrt();
        assert!((h[0] - r).abs() < 1e-15 && (h[1] - r).abs() < 1e-15);
        assert_eq!(fwht(&[1.0; 4]).unwrap(), vec![2.0, 0.0, 0.0, 0.0]);
        assert!(fwht(&[1.0; 3]).is_err());
        let v: Vec<f64> = (0..16).map(|i| (i as f64).cos()).collect();
        let back = fwht(&fwht(&v).unwrap()).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn rejects_upward_projection() {
        assert!(matches!(
            ProjectionSpec::new(ProjectionKind::Srht, 4, 5, 0),
            Err(Error::Dimension(_))
        ));
        let spec = ProjectionSpec::new(ProjectionKind::Sparse, 4, 2, 0).unwrap();
        assert!(spec.realize().unwrap().apply(&block(3, 5, 0.0)).is_err());
    }

    #[test]
    fn apply_matches_dense_operator() {
        for kind in [
            ProjectionKind::Srht,
            ProjectionKind::Sparse,
            ProjectionKind::Gaussian,
            ProjectionKind::Sign,
        ] {
            for (tau, out) in [(8, 3), (11, 5), (16, 16)] {
                let p = ProjectionSpec::new(kind, tau, out, 42).unwrap().realize().unwrap();
                let x = block(6, tau, 0.3);
                let fast = p.apply(&x).unwrap();
                let slow = x.matmul(&p.to_dense()).unwrap();
                assert!(fast.sub(&slow).unwrap().max_abs() < 1e-12, "{kind:?}");
                let u: Vec<f64> = (0..tau).map(|i| i as f64 * 0.1).collect();
                let r = p.restrict(&u).unwrap();
                let want = p.to_dense().t_matvec(&u).unwrap();
                assert!(r.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn full_srht_preserves_row_norms() {
        let p = ProjectionSpec::new(ProjectionKind::Srht, 16, 16, 9).unwrap().realize().unwrap();
        let x = block(5, 16, 1.0);
        let y = p.apply(&x).unwrap();
        for i in 0..5 {
            let a: f64 = x.row(i).iter().map(|v| v * v).sum();
            let b: f64 = y.row(i).iter().map(|v| v * v).sum();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn merge_orders_by_worker() {
        let a = ProjectedBlock { worker_id: 2, data: block(3, 2, 0.0) };
        let b = ProjectedBlock { worker_id: 0, data: block(3, 2, 5.0) };
        let me = ProjectedBlock { worker_id: 1, data: block(3, 2, 9.0) };
        let cat = merge_projections(&[&a, &me, &b], MergeMode::Concatenate, 1).unwrap();
        assert_eq!(cat.cols(), 4);
        assert_eq!(cat.col(0), b.data.col(0));
        assert_eq!(cat.col(3), a.data.col(1));
        let sum = merge_projections(&[&a, &me, &b], MergeMode::Sum, 1).unwrap();
        assert!(sum.sub(&a.data.add(&b.data).unwrap()).unwrap().max_abs() == 0.0);
        let only = merge_projections(&[&a, &me], MergeMode::Sum, 1).unwrap();
        assert_eq!(only, a.data);
        let bad = ProjectedBlock { worker_id: 3, data: block(4, 2, 0.0) };
        assert!(merge_projections(&[&a, &bad], MergeMode::Concatenate, 1).is_err());
    }
}
