//! Symmetric eigensolvers.
//!
//! Small matrices use cyclic Jacobi rotations. Larger ones are reduced to
//! tridiagonal form with Householder reflections and finished with implicit
//! QL iterations, which is much cheaper once `n` reaches the hundreds.

use super::DenseMatrix;
use crate::{Error, Result};

/// Matrices up to this order go through Jacobi.
const JACOBI_MAX: usize = 64;

/// Eigenvalues in descending order with matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEigen {
    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut vd = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            vd.col_mut(j).iter_mut().for_each(|v| *v *= l);
        }
        vd.matmul(&self.vectors.transpose()).expect("square factors")
    }
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    let asym = s
        .asymmetry()
        .ok_or_else(|| Error::dim(format!("eigen-decomposition of non-square {:?}", s.shape())))?;
    let tol = 1e-10 * s.max_abs().max(f64::MIN_POSITIVE);
    if asym > tol {
        return Err(Error::Validation(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Full eigen-decomposition of a symmetric matrix.
pub fn sym_eigen(s: &DenseMatrix) -> Result<SymEigen> {
    if s.rows() <= JACOBI_MAX {
        sym_eigen_jacobi(s)
    } else {
        sym_eigen_tridiagonal(s)
    }
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn sym_eigenvalues(s: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(s)?;
    if s.rows() <= JACOBI_MAX {
        return Ok(jacobi(s, false).0);
    }
    Ok(householder_ql(s, false).0)
}

pub fn sym_eigen_jacobi(s: &DenseMatrix) -> Result<SymEigen> {
    check_symmetric(s)?;
    let (values, vectors) = jacobi(s, true);
    Ok(SymEigen { values, vectors: vectors.expect("requested") })
}

pub fn sym_eigen_tridiagonal(s: &DenseMatrix) -> Result<SymEigen> {
    check_symmetric(s)?;
    let (values, vectors) = householder_ql(s, true);
    Ok(SymEigen { values, vectors: vectors.expect("requested") })
}

/// Sorts eigenpairs into descending order of eigenvalue.
fn sort_descending(d: Vec<f64>, v: Option<Vec<f64>>, n: usize) -> (Vec<f64>, Option<DenseMatrix>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = v.map(|v| {
        let mut data = Vec::with_capacity(n * n);
        for &j in &order {
            data.extend_from_slice(&v[j * n..(j + 1) * n]);
        }
        DenseMatrix::from_parts(n, n, data)
    });
    (values, vectors)
}

fn jacobi(s: &DenseMatrix, want_vectors: bool) -> (Vec<f64>, Option<DenseMatrix>) {
    let n = s.rows();
    let mut a = s.as_slice().to_vec();
    let mut v = want_vectors.then(|| DenseMatrix::identity(n).into_vec());
    let idx = |i: usize, j: usize| i + j * n;
    let total: f64 = a.iter().map(|x| x * x).sum();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| a[idx(i, j)] * a[idx(i, j)])
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[idx(p, p)], a[idx(q, q)]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- Jᵀ A J with J rotating the (p, q) plane.
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - sn * akq;
                    a[idx(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - sn * aqk;
                    a[idx(q, k)] = sn * apk + c * aqk;
                }
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[idx(k, p)];
                        let vkq = v[idx(k, q)];
                        v[idx(k, p)] = c * vkp - sn * vkq;
                        v[idx(k, q)] = sn * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let d = (0..n).map(|i| a[idx(i, i)]).collect();
    sort_descending(d, v, n)
}

/// Householder tridiagonalization followed by implicit-shift QL.
fn householder_ql(s: &DenseMatrix, want_vectors: bool) -> (Vec<f64>, Option<DenseMatrix>) {
    let n = s.rows();
    // v[r + c * n]: starts as the matrix, ends as the eigenvector basis.
    let mut v = s.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, want_vectors);
    tql2(n, &mut v, &mut d, &mut e, want_vectors);
    sort_descending(d, want_vectors.then_some(v), n)
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    let at = |r: usize, c: usize| r + c * n;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut h = 0.0;
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    let vkj = v[at(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (fj, gj) = (d[j], e[j]);
                for k in j..i {
                    v[at(k, j)] -= fj * e[k] + gj * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    if !want_vectors {
        // The tridiagonal's diagonal sits on v's diagonal at this point.
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
        e[0] = 0.0;
        return;
    }
    // Accumulate the reflections.
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[(l + 2)..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        let (left, right) = v.split_at_mut((i + 1) * n);
                        let col_i = &mut left[i * n..];
                        let col_i1 = &mut right[..n];
                        for (vi, vi1) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                            let hk = *vi1;
                            *vi1 = s * *vi + c * hk;
                            *vi = c * *vi - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}
