//! Computable versions of the approximation and risk bounds for the one-shot
//! estimator: the predicted and measured sketch quality `ρ`, the spectral
//! sandwich, the risk bound on `E‖β^rr − β^loco‖²`, compressive least squares,
//! and concatenated row sampling.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{
    partition_features, tau_subs_for, worker_projection_spec, FeaturePartition, LocoConfig,
    LocoOperator, MergeMode,
};
use crate::linalg::{
    dot, norm, numerical_rank, sym_eigen, sym_eigenvalues, DenseMatrix,
};
use crate::projections::{ProjectionKind, ProjectionSpec};
use crate::rng::{derive_seed, stream_rng, streams, Rng};
use crate::solvers::RidgeFactor;
use crate::{Error, Result};

/// `C·√(r·ln(2r/δ)/((K−1)τ_subs))`.
pub fn compute_rho(r: usize, delta: f64, k: usize, tau_subs: usize, c: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::config("rho is undefined for a single worker"));
    }
    if r == 0 || tau_subs == 0 || !(delta > 0.0 && delta < 1.0) || c.is_nan() || c <= 0.0 {
        return Err(Error::config(format!(
            "invalid rho arguments r={r} delta={delta} tau_subs={tau_subs} C={c}"
        )));
    }
    let r = r as f64;
    Ok(c * (r * (2.0 * r / delta).ln() / ((k - 1) * tau_subs) as f64).sqrt())
}

/// Principal directions of `X` with non-zero variance.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Non-zero eigenvalues of `XᵀX/n`, descending.
    pub values: Vec<f64>,
    /// Matching unit eigenvectors of `XᵀX` as columns (`p×r`).
    pub directions: DenseMatrix,
}

impl Pca {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// Coordinates `Vᵀβ` of a coefficient vector in the principal basis.
    pub fn rotate(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.directions.t_matvec(beta)
    }
}

/// Eigen-decomposition of `XᵀX/n` restricted to its numerical range, computed
/// from the Gram matrix on the smaller side.
pub fn pca(x: &DenseMatrix) -> Result<Pca> {
    let (n, p) = x.shape();
    let wide = n <= p;
    let g = if wide { x.outer_gram() } else { x.gram() };
    let eig = sym_eigen(&g)?;
    let sv: Vec<f64> = eig.values.iter().map(|l| l.max(0.0).sqrt()).collect();
    let r = numerical_rank(&sv);
    if r == 0 {
        return Err(Error::Rank("design is numerically zero".into()));
    }
    let keep: Vec<usize> = (0..r).collect();
    let top = eig.vectors.select_columns(&keep)?;
    let directions = if wide {
        // v_j = Xᵀu_j / σ_j
        let mut v = x.t_matmul(&top)?;
        for (j, &s) in sv[..r].iter().enumerate() {
            v.col_mut(j).iter_mut().for_each(|e| *e /= s);
        }
        v
    } else {
        top
    };
    let values = eig.values[..r].iter().map(|l| l / n as f64).collect();
    Ok(Pca { values, directions })
}

/// Measured `ρ̂_k = ‖VᵀΘ_kΘ_kᵀV − I_r‖` for every worker, where `Θ_k` keeps
/// worker `k`'s raw block and applies the other workers' (unstandardized)
/// projections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoReport {
    pub per_worker: Vec<f64>,
    pub max: f64,
    pub rank: usize,
}

fn require_concatenate(cfg: &LocoConfig) -> Result<()> {
    if cfg.merge != MergeMode::Concatenate {
        return Err(Error::Unsupported(
            "sketch-quality checks are defined for concatenated sketches only".into(),
        ));
    }
    Ok(())
}

/// Realized projections for every worker (empty when `K = 1`).
fn realized_specs(p: usize, partition: &FeaturePartition, cfg: &LocoConfig) -> Result<Vec<ProjectionSpec>> {
    if partition.k() < 2 {
        return Ok(Vec::new());
    }
    let ts = tau_subs_for(cfg, p);
    (0..partition.k())
        .map(|k| worker_projection_spec(cfg, k, partition.block(k).len(), ts))
        .collect()
}

pub fn empirical_rho(x: &DenseMatrix, cfg: &LocoConfig) -> Result<RhoReport> {
    require_concatenate(cfg)?;
    cfg.validate(x.cols())?;
    let p = x.cols();
    let pca = pca(x)?;
    let v = &pca.directions;
    let r = pca.rank();
    let partition = partition_features(p, cfg.workers, cfg.seed)?;
    let specs = realized_specs(p, &partition, cfg)?;
    if specs.is_empty() {
        return Ok(RhoReport { per_worker: vec![0.0], max: 0.0, rank: r });
    }
    // Per block: Vᵢᵀ (r×τ_i) and its sketch Vᵢᵀ Π_i (r×τ_subs).
    let mut raw_grams = Vec::with_capacity(partition.k());
    let mut sketch_grams = Vec::with_capacity(partition.k());
    for (k, spec) in specs.iter().enumerate() {
        let vt = v.select_rows(partition.block(k))?.transpose();
        raw_grams.push(vt.outer_gram());
        let sk = spec.realize()?.apply(&vt)?;
        sketch_grams.push(sk.outer_gram());
    }
    let mut per_worker = Vec::with_capacity(partition.k());
    for (k, raw) in raw_grams.iter().enumerate() {
        let mut m = raw.clone();
        for (k2, sg) in sketch_grams.iter().enumerate() {
            if k2 != k {
                m = m.add(sg)?;
            }
        }
        m.add_to_diagonal(-1.0);
        m.symmetrize();
        let ev = sym_eigenvalues(&m)?;
        per_worker.push(ev[0].abs().max(ev[r - 1].abs()));
    }
    let max = per_worker.iter().copied().fold(0.0, f64::max);
    Ok(RhoReport { per_worker, max, rank: r })
}

/// `XΘ_k`: worker `k`'s raw columns followed by the other workers' raw
/// (unstandardized) sketches in worker order.
pub fn theta_design(x: &DenseMatrix, cfg: &LocoConfig, k: usize) -> Result<DenseMatrix> {
    require_concatenate(cfg)?;
    cfg.validate(x.cols())?;
    let p = x.cols();
    let partition = partition_features(p, cfg.workers, cfg.seed)?;
    let specs = realized_specs(p, &partition, cfg)?;
    let mut out = x.select_columns(partition.block(k))?;
    for (k2, spec) in specs.iter().enumerate() {
        if k2 != k {
            let block = x.select_columns(partition.block(k2))?;
            out = out.hstack(&spec.realize()?.apply(&block)?)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub holds: bool,
    /// `λ_min((1+ρ)XXᵀ − X̄X̄ᵀ)`.
    pub upper_margin: f64,
    /// `λ_min(X̄X̄ᵀ − (1−ρ)XXᵀ)`.
    pub lower_margin: f64,
    /// Allowed negative slack, `1e-8·‖XXᵀ‖`.
    pub tolerance: f64,
}

/// Checks `(1−ρ)XXᵀ ⪯ X̄X̄ᵀ ⪯ (1+ρ)XXᵀ`.
pub fn spectral_sandwich_check(x: &DenseMatrix, xbar: &DenseMatrix, rho: f64) -> Result<SandwichReport> {
    if x.rows() != xbar.rows() {
        return Err(Error::dim("designs have different row counts"));
    }
    let a = x.outer_gram();
    let b = xbar.outer_gram();
    let a_norm = sym_eigenvalues(&a)?[0].max(0.0);
    let tolerance = 1e-8 * a_norm;
    let mut upper = a.clone();
    upper.scale(1.0 + rho);
    let upper = upper.sub(&b)?;
    let mut lower_a = a;
    lower_a.scale(1.0 - rho);
    let lower = b.sub(&lower_a)?;
    let min_ev = |m: &DenseMatrix| sym_eigenvalues(m).map(|v| *v.last().expect("non-empty"));
    let upper_margin = min_ev(&upper)?;
    let lower_margin = min_ev(&lower)?;
    Ok(SandwichReport {
        holds: upper_margin >= -tolerance && lower_margin >= -tolerance,
        upper_margin,
        lower_margin,
        tolerance,
    })
}

/// `n⁻¹‖Xβ* − Xβ̂‖²` for one estimate.
pub fn risk_empirical(x: &DenseMatrix, beta_star: &[f64], beta_hat: &[f64]) -> Result<f64> {
    if beta_star.len() != beta_hat.len() {
        return Err(Error::dim("coefficient vectors differ in length"));
    }
    let diff: Vec<f64> = beta_star.iter().zip(beta_hat).map(|(a, b)| a - b).collect();
    let f = x.matvec(&diff)?;
    Ok(dot(&f, &f) / x.rows() as f64)
}

/// `draws` responses `Y = Xβ* + σε` as the columns of an `n×draws` matrix.
pub fn noisy_responses(x: &DenseMatrix, beta_star: &[f64], sigma: f64, draws: usize, seed: u64) -> Result<DenseMatrix> {
    if draws == 0 {
        return Err(Error::config("need at least one noise draw"));
    }
    let signal = x.matvec(beta_star)?;
    let mut rng = stream_rng(seed, streams::NOISE);
    let mut ys = DenseMatrix::zeros(x.rows(), draws);
    for d in 0..draws {
        for (yi, s) in ys.col_mut(d).iter_mut().zip(&signal) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *yi = s + sigma * e;
        }
    }
    Ok(ys)
}

/// Monte-Carlo risk `n⁻¹E_ε‖Xβ* − Xβ̂(Y)‖²` of a linear-or-not estimator.
pub fn risk_monte_carlo(
    x: &DenseMatrix,
    beta_star: &[f64],
    sigma: f64,
    draws: usize,
    seed: u64,
    mut estimator: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    let ys = noisy_responses(x, beta_star, sigma, draws, seed)?;
    let mut total = 0.0;
    for d in 0..draws {
        let b = estimator(ys.col(d))?;
        total += risk_empirical(x, beta_star, &b)?;
    }
    Ok(total / draws as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub j: usize,
    /// `J`-th largest eigenvalue of `XᵀX/n`.
    pub lambda_j: f64,
    /// `L_J = Σ_{j≤J} (Vᵀβ*)_j²`.
    pub l_j: f64,
    /// Realized constraint radius `‖β̂^rr‖²`.
    pub t: f64,
    /// `t / L_J`.
    pub active_fraction: f64,
    /// `1 − t/L_J` before clamping.
    pub c_raw: f64,
    /// `c_raw` clamped to `[0, 1/2]`.
    pub c: f64,
    /// `c_raw` fell outside `(0, 1/2)`.
    pub c_out_of_range: bool,
    pub a1_holds: bool,
    /// `t ≤ (1−c)L_J` for some admissible `c`, i.e. `c_raw > 0`.
    pub a2_holds: bool,
    /// `16J²σ²/(γλ_J L_J c²)`.
    pub n0: f64,
    pub n_below_n0: bool,
}

/// Assumption check given a realized `t`.
pub fn assumption_from_parts(
    pca: &Pca,
    beta_star: &[f64],
    t: f64,
    j: usize,
    sigma: f64,
    gamma: f64,
    n: usize,
) -> Result<AssumptionReport> {
    if j == 0 || j > pca.rank() {
        return Err(Error::config(format!("J = {j} must lie in 1..={}", pca.rank())));
    }
    let lambda_j = pca.values[j - 1];
    let rot = pca.rotate(beta_star)?;
    let l_j: f64 = rot[..j].iter().map(|v| v * v).sum();
    let active_fraction = t / l_j;
    let c_raw = 1.0 - active_fraction;
    let c = c_raw.clamp(0.0, 0.5);
    let n0 = 16.0 * (j * j) as f64 * sigma * sigma / (gamma * lambda_j * l_j * c * c);
    Ok(AssumptionReport {
        j,
        lambda_j,
        l_j,
        t,
        active_fraction,
        c_raw,
        c,
        c_out_of_range: !(c_raw > 0.0 && c_raw < 0.5),
        a1_holds: lambda_j > 1e-12,
        a2_holds: c_raw > 0.0,
        n0,
        n_below_n0: (n as f64) < n0,
    })
}

/// Assumption check for the ridge fit of `y` at `lambda`.
pub fn assumption_report(
    x: &DenseMatrix,
    y: &[f64],
    beta_star: &[f64],
    lambda: f64,
    j: usize,
    sigma: f64,
    gamma: f64,
) -> Result<AssumptionReport> {
    let pca = pca(x)?;
    let beta = RidgeFactor::new(x, lambda)?.solve(y)?;
    assumption_from_parts(&pca, beta_star, dot(&beta, &beta), j, sigma, gamma, x.rows())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Evaluated,
    /// `ρ ≥ 1`: the bound carries no information.
    VacuousRho,
    /// `λ_J ≈ 0` or the ridge constraint is inactive.
    AssumptionViolated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub status: BoundStatus,
    pub rho: f64,
    pub rank: usize,
    pub lambda_j: f64,
    pub risk: f64,
    pub k: usize,
    pub c_const: f64,
    pub c: f64,
    pub assumption: Option<AssumptionReport>,
    pub draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Options {
    /// Absolute constant `C` in `ρ`.
    pub c_const: f64,
    pub delta: f64,
    /// `J`; `None` uses the rank of `X`.
    pub j: Option<usize>,
    pub draws: usize,
    pub noise_seed: u64,
    /// Failure probability `γ` used for `n₀`.
    pub gamma: f64,
}

impl Default for Theorem1Options {
    fn default() -> Self {
        Self { c_const: 1.0, delta: 0.05, j: None, draws: 200, noise_seed: 0, gamma: 0.05 }
    }
}

/// Evaluates both sides of
/// `E_ε‖β^rr − β^loco‖² ≤ 5K/(cλ_J)·((1−ρ)⁻² − 1)·R(Xβ^rr)`
/// for fixed `X`, `β*`, noise level `sigma` and fixed sketches.
///
/// Expectations over `ε` are Monte-Carlo averages over `draws` noise vectors;
/// `t` for the assumption check is the average `‖β̂^rr‖²`.
pub fn theorem1_report(
    x: &DenseMatrix,
    beta_star: &[f64],
    sigma: f64,
    cfg: &LocoConfig,
    opts: &Theorem1Options,
) -> Result<BoundReport> {
    require_concatenate(cfg)?;
    let (n, p) = x.shape();
    if beta_star.len() != p {
        return Err(Error::dim("beta_star length does not match design"));
    }
    let k = cfg.workers;
    let pca = pca(x)?;
    let r = pca.rank();
    let j = opts.j.unwrap_or(r);

    let ys = noisy_responses(x, beta_star, sigma, opts.draws, opts.noise_seed)?;
    let full = RidgeFactor::new(x, cfg.lambda)?.solve_many(&ys)?;
    let loco = LocoOperator::prepare(x, cfg)?.solve_many(&ys)?;
    let signal = x.matvec(beta_star)?;
    let fitted = x.matmul(&full)?;
    let (mut lhs, mut risk, mut t) = (0.0, 0.0, 0.0);
    for d in 0..opts.draws {
        let (a, b) = (full.col(d), loco.col(d));
        lhs += a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        risk += fitted.col(d).iter().zip(&signal).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / n as f64;
        t += dot(a, a);
    }
    let m = opts.draws as f64;
    let (lhs, risk, t) = (lhs / m, risk / m, t / m);

    let assumption = assumption_from_parts(&pca, beta_star, t, j, sigma, opts.gamma, n)?;
    let rho = if k < 2 {
        0.0
    } else {
        compute_rho(r, opts.delta, k, tau_subs_for(cfg, p), opts.c_const)?
    };

    let inflation = 1.0 / ((1.0 - rho) * (1.0 - rho)) - 1.0;
    let (status, rhs) = if rho >= 1.0 {
        (BoundStatus::VacuousRho, f64::INFINITY)
    } else if !(assumption.a1_holds && assumption.a2_holds) {
        (BoundStatus::AssumptionViolated, f64::INFINITY)
    } else if k < 2 {
        (BoundStatus::Evaluated, 0.0)
    } else {
        let c = assumption.c;
        (
            BoundStatus::Evaluated,
            5.0 * k as f64 / (c * assumption.lambda_j) * inflation * risk,
        )
    };
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs,
        status,
        rho,
        rank: r,
        lambda_j: assumption.lambda_j,
        risk,
        k,
        c_const: opts.c_const,
        c: assumption.c,
        assumption: Some(assumption),
        draws: opts.draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KabanReport {
    /// Monte-Carlo mean of `n⁻¹‖Xβ − XΠΠᵀβ‖²`.
    pub lhs: f64,
    /// Standard error of `lhs`.
    pub lhs_se: f64,
    pub rhs: f64,
    pub kurtosis: f64,
    pub draws: usize,
}

/// Compares `n⁻¹E_Π‖Xβ − XΠΠᵀβ‖²` with
/// `τ_subs⁻¹·βᵀ(Σ + tr(Σ)I + κ·diag(Σ))β`, `Σ = XᵀX/n`, for projections with
/// i.i.d. entries of excess kurtosis `κ`.
pub fn kaban_check(
    x: &DenseMatrix,
    beta: &[f64],
    tau_subs: usize,
    kind: ProjectionKind,
    draws: usize,
    seed: u64,
) -> Result<KabanReport> {
    let kappa = kind.kurtosis().ok_or_else(|| {
        Error::Unsupported(format!("{kind:?} projections do not have i.i.d. entries"))
    })?;
    let (n, p) = x.shape();
    if beta.len() != p {
        return Err(Error::dim("beta length does not match design"));
    }
    if draws == 0 {
        return Err(Error::config("need at least one projection draw"));
    }
    let mut sigma = x.gram();
    sigma.scale(1.0 / n as f64);

    // Closed form through the eigenpairs of Σ.
    let eig = sym_eigen(&sigma)?;
    let trace: f64 = eig.values.iter().sum();
    let quad: f64 = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &e)| e * dot(eig.vectors.col(i), beta).powi(2))
        .sum();
    let diag_term: f64 = (0..p)
        .map(|a| {
            let saa: f64 = eig.values.iter().enumerate().map(|(i, &e)| e * eig.vectors.get(a, i).powi(2)).sum();
            saa * beta[a] * beta[a]
        })
        .sum();
    let rhs = (quad + trace * dot(beta, beta) + kappa * diag_term) / tau_subs as f64;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut diff = vec![0.0; p];
    for d in 0..draws {
        let proj = ProjectionSpec::new(kind, p, tau_subs, derive_seed(seed, d as u64))?.realize()?;
        let u = proj.lift(&proj.restrict(beta)?)?;
        for ((di, b), ui) in diff.iter_mut().zip(beta).zip(&u) {
            *di = b - ui;
        }
        let s = sigma.matvec(&diff)?;
        let v = dot(&diff, &s);
        sum += v;
        sum_sq += v * v;
    }
    let m = draws as f64;
    let lhs = sum / m;
    let var = (sum_sq / m - lhs * lhs).max(0.0);
    Ok(KabanReport { lhs, lhs_se: (var / m).sqrt(), rhs, kurtosis: kappa, draws })
}

/// `p'·[e^{−δ}/(1−δ)^{1−δ}]^{lK/M} + p'·[e^{η}/(1+η)^{1+η}]^{lK/M}` with
/// `M = n·max_i ‖w_i‖²`.
pub fn chernoff_failure_bound(w: &DenseMatrix, k: usize, l: usize, delta: f64, eta: f64) -> f64 {
    let (n, pp) = w.shape();
    let max_row = (0..n)
        .map(|i| w.row(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let m = n as f64 * max_row;
    let e = (l * k) as f64 / m;
    let lower = ((-delta).exp() / (1.0 - delta).powf(1.0 - delta)).powf(e);
    let upper = (eta.exp() / (1.0 + eta).powf(1.0 + eta)).powf(e);
    pp as f64 * (lower + upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowSamplingReport {
    pub pass_fraction: f64,
    pub failure_bound: f64,
    pub trials: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Fraction of trials in which all singular values of the concatenated row
/// sample of `w` lie in `[√((1−δ)lK/n), √((1+η)lK/n)]`. Each trial draws a
/// random balanced partition of the rows into `K` blocks and `l` rows without
/// replacement from every block.
pub fn row_sampling_check(
    w: &DenseMatrix,
    k: usize,
    l: usize,
    delta: f64,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<RowSamplingReport> {
    let (n, _) = w.shape();
    if k == 0 || n % k != 0 {
        return Err(Error::config(format!("{n} rows cannot be split evenly over {k} blocks")));
    }
    let tau = n / k;
    if l == 0 || l > tau {
        return Err(Error::config(format!("cannot sample {l} rows from blocks of {tau}")));
    }
    let scale = (l * k) as f64 / n as f64;
    let lower = ((1.0 - delta) * scale).sqrt();
    let upper = ((1.0 + eta) * scale).sqrt();
    let tol = 1e-12;
    let mut rng: Rng = stream_rng(seed, streams::PARTITION);
    let mut passed = 0;
    for _ in 0..trials {
        let perm = index::sample(&mut rng, n, n).into_vec();
        let mut rows = Vec::with_capacity(l * k);
        for b in 0..k {
            let block = &perm[b * tau..(b + 1) * tau];
            rows.extend(index::sample(&mut rng, tau, l).into_iter().map(|i| block[i]));
        }
        let sw = w.select_rows(&rows)?;
        let ev = sym_eigenvalues(&sw.gram())?;
        let (smax, smin) = (ev[0].max(0.0).sqrt(), ev[ev.len() - 1].max(0.0).sqrt());
        if smin >= lower - tol && smax <= upper + tol {
            passed += 1;
        }
    }
    Ok(RowSamplingReport {
        pass_fraction: passed as f64 / trials.max(1) as f64,
        failure_bound: chernoff_failure_bound(w, k, l, delta, eta),
        trials,
        lower,
        upper,
    })
}

/// First `cols` columns of the normalized `n×n` Walsh-Hadamard matrix: an
/// orthonormal basis with perfectly flat row norms.
pub fn hadamard_basis(n: usize, cols: usize) -> Result<DenseMatrix> {
    if cols == 0 || cols > n {
        return Err(Error::dim(format!("cannot take {cols} columns of a {n}x{n} matrix")));
    }
    let mut out = DenseMatrix::zeros(n, cols);
    for j in 0..cols {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        crate::projections::fwht_in_place(&mut e)?;
        out.col_mut(j).copy_from_slice(&e);
    }
    Ok(out)
}

/// Relative size `‖a − b‖/‖b‖`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    crate::linalg::distance(a, b) / norm(b).max(f64::MIN_POSITIVE)
}
