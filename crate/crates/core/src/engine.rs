//! The one-shot exchange: partition features over `K` workers, let each
//! publish one sketch of its block, then solve `K` independent ridge problems
//! on "own raw features + everybody else's sketches".
//!
//! Workers run as scoped threads. The only synchronization point is a single
//! barrier between publishing and reading the sketches.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::linalg::{ColumnScaler, DenseMatrix};
use crate::projections::{merge_projections, ProjectedBlock, ProjectionKind, ProjectionSpec};
use crate::rng::{derive_seed, stream_rng, streams};
use crate::solvers::{
    ridge_closed_form, ridge_sdca, RidgeFactor, RidgeProblem, SdcaOptions, SolverDiagnostics,
};
use crate::{Error, Result};

pub use crate::projections::MergeMode;

/// Environment variable overriding the default worker thread count.
pub const THREADS_ENV: &str = "LOCO_THREADS";

/// `K` disjoint, sorted index blocks covering `0..p`, sizes differing by at
/// most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePartition {
    p: usize,
    blocks: Vec<Vec<usize>>,
}

impl FeaturePartition {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    /// Worker owning each feature.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![0; self.p];
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                owner[i] = k;
            }
        }
        owner
    }
}

/// Uniformly random balanced partition. The first `p mod K` blocks get the
/// extra feature.
pub fn partition_features(p: usize, k: usize, seed: u64) -> Result<FeaturePartition> {
    if k == 0 || k > p {
        return Err(Error::config(format!("cannot split {p} features over {k} workers")));
    }
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut stream_rng(seed, streams::PARTITION));
    let (base, extra) = (p / k, p % k);
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for b in 0..k {
        let len = base + usize::from(b < extra);
        let mut block = perm[start..start + len].to_vec();
        block.sort_unstable();
        blocks.push(block);
        start += len;
    }
    Ok(FeaturePartition { p, blocks })
}

/// Sketch width per contributing worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionSize {
    /// `τ_subs` columns per worker.
    Fixed(usize),
    /// `(K−1)τ_subs ≈ ratio·(p − τ)`, split evenly over the other workers.
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LocalSolver {
    #[default]
    ClosedForm,
    Sdca(SdcaOptions),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoConfig {
    pub workers: usize,
    pub projection_size: ProjectionSize,
    pub lambda: f64,
    #[serde(default)]
    pub merge: MergeMode,
    #[serde(default)]
    pub projection_kind: ProjectionKind,
    pub seed: u64,
    #[serde(default)]
    pub solver: LocalSolver,
    /// Rescale every random-feature column of `X̄_k` to unit variance.
    #[serde(default)]
    pub standardize_sketches: bool,
    /// OS threads to run the workers on; `None` uses [`default_threads`].
    #[serde(default)]
    pub threads: Option<usize>,
}

impl LocoConfig {
    pub fn new(workers: usize, projection_size: ProjectionSize, lambda: f64, seed: u64) -> Self {
        Self {
            workers,
            projection_size,
            lambda,
            merge: MergeMode::Concatenate,
            projection_kind: ProjectionKind::Srht,
            seed,
            solver: LocalSolver::ClosedForm,
            standardize_sketches: false,
            threads: None,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.workers == 0 || self.workers > p {
            return Err(Error::config(format!(
                "cannot split {p} features over {} workers",
                self.workers
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {}", self.lambda)));
        }
        match self.projection_size {
            ProjectionSize::Ratio(r) if !(r.is_finite() && r >= 0.0) => {
                return Err(Error::config(format!("projection ratio must be >= 0, got {r}")))
            }
            _ => {}
        }
        let smallest = p / self.workers;
        let ts = tau_subs_for(self, p);
        if self.workers > 1 && ts > smallest {
            return Err(Error::config(format!(
                "tau_subs = {ts} exceeds the smallest block of {smallest} features"
            )));
        }
        Ok(())
    }
}

/// Thread count from `LOCO_THREADS`, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `⌈p/K⌉`.
pub fn raw_dimension(workers: usize, p: usize) -> usize {
    p.div_ceil(workers.max(1))
}

/// Sketch width each worker publishes; zero when `K = 1`.
pub fn tau_subs_for(cfg: &LocoConfig, p: usize) -> usize {
    let k = cfg.workers;
    if k <= 1 {
        return 0;
    }
    match cfg.projection_size {
        ProjectionSize::Fixed(t) => t,
        ProjectionSize::Ratio(r) => {
            let tau = raw_dimension(k, p);
            let total = (r * (p - tau) as f64 + 1e-9).floor() as usize;
            (total / (k - 1)).max(1)
        }
    }
}

/// Column count of a worker's local problem: `τ + (K−1)τ_subs` when
/// concatenating, `τ + τ_subs` when summing, with `τ = ⌈p/K⌉`.
pub fn local_dimension(cfg: &LocoConfig, p: usize) -> usize {
    let tau = raw_dimension(cfg.workers, p);
    let ts = tau_subs_for(cfg, p);
    match cfg.merge {
        _ if cfg.workers <= 1 => tau,
        MergeMode::Concatenate => tau + (cfg.workers - 1) * ts,
        MergeMode::Sum => tau + ts,
    }
}

/// The projection worker `k` applies to its `input_dim` raw columns.
pub fn worker_projection_spec(cfg: &LocoConfig, k: usize, input_dim: usize, tau_subs: usize) -> Result<ProjectionSpec> {
    ProjectionSpec::new(cfg.projection_kind, input_dim, tau_subs, derive_seed(cfg.seed, k as u64))
}

/// Computes every worker's sketch sequentially.
pub fn compute_projections(
    x: &DenseMatrix,
    partition: &FeaturePartition,
    cfg: &LocoConfig,
) -> Result<Vec<ProjectedBlock>> {
    let ts = tau_subs_for(cfg, x.cols());
    if partition.k() <= 1 {
        return Ok(Vec::new());
    }
    (0..partition.k())
        .map(|k| publish(x, partition, cfg, k, ts).map_err(|e| e.in_worker(k)))
        .collect()
}

fn publish(
    x: &DenseMatrix,
    partition: &FeaturePartition,
    cfg: &LocoConfig,
    k: usize,
    tau_subs: usize,
) -> Result<ProjectedBlock> {
    let block = partition.block(k);
    if tau_subs > block.len() {
        return Err(Error::config(format!(
            "tau_subs = {tau_subs} exceeds the {} raw features of the block",
            block.len()
        )));
    }
    let raw = x.select_columns(block)?;
    let spec = worker_projection_spec(cfg, k, block.len(), tau_subs)?;
    let data = spec.realize()?.apply(&raw)?;
    Ok(ProjectedBlock { worker_id: k, data })
}

/// `X̄_k = [X_k, merged sketches]`, optionally with the sketch columns
/// standardized.
pub fn worker_design(
    x: &DenseMatrix,
    partition: &FeaturePartition,
    k: usize,
    received: &[&ProjectedBlock],
    merge: MergeMode,
    standardize: bool,
) -> Result<DenseMatrix> {
    let raw = x.select_columns(partition.block(k))?;
    if partition.k() <= 1 {
        return Ok(raw);
    }
    let mut merged = merge_projections(received, merge, k)?;
    if standardize {
        merged = ColumnScaler::fit(&merged)?.transform(&merged)?;
    }
    raw.hstack(&merged)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkerReport {
    pub worker: usize,
    pub raw_dim: usize,
    pub random_dim: usize,
    pub diagnostics: SolverDiagnostics,
    #[serde(with = "crate::duration_secs")]
    pub project_time: Duration,
    #[serde(with = "crate::duration_secs")]
    pub exchange_time: Duration,
    #[serde(with = "crate::duration_secs")]
    pub solve_time: Duration,
}

/// Counters proving the exchange happened exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeStats {
    pub published: usize,
    pub reads: usize,
    pub barriers: usize,
}

/// Wall-clock time per phase, each the slowest worker's.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    #[serde(with = "crate::duration_secs")]
    pub project: Duration,
    #[serde(with = "crate::duration_secs")]
    pub exchange: Duration,
    #[serde(with = "crate::duration_secs")]
    pub solve: Duration,
    #[serde(with = "crate::duration_secs")]
    pub total: Duration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients in the original feature order.
    pub beta: Vec<f64>,
    pub partition: FeaturePartition,
    pub tau_subs: usize,
    pub workers: Vec<WorkerReport>,
    pub exchange: ExchangeStats,
    pub timings: PhaseTimings,
    pub threads: usize,
}

impl FitResult {
    pub fn local_dimension(&self) -> usize {
        self.workers.iter().map(|w| w.raw_dim + w.random_dim).max().unwrap_or(0)
    }
}

/// Write-once slots for the published sketches.
struct ProjectionStore {
    slots: Vec<OnceLock<ProjectedBlock>>,
    published: AtomicUsize,
    reads: AtomicUsize,
    failed: AtomicBool,
}

impl ProjectionStore {
    fn new(k: usize) -> Self {
        Self {
            slots: (0..k).map(|_| OnceLock::new()).collect(),
            published: AtomicUsize::new(0),
            reads: AtomicUsize::new(0),
            failed: AtomicBool::new(false),
        }
    }

    fn publish(&self, block: ProjectedBlock) {
        let id = block.worker_id;
        assert!(self.slots[id].set(block).is_ok(), "worker {id} published twice");
        self.published.fetch_add(1, Ordering::SeqCst);
    }

    fn read_others(&self, me: usize) -> Vec<&ProjectedBlock> {
        let others: Vec<&ProjectedBlock> = self
            .slots
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != me)
            .map(|(k, s)| s.get().unwrap_or_else(|| panic!("sketch of worker {k} missing")))
            .collect();
        self.reads.fetch_add(others.len(), Ordering::SeqCst);
        others
    }
}

struct WorkerOutput {
    coefs: Vec<f64>,
    report: WorkerReport,
}

/// Runs the full algorithm on an `n×p` design.
///
/// `x` is used as given; callers standardize it beforehand if they want
/// standardized raw features.
pub fn loco_fit(x: &DenseMatrix, y: &[f64], cfg: &LocoConfig) -> Result<FitResult> {
    let start = Instant::now();
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::config(format!("response has length {}, design has {n} rows", y.len())));
    }
    cfg.validate(p)?;
    let k = cfg.workers;
    let partition = partition_features(p, k, cfg.seed)?;
    let tau_subs = tau_subs_for(cfg, p);
    let threads = cfg.threads.unwrap_or_else(default_threads).clamp(1, k);

    let store = ProjectionStore::new(k);
    let barrier = Barrier::new(threads);
    let barriers = AtomicUsize::new(0);
    let outputs: Vec<Mutex<Option<Result<WorkerOutput>>>> = (0..k).map(|_| Mutex::new(None)).collect();

    let run_thread = |t: usize| {
        let mine: Vec<usize> = (t..k).step_by(threads).collect();
        let mut project_times = Vec::with_capacity(mine.len());
        for &w in &mine {
            let t0 = Instant::now();
            if k > 1 {
                match publish(x, &partition, cfg, w, tau_subs) {
                    Ok(b) => store.publish(b),
                    Err(e) => {
                        store.failed.store(true, Ordering::SeqCst);
                        *outputs[w].lock().unwrap() = Some(Err(e.in_worker(w)));
                    }
                }
            }
            project_times.push(t0.elapsed());
        }
        if barrier.wait().is_leader() {
            barriers.fetch_add(1, Ordering::SeqCst);
        }
        if store.failed.load(Ordering::SeqCst) {
            return;
        }
        for (&w, project_time) in mine.iter().zip(project_times) {
            let out = solve_worker(x, y, &partition, cfg, w, &store, project_time);
            *outputs[w].lock().unwrap() = Some(out.map_err(|e| e.in_worker(w)));
        }
    };

    if threads == 1 {
        run_thread(0);
    } else {
        std::thread::scope(|s| {
            for t in 0..threads {
                let run = &run_thread;
                s.spawn(move || run(t));
            }
        });
    }

    let mut beta = vec![0.0; p];
    let mut workers = Vec::with_capacity(k);
    let mut first_err = None;
    for (w, slot) in outputs.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(out)) => {
                for (&i, &b) in partition.block(w).iter().zip(&out.coefs) {
                    beta[i] = b;
                }
                workers.push(out.report);
            }
            Some(Err(e)) => {
                first_err.get_or_insert(e);
            }
            None => {}
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }

    let exchange = ExchangeStats {
        published: store.published.load(Ordering::SeqCst),
        reads: store.reads.load(Ordering::SeqCst),
        barriers: barriers.load(Ordering::SeqCst),
    };
    let expected = if k > 1 { (k, k * (k - 1)) } else { (0, 0) };
    assert_eq!(
        (exchange.published, exchange.reads),
        expected,
        "sketches must be exchanged exactly once"
    );

    let slowest = |f: fn(&WorkerReport) -> Duration| workers.iter().map(f).max().unwrap_or_default();
    let timings = PhaseTimings {
        project: slowest(|w| w.project_time),
        exchange: slowest(|w| w.exchange_time),
        solve: slowest(|w| w.solve_time),
        total: start.elapsed(),
    };
    Ok(FitResult { beta, partition, tau_subs, workers, exchange, timings, threads })
}

fn solve_worker(
    x: &DenseMatrix,
    y: &[f64],
    partition: &FeaturePartition,
    cfg: &LocoConfig,
    w: usize,
    store: &ProjectionStore,
    project_time: Duration,
) -> Result<WorkerOutput> {
    let t0 = Instant::now();
    let received = if partition.k() > 1 { store.read_others(w) } else { Vec::new() };
    let design = worker_design(x, partition, w, &received, cfg.merge, cfg.standardize_sketches)?;
    let exchange_time = t0.elapsed();
    let raw_dim = partition.block(w).len();

    let t1 = Instant::now();
    let problem = RidgeProblem::new(&design, y, cfg.lambda)?;
    let (mut coefs, diagnostics) = match cfg.solver {
        LocalSolver::ClosedForm => {
            let b = ridge_closed_form(&problem)?;
            (b, SolverDiagnostics::direct(t1.elapsed()))
        }
        LocalSolver::Sdca(opts) => {
            let opts = SdcaOptions { seed: derive_seed(opts.seed, w as u64), ..opts };
            ridge_sdca(&problem, &opts)?
        }
    };
    coefs.truncate(raw_dim);
    Ok(WorkerOutput {
        coefs,
        report: WorkerReport {
            worker: w,
            raw_dim,
            random_dim: design.cols() - raw_dim,
            diagnostics,
            project_time,
            exchange_time,
            solve_time: t1.elapsed(),
        },
    })
}

/// The estimator `Y ↦ β^loco` for a fixed design and fixed sketches, with
/// each worker's ridge system factorized once.
///
/// Always uses the closed-form local solver.
#[derive(Debug, Clone)]
pub struct LocoOperator {
    partition: FeaturePartition,
    factors: Vec<RidgeFactor>,
    tau_subs: usize,
}

impl LocoOperator {
    pub fn prepare(x: &DenseMatrix, cfg: &LocoConfig) -> Result<Self> {
        let p = x.cols();
        cfg.validate(p)?;
        let partition = partition_features(p, cfg.workers, cfg.seed)?;
        let blocks = compute_projections(x, &partition, cfg)?;
        let refs: Vec<&ProjectedBlock> = blocks.iter().collect();
        let factors = (0..cfg.workers)
            .map(|k| {
                let design = worker_design(x, &partition, k, &refs, cfg.merge, cfg.standardize_sketches)?;
                RidgeFactor::from_owned(design, cfg.lambda)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { partition, factors, tau_subs: tau_subs_for(cfg, p) })
    }

    pub fn partition(&self) -> &FeaturePartition {
        &self.partition
    }

    pub fn tau_subs(&self) -> usize {
        self.tau_subs
    }

    /// Local design `X̄_k`.
    pub fn design(&self, k: usize) -> &DenseMatrix {
        self.factors[k].design()
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut beta = vec![0.0; self.partition.p()];
        for (k, f) in self.factors.iter().enumerate() {
            let b = f.solve(y)?;
            for (&i, &v) in self.partition.block(k).iter().zip(&b) {
                beta[i] = v;
            }
        }
        Ok(beta)
    }

    /// Solves for each column of `ys` (`n×m`), returning `p×m`.
    pub fn solve_many(&self, ys: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(self.partition.p(), ys.cols());
        for (k, f) in self.factors.iter().enumerate() {
            let b = f.solve_many(ys)?;
            for c in 0..ys.cols() {
                let src = b.col(c);
                let dst = out.col_mut(c);
                for (r, &i) in self.partition.block(k).iter().enumerate() {
                    dst[i] = src[r];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sizes() {
        let p = partition_features(10, 3, 4).unwrap();
        let sizes: Vec<usize> = p.blocks().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let mut all: Vec<usize> = p.blocks().concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(partition_features(6, 1, 0).unwrap().block(0), &[0, 1, 2, 3, 4, 5]);
        assert!(matches!(partition_features(3, 4, 0), Err(Error::Config(_))));
    }

    #[test]
    fn local_dimension_arithmetic() {
        let mut cfg = LocoConfig::new(3, ProjectionSize::Ratio(0.01), 1.0, 0);
        assert_eq!(local_dimension(&cfg, 150_000), 51_000);
        cfg.workers = 12;
        assert_eq!(local_dimension(&cfg, 150_000), 13_875);
        cfg.workers = 1;
        assert_eq!(local_dimension(&cfg, 150_000), 150_000);
        cfg.workers = 4;
        cfg.merge = MergeMode::Sum;
        cfg.projection_size = ProjectionSize::Fixed(10);
        assert_eq!(local_dimension(&cfg, 100), 35);
    }

    #[test]
    fn config_errors() {
        let x = DenseMatrix::from_fn(5, 4, |i, j| (i + j) as f64);
        let cfg = LocoConfig::new(2, ProjectionSize::Fixed(1), 0.0, 0);
        assert!(matches!(loco_fit(&x, &[0.0; 5], &cfg), Err(Error::Config(_))));
        let cfg = LocoConfig::new(2, ProjectionSize::Fixed(1), 1.0, 0);
        assert!(matches!(loco_fit(&x, &[0.0; 4], &cfg), Err(Error::Config(_))));
        let cfg = LocoConfig::new(2, ProjectionSize::Fixed(3), 1.0, 0);
        let err = loco_fit(&x, &[0.0; 5], &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}
