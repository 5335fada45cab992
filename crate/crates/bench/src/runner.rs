//! Grid execution: one record per (method, parameters, seed) plus median and
//! mean rows per parameter setting.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use loco_core::baselines::{fit_baseline, BaselineKind};
use loco_core::datagen::{generate, read_dataset, SimSpec, SimulatedDataset};
use loco_core::engine::{loco_fit, LocalSolver, LocoConfig, ProjectionSize};
use loco_core::linalg::{ColumnScaler, DenseMatrix};
use loco_core::projections::{MergeMode, ProjectionKind};
use loco_core::rng::{derive_seed, stream_rng, streams};
use loco_core::solvers::{ridge_closed_form, RidgeProblem};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, ExperimentConfig, LocoGrid, MethodSpec};
use crate::metrics::{average, coefficient_metrics, median, normalized_mse, pearson};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Run the grid points of a seed concurrently. Timings become unreliable,
    /// so speedups are not reported.
    pub parallel_grid: bool,
    /// Overrides the thread count of every LOCO fit.
    pub threads: Option<usize>,
}

/// What was fitted. `lambda` is `None` when it was chosen by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub method: String,
    pub workers: Option<usize>,
    pub projection_size: Option<ProjectionSize>,
    pub tau_subs: Option<usize>,
    pub n_subs: Option<usize>,
    pub merge: Option<MergeMode>,
    pub projection_kind: Option<ProjectionKind>,
    pub solver: Option<String>,
    pub standardize_sketches: Option<bool>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Seed,
    Median,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

/// Phase wall times in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub project: f64,
    pub exchange: f64,
    pub solve: f64,
    pub total: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub kind: RecordKind,
    pub params: MethodParams,
    pub seed: Option<u64>,
    /// Seeds summarized by an aggregate row (1 for seed rows).
    pub n_seeds: usize,
    pub status: Status,
    pub error: Option<String>,
    /// λ actually used (the CV choice, or the grid value).
    pub lambda: Option<f64>,
    pub train_nmse: Option<f64>,
    pub test_nmse: Option<f64>,
    /// `‖β̂ − β*‖²/‖β*‖²` on the standardized scale.
    pub coef_rel_mse: Option<f64>,
    pub corr_truth: Option<f64>,
    pub corr_full_ridge: Option<f64>,
    pub local_dimension: Option<usize>,
    pub timings: Option<Timings>,
    /// Median total time at the smallest `K` over median total time at this `K`.
    pub speedup: Option<f64>,
}

impl MetricsRecord {
    /// The record with all wall-clock fields removed.
    pub fn metric_fields(&self) -> MetricsRecord {
        MetricsRecord { timings: None, speedup: None, ..self.clone() }
    }

    pub fn is_failed(&self) -> bool {
        self.status == Status::Failed
    }
}

/// One method instance of the grid, λ not yet fixed.
#[derive(Debug, Clone)]
enum Job {
    Loco {
        workers: usize,
        size: ProjectionSize,
        merge: MergeMode,
        kind: ProjectionKind,
        solver: LocalSolver,
        standardize: bool,
    },
    Baseline {
        method: BaselineKind,
        kind: ProjectionKind,
    },
}

impl Job {
    fn params(&self, lambda: Option<f64>) -> MethodParams {
        let mut p = MethodParams {
            method: String::new(),
            workers: None,
            projection_size: None,
            tau_subs: None,
            n_subs: None,
            merge: None,
            projection_kind: None,
            solver: None,
            standardize_sketches: None,
            lambda,
        };
        match self {
            Job::Loco { workers, size, merge, kind, solver, standardize } => {
                p.method = "loco".into();
                p.standardize_sketches = Some(*standardize);
                p.workers = Some(*workers);
                p.projection_size = Some(*size);
                p.merge = Some(*merge);
                p.projection_kind = Some(*kind);
                p.solver = Some(
                    match solver {
                        LocalSolver::ClosedForm => "closed_form",
                        LocalSolver::Sdca(_) => "sdca",
                    }
                    .into(),
                );
            }
            Job::Baseline { method, kind } => {
                p.method = method.name().into();
                match method {
                    BaselineKind::ColumnCompression { tau_subs } => {
                        p.tau_subs = Some(*tau_subs);
                        p.projection_kind = Some(*kind);
                    }
                    BaselineKind::RowCompression { n_subs } => {
                        p.n_subs = Some(*n_subs);
                        p.projection_kind = Some(*kind);
                    }
                    BaselineKind::FullRidge | BaselineKind::DiagonalApprox => {}
                }
            }
        }
        p
    }
}

fn expand(methods: &[MethodSpec]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for m in methods {
        match m {
            MethodSpec::Loco(LocoGrid { workers, sizes, merge, projection_kind, solver, standardize_sketches }) => {
                for &size in sizes {
                    for &k in workers {
                        jobs.push(Job::Loco {
                            workers: k,
                            size,
                            merge: *merge,
                            kind: *projection_kind,
                            solver: *solver,
                            standardize: *standardize_sketches,
                        });
                    }
                }
            }
            MethodSpec::Baseline { baseline, projection_kind } => {
                jobs.push(Job::Baseline { method: *baseline, kind: *projection_kind })
            }
        }
    }
    jobs
}

struct Fitted {
    beta: Vec<f64>,
    local_dimension: Option<usize>,
    timings: Timings,
}

fn fit(job: &Job, x: &DenseMatrix, y: &[f64], lambda: f64, seed: u64, threads: Option<usize>) -> Result<Fitted> {
    let start = Instant::now();
    match job {
        Job::Loco { workers, size, merge, kind, solver, standardize } => {
            let mut cfg = LocoConfig::new(*workers, *size, lambda, seed);
            cfg.merge = *merge;
            cfg.projection_kind = *kind;
            cfg.solver = *solver;
            cfg.standardize_sketches = *standardize;
            cfg.threads = threads;
            let res = loco_fit(x, y, &cfg)?;
            let t = res.timings;
            Ok(Fitted {
                local_dimension: Some(res.local_dimension()),
                timings: Timings {
                    project: t.project.as_secs_f64(),
                    exchange: t.exchange.as_secs_f64(),
                    solve: t.solve.as_secs_f64(),
                    total: t.total.as_secs_f64(),
                    threads: res.threads,
                },
                beta: res.beta,
            })
        }
        Job::Baseline { method, kind } => {
            let beta = fit_baseline(*method, x, y, lambda, seed, *kind)?;
            let total = start.elapsed().as_secs_f64();
            let local_dimension = match method {
                BaselineKind::ColumnCompression { tau_subs } => Some(*tau_subs),
                _ => Some(x.cols()),
            };
            Ok(Fitted {
                beta,
                local_dimension,
                timings: Timings { solve: total, total, threads: 1, ..Timings::default() },
            })
        }
    }
}

/// Standardized, centered data for one seed.
struct Prepared {
    x_train: DenseMatrix,
    y_train: Vec<f64>,
    x_test: Option<DenseMatrix>,
    y_test: Vec<f64>,
    /// `β*` expressed on the standardized feature scale.
    truth: Vec<f64>,
    lambdas: Vec<f64>,
    full_ridge: Vec<OnceLock<Result<Vec<f64>, String>>>,
}

impl Prepared {
    fn new(ds: SimulatedDataset, lambdas: &[f64]) -> Result<Self> {
        let scaler = ColumnScaler::fit(&ds.x_train)?;
        let x_train = scaler.transform(&ds.x_train)?;
        let x_test = ds.x_test.as_ref().map(|x| scaler.transform(x)).transpose()?;
        let mu = ds.y_train.iter().sum::<f64>() / ds.y_train.len() as f64;
        let truth = ds.beta_star.iter().zip(&scaler.stds).map(|(b, s)| b * s).collect();
        Ok(Self {
            x_train,
            y_train: ds.y_train.iter().map(|v| v - mu).collect(),
            x_test,
            y_test: ds.y_test.iter().map(|v| v - mu).collect(),
            truth,
            lambdas: lambdas.to_vec(),
            full_ridge: lambdas.iter().map(|_| OnceLock::new()).collect(),
        })
    }

    fn full_ridge(&self, lambda_index: usize) -> Result<&[f64], String> {
        self.full_ridge[lambda_index]
            .get_or_init(|| {
                let lambda = self.lambdas[lambda_index];
                RidgeProblem::new(&self.x_train, &self.y_train, lambda)
                    .and_then(|p| ridge_closed_form(&p))
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map(Vec::as_slice)
            .map_err(Clone::clone)
    }
}

fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<SimulatedDataset> {
    let with_seed = |spec: SimSpec| -> Result<SimulatedDataset> {
        let mut spec = spec;
        if cfg.regenerate_data {
            spec.seed = derive_seed(spec.seed, seed);
        }
        Ok(generate(&spec)?)
    };
    match &cfg.dataset {
        DatasetSource::Preset { name, seed } => with_seed(SimSpec::preset(name, *seed)?),
        DatasetSource::Inline { spec } => with_seed(spec.clone()),
        DatasetSource::File { path } => {
            if cfg.regenerate_data {
                bail!("regenerate_data cannot be used with a dataset file");
            }
            read_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
        }
    }
}

/// Row folds for cross-validation.
fn folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, streams::CV));
    let mut out = vec![Vec::new(); k];
    for (i, r) in order.into_iter().enumerate() {
        out[i % k].push(r);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

fn cv_choose(job: &Job, data: &Prepared, k: usize, seed: u64, threads: Option<usize>) -> Result<usize> {
    let n = data.x_train.rows();
    if k > n {
        bail!("cannot split {n} rows into {k} folds");
    }
    let folds = folds(n, k, seed);
    let mut best = (f64::INFINITY, 0);
    for (li, &lambda) in data.lambdas.iter().enumerate() {
        let mut total = 0.0;
        for held in &folds {
            let mut keep = vec![true; n];
            held.iter().for_each(|&i| keep[i] = false);
            let train: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
            let xt = data.x_train.select_rows(&train)?;
            let yt: Vec<f64> = train.iter().map(|&i| data.y_train[i]).collect();
            let beta = fit(job, &xt, &yt, lambda, seed, threads)?.beta;
            let xv = data.x_train.select_rows(held)?;
            let yv: Vec<f64> = held.iter().map(|&i| data.y_train[i]).collect();
            total += normalized_mse(&yv, &xv.matvec(&beta)?)?;
        }
        if total < best.0 {
            best = (total, li);
        }
    }
    Ok(best.1)
}

fn failed(params: MethodParams, seed: u64, lambda: Option<f64>, err: impl std::fmt::Display) -> MetricsRecord {
    MetricsRecord {
        kind: RecordKind::Seed,
        params,
        seed: Some(seed),
        n_seeds: 1,
        status: Status::Failed,
        error: Some(format!("{err:#}")),
        lambda,
        train_nmse: None,
        test_nmse: None,
        coef_rel_mse: None,
        corr_truth: None,
        corr_full_ridge: None,
        local_dimension: None,
        timings: None,
        speedup: None,
    }
}

fn evaluate(job: &Job, li: usize, data: &Prepared, seed: u64, params: MethodParams, threads: Option<usize>) -> MetricsRecord {
    let lambda = data.lambdas[li];
    let result = (|| -> Result<MetricsRecord> {
        let f = fit(job, &data.x_train, &data.y_train, lambda, seed, threads)?;
        let train_nmse = normalized_mse(&data.y_train, &data.x_train.matvec(&f.beta)?)?;
        let test_nmse = match &data.x_test {
            Some(x) => Some(normalized_mse(&data.y_test, &x.matvec(&f.beta)?)?),
            None => None,
        };
        let (rel, corr) = coefficient_metrics(&f.beta, &data.truth)?;
        let reference = data.full_ridge(li).map_err(anyhow::Error::msg)?;
        Ok(MetricsRecord {
            kind: RecordKind::Seed,
            params: params.clone(),
            seed: Some(seed),
            n_seeds: 1,
            status: Status::Ok,
            error: None,
            lambda: Some(lambda),
            train_nmse: Some(train_nmse),
            test_nmse,
            coef_rel_mse: Some(rel),
            corr_truth: Some(corr),
            corr_full_ridge: pearson(&f.beta, reference).ok(),
            local_dimension: f.local_dimension,
            timings: Some(f.timings),
            speedup: None,
        })
    })();
    result.unwrap_or_else(|e| failed(params, seed, Some(lambda), e))
}

/// All records for one job on one seed: one per λ, or a single CV pick.
fn run_job(job: &Job, cfg: &ExperimentConfig, data: &Prepared, seed: u64, threads: Option<usize>) -> Vec<MetricsRecord> {
    match cfg.cv_folds {
        Some(k) => match cv_choose(job, data, k, seed, threads) {
            Ok(li) => vec![evaluate(job, li, data, seed, job.params(None), threads)],
            Err(e) => vec![failed(job.params(None), seed, None, e)],
        },
        None => (0..data.lambdas.len())
            .map(|li| evaluate(job, li, data, seed, job.params(Some(data.lambdas[li])), threads))
            .collect(),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let jobs = expand(&cfg.methods);
    let mut records = Vec::new();
    let mut shared: Option<SimulatedDataset> = None;
    for &seed in &cfg.seeds {
        let ds = if cfg.regenerate_data {
            load_dataset(cfg, seed)?
        } else {
            match &shared {
                Some(ds) => ds.clone(),
                None => {
                    let ds = load_dataset(cfg, seed)?;
                    shared = Some(ds.clone());
                    ds
                }
            }
        };
        let data = Prepared::new(ds, &cfg.lambdas)?;
        if opts.parallel_grid {
            records.extend(run_parallel(&jobs, cfg, &data, seed, opts.threads));
        } else {
            for job in &jobs {
                records.extend(run_job(job, cfg, &data, seed, opts.threads));
            }
        }
    }
    let aggregates = aggregate(&records, !opts.parallel_grid);
    records.extend(aggregates);
    Ok(records)
}

fn run_parallel(jobs: &[Job], cfg: &ExperimentConfig, data: &Prepared, seed: u64, threads: Option<usize>) -> Vec<MetricsRecord> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Vec<MetricsRecord>>>> = Mutex::new(vec![None; jobs.len()]);
    let pool = loco_core::engine::default_threads().min(jobs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..pool {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let out = run_job(&jobs[i], cfg, data, seed, threads);
                slots.lock().expect("no panics while holding the lock")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .flat_map(|r| r.expect("every job ran"))
        .collect()
}

fn summarize(values: impl Iterator<Item = Option<f64>>, stat: RecordKind) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    match stat {
        RecordKind::Median => median(&v),
        _ => average(&v),
    }
}

fn params_key(p: &MethodParams) -> String {
    serde_json::to_string(p).expect("params serialize")
}

/// Median and mean rows over the successful seed rows of each parameter
/// setting, in first-appearance order.
pub fn aggregate(records: &[MetricsRecord], with_speedup: bool) -> Vec<MetricsRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == RecordKind::Seed && !r.is_failed()) {
        let key = params_key(&r.params);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for key in &order {
        let rows = &groups[key];
        for stat in [RecordKind::Median, RecordKind::Mean] {
            let get = |f: fn(&MetricsRecord) -> Option<f64>| summarize(rows.iter().map(|r| f(r)), stat);
            let timing = |f: fn(&Timings) -> f64| summarize(rows.iter().map(|r| r.timings.as_ref().map(f)), stat);
            let timings = rows.iter().all(|r| r.timings.is_some()).then(|| Timings {
                project: timing(|t| t.project).unwrap_or(0.0),
                exchange: timing(|t| t.exchange).unwrap_or(0.0),
                solve: timing(|t| t.solve).unwrap_or(0.0),
                total: timing(|t| t.total).unwrap_or(0.0),
                threads: rows[0].timings.map_or(0, |t| t.threads),
            });
            let ld = rows[0].local_dimension.filter(|d| rows.iter().all(|r| r.local_dimension == Some(*d)));
            out.push(MetricsRecord {
                kind: stat,
                params: rows[0].params.clone(),
                seed: None,
                n_seeds: rows.len(),
                status: Status::Ok,
                error: None,
                lambda: get(|r| r.lambda),
                train_nmse: get(|r| r.train_nmse),
                test_nmse: get(|r| r.test_nmse),
                coef_rel_mse: get(|r| r.coef_rel_mse),
                corr_truth: get(|r| r.corr_truth),
                corr_full_ridge: get(|r| r.corr_full_ridge),
                local_dimension: ld,
                timings,
                speedup: None,
            });
        }
    }
    if with_speedup {
        fill_speedup(&mut out);
    }
    out
}

/// Speedup on median LOCO rows, relative to the smallest worker count with
/// otherwise identical parameters.
fn fill_speedup(rows: &mut [MetricsRecord]) {
    let base_key = |p: &MethodParams| params_key(&MethodParams { workers: None, ..p.clone() });
    let mut baseline: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == RecordKind::Median && r.params.method == "loco") {
        if let (Some(k), Some(t)) = (r.params.workers, r.timings) {
            let e = baseline.entry(base_key(&r.params)).or_insert((k, t.total));
            if k < e.0 {
                *e = (k, t.total);
            }
        }
    }
    for r in rows.iter_mut().filter(|r| r.kind == RecordKind::Median && r.params.method == "loco") {
        if let (Some((_, t0)), Some(t)) = (baseline.get(&base_key(&r.params)), r.timings) {
            if t.total > 0.0 {
                r.speedup = Some(t0 / t.total);
            }
        }
    }
}
