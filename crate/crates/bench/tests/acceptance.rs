//! The twelve acceptance criteria, one test each. Every test prints a single
//! `criterion NN ... PASS|FAIL` line to stderr (uncaptured) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use loco_bench::config::{DatasetSource, ExperimentConfig, LocoGrid, MethodSpec};
use loco_bench::runner::{MetricsRecord, RecordKind};
use loco_bench::{run_experiment, RunOptions};
use loco_core::baselines::BaselineKind;
use loco_core::datagen::{generate, low_rank_design, SimSpec};
use loco_core::engine::{local_dimension, loco_fit, LocalSolver, LocoConfig, ProjectionSize};
use loco_core::linalg::{standardize_columns, DenseMatrix};
use loco_core::projections::{MergeMode, ProjectionKind};
use loco_core::rng::stream_rng;
use loco_core::solvers::{residual_coefficient, ridge_closed_form, ridge_sdca, RidgeProblem, SdcaOptions};
use loco_core::theory::{
    empirical_rho, hadamard_basis, kaban_check, relative_error, row_sampling_check,
    spectral_sandwich_check, theorem1_report, theta_design, BoundStatus, Theorem1Options,
};
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:02} {name}: {verdict} ({detail}; {:.1}s)\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn gaussian_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0xbe7a);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Least squares through modified Gram-Schmidt QR, independent of the
/// library's normal-equation solvers.
fn qr_least_squares(x: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let (n, d) = x.shape();
    let mut q: Vec<Vec<f64>> = (0..d).map(|j| x.col(j).to_vec()).collect();
    let mut r = vec![vec![0.0; d]; d];
    for j in 0..d {
        for i in 0..j {
            let proj: f64 = (0..n).map(|t| q[i][t] * q[j][t]).sum();
            r[i][j] = proj;
            let (head, tail) = q.split_at_mut(j);
            for (a, b) in tail[0].iter_mut().zip(&head[i]) {
                *a -= proj * b;
            }
        }
        let nrm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j][j] = nrm;
        q[j].iter_mut().for_each(|v| *v /= nrm);
    }
    let qty: Vec<f64> = (0..d).map(|j| (0..n).map(|t| q[j][t] * y[t]).sum()).collect();
    let mut beta = vec![0.0; d];
    for j in (0..d).rev() {
        let tail: f64 = (j + 1..d).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - tail) / r[j][j];
    }
    beta
}

fn scenario_one(seed: u64) -> (DenseMatrix, Vec<f64>) {
    let ds = generate(&SimSpec::preset("scenario-one-desk", seed).unwrap()).unwrap();
    let x = standardize_columns(&ds.x_train).unwrap().matrix;
    let mu = ds.y_train.iter().sum::<f64>() / ds.y_train.len() as f64;
    (x, ds.y_train.iter().map(|v| v - mu).collect())
}

fn loco_grid(workers: Vec<usize>, sizes: Vec<ProjectionSize>) -> MethodSpec {
    MethodSpec::Loco(LocoGrid {
        workers,
        sizes,
        merge: MergeMode::Concatenate,
        projection_kind: ProjectionKind::Srht,
        solver: LocalSolver::ClosedForm,
        standardize_sketches: false,
    })
}

#[test]
fn criterion_01_sdca_matches_closed_form() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut all_converged = true;
    for i in 0..20u64 {
        let x = DenseMatrix::new(50, 30, gaussian_vector(1500, 100 + i)).unwrap();
        let y = gaussian_vector(50, 200 + i);
        let lambda = [0.01, 0.1, 1.0][i as usize % 3];
        let p = RidgeProblem::new(&x, &y, lambda).unwrap();
        let exact = ridge_closed_form(&p).unwrap();
        let opts = SdcaOptions { gap_tol: 1e-10, max_epochs: 100_000, seed: i };
        let (w, diag) = ridge_sdca(&p, &opts).unwrap();
        all_converged &= diag.converged;
        worst = worst.max(relative_error(&w, &exact));
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-5 && all_converged && elapsed < Duration::from_secs(5);
    report(1, "SDCA vs closed-form ridge", pass, elapsed, &format!("max relative error {worst:.2e}, all converged {all_converged}"));
    assert!(pass);
}

#[test]
fn criterion_02_single_worker_is_exact() {
    let _g = serial();
    let start = Instant::now();
    let (x, y) = scenario_one(0);
    let fit = loco_fit(&x, &y, &LocoConfig::new(1, ProjectionSize::Ratio(0.1), 10.0, 0)).unwrap();
    let full = ridge_closed_form(&RidgeProblem::new(&x, &y, 10.0).unwrap()).unwrap();
    let err = relative_error(&fit.beta, &full);
    let elapsed = start.elapsed();
    let pass = err < 1e-8 && elapsed < Duration::from_secs(30);
    report(2, "K=1 equals full ridge", pass, elapsed, &format!("relative difference {err:.2e}"));
    assert!(pass);
}

fn scenario_one_records() -> (Vec<MetricsRecord>, Duration) {
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Preset { name: "scenario-one-desk".into(), seed: 0 },
        methods: vec![
            loco_grid(vec![4], vec![ProjectionSize::Ratio(0.01), ProjectionSize::Ratio(0.05), ProjectionSize::Ratio(0.1)]),
            MethodSpec::Baseline { baseline: BaselineKind::FullRidge, projection_kind: ProjectionKind::Srht },
        ],
        lambdas: vec![10.0],
        cv_folds: None,
        seeds: (0..10).collect(),
        regenerate_data: true,
        output: None,
    };
    let start = Instant::now();
    let rows = run_experiment(&cfg, &RunOptions::default()).unwrap();
    (rows, start.elapsed())
}

fn medians_by_setting(rows: &[MetricsRecord], f: fn(&MetricsRecord) -> Option<f64>) -> (Vec<f64>, f64) {
    let seed_values = |ratio: Option<f64>| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.kind == RecordKind::Seed)
            .filter(|r| match ratio {
                Some(q) => r.params.projection_size == Some(ProjectionSize::Ratio(q)),
                None => r.params.method == "full_ridge",
            })
            .map(|r| f(r).expect("metric present"))
            .collect()
    };
    let loco = [0.01, 0.05, 0.1].iter().map(|&q| median(seed_values(Some(q)))).collect();
    (loco, median(seed_values(None)))
}

#[test]
fn criterion_03_04_scenario_one_trends() {
    let _g = serial();
    let (rows, elapsed) = scenario_one_records();
    assert!(rows.iter().all(|r| !r.is_failed()));
    assert_eq!(rows.iter().filter(|r| r.kind == RecordKind::Seed).count(), 40);

    let (mse, full_mse) = medians_by_setting(&rows, |r| r.test_nmse);
    let monotone = mse[0] >= mse[1] && mse[1] >= mse[2];
    let gap = (mse[2] - full_mse).abs() / full_mse;
    let pass3 = monotone && gap <= 0.10 && elapsed < Duration::from_secs(600);
    report(
        3,
        "test NMSE non-increasing in ratio and near full ridge",
        pass3,
        elapsed,
        &format!(
            "median test NMSE at 1%/5%/10% = {:.4}/{:.4}/{:.4}, full ridge {full_mse:.4}, gap {:.1}%",
            mse[0], mse[1], mse[2], 100.0 * gap
        ),
    );

    let (corr, full_corr) = medians_by_setting(&rows, |r| r.corr_truth);
    let pass4 = corr[2] >= 0.95 * full_corr;
    report(
        4,
        "coefficient correlation with the truth",
        pass4,
        elapsed,
        &format!("median corr at 10% {:.4} vs 0.95 x full ridge {:.4}", corr[2], 0.95 * full_corr),
    );
    assert!(pass3 && pass4);
}

#[test]
fn criterion_05_local_dimension_arithmetic() {
    let _g = serial();
    let start = Instant::now();
    let d3 = local_dimension(&LocoConfig::new(3, ProjectionSize::Ratio(0.01), 1.0, 0), 150_000);
    let d12 = local_dimension(&LocoConfig::new(12, ProjectionSize::Ratio(0.01), 1.0, 0), 150_000);
    let elapsed = start.elapsed();
    let pass = d3 == 51_000 && d12 == 13_875 && elapsed < Duration::from_secs(1);
    report(5, "local dimension at p=150000, 1%", pass, elapsed, &format!("K=3 -> {d3}, K=12 -> {d12}"));
    assert!(pass);
}

#[test]
fn criterion_06_compressive_least_squares_identity() {
    let _g = serial();
    let start = Instant::now();
    let x = low_rank_design(100, 30, 30, 6).unwrap();
    let beta = gaussian_vector(30, 6);
    let mut details = Vec::new();
    let mut pass = true;
    for kind in [ProjectionKind::Gaussian, ProjectionKind::Sparse] {
        let r = kaban_check(&x, &beta, 10, kind, 100_000, 7).unwrap();
        let rel = (r.lhs - r.rhs).abs() / r.rhs;
        pass &= rel < 0.05;
        details.push(format!("{kind:?}: lhs {:.4} rhs {:.4} rel {:.2e}", r.lhs, r.rhs, rel));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    report(6, "Monte-Carlo sketch error vs closed form", pass, elapsed, &details.join(", "));
    assert!(pass);
}

#[test]
fn criterion_07_residual_identity() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let x = low_rank_design(40, 10, 10, 700 + i).unwrap();
        let y = gaussian_vector(40, 800 + i);
        let ols = qr_least_squares(&x, &y);
        for (j, &want) in ols.iter().enumerate() {
            let got = residual_coefficient(&x, &y, j).unwrap();
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-8 && elapsed < Duration::from_secs(5);
    report(7, "residual coefficient vs QR least squares", pass, elapsed, &format!("max deviation {worst:.2e}"));
    assert!(pass);
}

fn median_rho(kind: ProjectionKind, tau_subs: usize, sandwich_failures: &mut usize) -> f64 {
    let mut rhos = Vec::new();
    for s in 0..100u64 {
        let x = low_rank_design(100, 256, 10, s).unwrap();
        let mut cfg = LocoConfig::new(4, ProjectionSize::Fixed(tau_subs), 1.0, s);
        cfg.projection_kind = kind;
        let rho = empirical_rho(&x, &cfg).unwrap();
        for k in 0..4 {
            let xbar = theta_design(&x, &cfg, k).unwrap();
            if !spectral_sandwich_check(&x, &xbar, rho.per_worker[k]).unwrap().holds {
                *sandwich_failures += 1;
            }
        }
        rhos.push(rho.max);
    }
    median(rhos)
}

#[test]
fn criterion_08_sandwich_and_rho_scaling() {
    let _g = serial();
    let start = Instant::now();
    let mut failures = 0;
    let r16 = median_rho(ProjectionKind::Sparse, 16, &mut failures);
    let r32 = median_rho(ProjectionKind::Sparse, 32, &mut failures);
    let ratio = r16 / r32;
    let mut unused = 0;
    let srht = median_rho(ProjectionKind::Srht, 16, &mut unused) / median_rho(ProjectionKind::Srht, 32, &mut unused);
    let elapsed = start.elapsed();
    let pass = failures == 0 && (1.2..=1.7).contains(&ratio) && elapsed < Duration::from_secs(120);
    report(
        8,
        "spectral sandwich and rho scaling (sparse sketches)",
        pass,
        elapsed,
        &format!(
            "sandwich failures {failures}/800, median rho {r16:.4} -> {r32:.4}, ratio {ratio:.3} (SRHT ratio {srht:.3}, informational)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_risk_bound_at_unit_constant() {
    let _g = serial();
    let start = Instant::now();
    let (mut held, mut evaluated, mut vacuous, mut violated) = (0, 0, 0, 0);
    for (k, tau_subs) in [(2usize, 4000usize), (4, 1334)] {
        for s in 0..25u64 {
            let x = low_rank_design(200, 8192, 20, 900 + s).unwrap();
            let beta = gaussian_vector(8192, 950 + s);
            let cfg = LocoConfig::new(k, ProjectionSize::Fixed(tau_subs), 100.0, s);
            let opts = Theorem1Options { draws: 200, noise_seed: s, ..Default::default() };
            let r = theorem1_report(&x, &beta, 90.0, &cfg, &opts).unwrap();
            match r.status {
                BoundStatus::Evaluated => {
                    evaluated += 1;
                    held += usize::from(r.holds);
                }
                BoundStatus::VacuousRho => vacuous += 1,
                BoundStatus::AssumptionViolated => violated += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    let frac = held as f64 / evaluated.max(1) as f64;
    let pass = evaluated > 0 && frac >= 0.95 && elapsed < Duration::from_secs(1200);
    report(
        9,
        "coefficient-difference bound at C=1",
        pass,
        elapsed,
        &format!("held {held}/{evaluated} evaluated runs ({:.0}%), excluded: {vacuous} vacuous-rho, {violated} assumption-violated", 100.0 * frac),
    );
    assert!(pass);
}

#[test]
fn criterion_10_row_sampling_chernoff() {
    let _g = serial();
    let start = Instant::now();
    let w = hadamard_basis(256, 8).unwrap();
    let r = row_sampling_check(&w, 4, 32, 0.5, 0.5, 500, 10).unwrap();
    let floor = 1.0 - r.failure_bound;
    let elapsed = start.elapsed();
    let pass = r.pass_fraction >= floor && elapsed < Duration::from_secs(120);
    report(
        10,
        "concatenated row sampling vs Chernoff bound",
        pass,
        elapsed,
        &format!("pass fraction {:.3}, required >= {floor:.3} (failure bound {:.3})", r.pass_fraction, r.failure_bound),
    );
    assert!(pass);
}

fn metric_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            let obj = v.as_object_mut().unwrap();
            obj.remove("timings");
            obj.remove("speedup");
            serde_json::to_string(&v).unwrap()
        })
        .collect()
}

#[test]
fn criterion_11_thread_count_determinism() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    let text = serde_json::json!({
        "dataset": {"source": "inline", "spec": {"n": 300, "p": 512, "blocks": 8, "correlation": 0.7, "snr": 1.0, "seed": 3, "n_test": 100}},
        "methods": [
            {"method": "loco", "workers": [2, 4, 8], "sizes": [{"ratio": 0.05}, {"ratio": 0.1}]},
            {"method": "loco", "workers": [4], "sizes": [{"fixed": 8}], "merge": "sum", "projection_kind": "sparse",
             "solver": {"kind": "sdca", "gap_tol": 1e-8, "max_epochs": 200, "seed": 1}},
            {"method": "baseline", "baseline": {"kind": "full_ridge"}},
            {"method": "baseline", "baseline": {"kind": "column_compression", "tau_subs": 64}}
        ],
        "lambdas": [1.0, 10.0],
        "seeds": [0, 1]
    });
    std::fs::write(&cfg, text.to_string()).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("run-{threads}.jsonl"));
        let st = Command::new(env!("CARGO_BIN_EXE_loco"))
            .args(["run", "--strict", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(metric_lines(&out));
    }
    let elapsed = start.elapsed();
    let identical = outputs[0] == outputs[1];
    let pass = identical && !outputs[0].is_empty() && elapsed < Duration::from_secs(300);
    report(
        11,
        "byte-identical metrics across thread counts",
        pass,
        elapsed,
        &format!("{} records per run, identical {identical}", outputs[0].len()),
    );
    assert!(pass);
}

#[test]
fn criterion_12_speedup_trend_advisory() {
    let _g = serial();
    let start = Instant::now();
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Inline { spec: SimSpec::new(1000, 8192, 16, 0.7, 1.0, 12) },
        methods: vec![loco_grid(vec![2, 4, 8], vec![ProjectionSize::Ratio(0.05)])],
        lambdas: vec![10.0],
        cv_folds: None,
        seeds: vec![0],
        regenerate_data: false,
        output: None,
    };
    let rows = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let totals: Vec<f64> = rows
        .iter()
        .filter(|r| r.kind == RecordKind::Seed)
        .map(|r| r.timings.unwrap().total)
        .collect();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let non_increasing = totals.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed();
    let verdict = if cores >= 8 { "" } else { ", advisory: fewer than 8 cores, not gating" };
    report(
        12,
        "LOCO wall time non-increasing from K=2 to K=8",
        non_increasing,
        elapsed,
        &format!(
            "total seconds K=2/4/8 = {:.2}/{:.2}/{:.2} on {cores} cores{verdict}",
            totals[0], totals[1], totals[2]
        ),
    );
}
