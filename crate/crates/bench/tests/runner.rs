use loco_bench::config::{DatasetSource, ExperimentConfig, LocoGrid, MethodSpec};
use loco_bench::runner::{RecordKind, Status};
use loco_bench::{run_experiment, RunOptions};
use loco_core::baselines::BaselineKind;
use loco_core::datagen::SimSpec;
use loco_core::engine::{LocalSolver, ProjectionSize};
use loco_core::projections::{MergeMode, ProjectionKind};

fn small_spec() -> SimSpec {
    SimSpec { n_test: 40, ..SimSpec::new(120, 96, 4, 0.6, 2.0, 11) }
}

fn loco(workers: Vec<usize>, sizes: Vec<ProjectionSize>) -> MethodSpec {
    MethodSpec::Loco(LocoGrid {
        workers,
        sizes,
        merge: MergeMode::Concatenate,
        projection_kind: ProjectionKind::Srht,
        solver: LocalSolver::ClosedForm,
        standardize_sketches: false,
    })
}

fn baseline(b: BaselineKind) -> MethodSpec {
    MethodSpec::Baseline { baseline: b, projection_kind: ProjectionKind::Srht }
}

fn config(methods: Vec<MethodSpec>, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Inline { spec: small_spec() },
        methods,
        lambdas: vec![0.5],
        cv_folds: None,
        seeds,
        regenerate_data: false,
        output: None,
    }
}

#[test]
fn single_worker_record_matches_full_ridge() {
    let cfg = config(vec![loco(vec![1], vec![ProjectionSize::Ratio(0.1)]), baseline(BaselineKind::FullRidge)], vec![3]);
    let rows = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let seed_rows: Vec<_> = rows.iter().filter(|r| r.kind == RecordKind::Seed).collect();
    assert_eq!(seed_rows.len(), 2);
    let (a, b) = (seed_rows[0].test_nmse.unwrap(), seed_rows[1].test_nmse.unwrap());
    assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
    assert!((seed_rows[0].corr_full_ridge.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn grid_shape_and_aggregates() {
    let cfg = config(vec![loco(vec![2, 4, 8], vec![ProjectionSize::Ratio(0.1)])], vec![0, 1, 2, 3, 4]);
    let rows = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let seeds: Vec<_> = rows.iter().filter(|r| r.kind == RecordKind::Seed).collect();
    assert_eq!(seeds.len(), 15);
    assert!(seeds.iter().all(|r| r.status == Status::Ok));
    for r in &seeds {
        let c = r.corr_truth.unwrap();
        assert!((-1.0..=1.0).contains(&c) && r.train_nmse.unwrap() >= 0.0);
    }
    let medians: Vec<_> = rows.iter().filter(|r| r.kind == RecordKind::Median).collect();
    assert_eq!(medians.len(), 3);
    assert_eq!(rows.iter().filter(|r| r.kind == RecordKind::Mean).count(), 3);
    // Aggregates are functions of the seed rows they summarize.
    for m in &medians {
        let mut v: Vec<f64> = seeds
            .iter()
            .filter(|r| r.params == m.params)
            .map(|r| r.test_nmse.unwrap())
            .collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(m.test_nmse, Some(v[2]));
        assert_eq!(m.n_seeds, 5);
        assert!(m.speedup.is_some());
    }
    assert_eq!(medians[0].speedup, Some(1.0));
}

#[test]
fn failures_are_recorded_and_the_run_continues() {
    let cfg = config(
        vec![baseline(BaselineKind::ColumnCompression { tau_subs: 500 }), baseline(BaselineKind::DiagonalApprox)],
        vec![0],
    );
    let rows = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(rows[0].status, Status::Failed);
    assert!(rows[0].error.as_deref().unwrap().contains("500"));
    assert_eq!(rows[1].status, Status::Ok);
}

#[test]
fn cross_validation_picks_from_the_grid() {
    let mut cfg = config(vec![baseline(BaselineKind::FullRidge)], vec![0]);
    cfg.lambdas = vec![1e-3, 0.1, 10.0, 1000.0];
    cfg.cv_folds = Some(5);
    let rows = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(rows[0].params.lambda, None);
    let chosen = rows[0].lambda.unwrap();
    assert!(cfg.lambdas.contains(&chosen));
    assert_ne!(chosen, 1000.0);
}

#[test]
fn parallel_grid_gives_the_same_metrics() {
    let cfg = config(
        vec![loco(vec![2, 3], vec![ProjectionSize::Fixed(5)]), baseline(BaselineKind::FullRidge)],
        vec![0, 1],
    );
    let a = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let b = run_experiment(&cfg, &RunOptions { parallel_grid: true, threads: Some(2) }).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.metric_fields(), y.metric_fields());
    }
    assert!(b.iter().all(|r| r.speedup.is_none()));
}
