//! JSON Lines and CSV writers for result records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::runner::MetricsRecord;

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    kind: &'a str,
    method: &'a str,
    workers: Option<usize>,
    projection_size: Option<String>,
    tau_subs: Option<usize>,
    n_subs: Option<usize>,
    merge: Option<String>,
    projection_kind: Option<String>,
    solver: Option<&'a str>,
    seed: Option<u64>,
    n_seeds: usize,
    status: &'a str,
    lambda: Option<f64>,
    train_nmse: Option<f64>,
    test_nmse: Option<f64>,
    coef_rel_mse: Option<f64>,
    corr_truth: Option<f64>,
    corr_full_ridge: Option<f64>,
    local_dimension: Option<usize>,
    time_project: Option<f64>,
    time_exchange: Option<f64>,
    time_solve: Option<f64>,
    time_total: Option<f64>,
    threads: Option<usize>,
    speedup: Option<f64>,
    error: Option<&'a str>,
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn write_csv(path: &Path, rows: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        let p = &r.params;
        let kind = label(&r.kind);
        let status = label(&r.status);
        w.serialize(CsvRow {
            kind: &kind,
            method: &p.method,
            workers: p.workers,
            projection_size: p.projection_size.as_ref().map(label),
            tau_subs: p.tau_subs,
            n_subs: p.n_subs,
            merge: p.merge.as_ref().map(label),
            projection_kind: p.projection_kind.as_ref().map(label),
            solver: p.solver.as_deref(),
            seed: r.seed,
            n_seeds: r.n_seeds,
            status: &status,
            lambda: r.lambda,
            train_nmse: r.train_nmse,
            test_nmse: r.test_nmse,
            coef_rel_mse: r.coef_rel_mse,
            corr_truth: r.corr_truth,
            corr_full_ridge: r.corr_full_ridge,
            local_dimension: r.local_dimension,
            time_project: r.timings.map(|t| t.project),
            time_exchange: r.timings.map(|t| t.exchange),
            time_solve: r.timings.map(|t| t.solve),
            time_total: r.timings.map(|t| t.total),
            threads: r.timings.map(|t| t.threads),
            speedup: r.speedup,
            error: r.error.as_deref(),
        })?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}
