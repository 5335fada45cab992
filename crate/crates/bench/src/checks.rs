//! Quick self-checks behind `loco check`.

use anyhow::Result;
use loco_core::datagen::low_rank_design;
use loco_core::engine::{loco_fit, LocoConfig, ProjectionSize};
use loco_core::linalg::DenseMatrix;
use loco_core::projections::ProjectionKind;
use loco_core::solvers::{ols_min_norm, residual_coefficient, ridge_closed_form, ridge_sdca, RidgeProblem, SdcaOptions};
use loco_core::theory::{
    compute_rho, empirical_rho, hadamard_basis, kaban_check, relative_error, row_sampling_check,
    spectral_sandwich_check, theorem1_report, theta_design, Theorem1Options,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Theory,
    Solvers,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

fn record(suite: &str, name: &str, passed: bool, detail: Value) -> CheckRecord {
    CheckRecord { suite: suite.into(), name: name.into(), passed, detail }
}

fn response(x: &DenseMatrix) -> Vec<f64> {
    (0..x.rows()).map(|i| (i as f64 * 0.37).sin() + x.get(i, 0)).collect()
}

fn theory() -> Result<Vec<CheckRecord>> {
    let s = "theory";
    let mut out = Vec::new();

    let rho = compute_rho(20, 0.05, 2, 4000, 1.0)?;
    out.push(record(s, "rho_closed_form", (rho - 0.1828).abs() < 1e-4, json!({ "rho": rho })));

    let x = low_rank_design(50, 12, 12, 1)?;
    let beta: Vec<f64> = (0..12).map(|i| 1.0 - 0.15 * i as f64).collect();
    let k = kaban_check(&x, &beta, 4, ProjectionKind::Gaussian, 5000, 2)?;
    out.push(record(s, "kaban_gaussian", (k.lhs - k.rhs).abs() < 4.0 * k.lhs_se, serde_json::to_value(k)?));

    let x = low_rank_design(40, 96, 5, 3)?;
    let mut cfg = LocoConfig::new(3, ProjectionSize::Fixed(8), 1.0, 3);
    cfg.projection_kind = ProjectionKind::Sparse;
    let r = empirical_rho(&x, &cfg)?;
    let sw = spectral_sandwich_check(&x, &theta_design(&x, &cfg, 0)?, r.per_worker[0])?;
    out.push(record(s, "spectral_sandwich", sw.holds, json!({ "rho_hat": r.per_worker[0], "report": sw })));

    let w = hadamard_basis(64, 4)?;
    let rs = row_sampling_check(&w, 4, 8, 0.5, 0.5, 100, 4)?;
    out.push(record(s, "row_sampling", rs.pass_fraction >= 1.0 - rs.failure_bound, serde_json::to_value(rs)?));

    let x = low_rank_design(30, 20, 20, 5)?;
    let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.5).cos()).collect();
    let cfg = LocoConfig::new(1, ProjectionSize::Fixed(1), 0.5, 0);
    let rep = theorem1_report(&x, &b, 0.5, &cfg, &Theorem1Options { draws: 20, ..Default::default() })?;
    out.push(record(s, "bound_single_worker", rep.holds && rep.lhs < 1e-20, serde_json::to_value(rep)?));
    Ok(out)
}

fn solvers() -> Result<Vec<CheckRecord>> {
    let s = "solvers";
    let mut out = Vec::new();

    let x = low_rank_design(50, 30, 30, 6)?;
    let y = response(&x);
    let p = RidgeProblem::new(&x, &y, 0.1)?;
    let exact = ridge_closed_form(&p)?;
    let (w, diag) = ridge_sdca(&p, &SdcaOptions { gap_tol: 1e-10, max_epochs: 10_000, seed: 0 })?;
    let err = relative_error(&w, &exact);
    out.push(record(s, "sdca_vs_closed_form", err < 1e-5, json!({ "relative_error": err, "diagnostics": diag })));

    let x = low_rank_design(40, 10, 10, 7)?;
    let y = response(&x);
    let ols = ols_min_norm(&x, &y)?;
    let coef = residual_coefficient(&x, &y, 3)?;
    out.push(record(s, "residual_coefficient", (coef - ols[3]).abs() < 1e-8 * ols[3].abs().max(1.0), json!({ "residual": coef, "ols": ols[3] })));

    let x = low_rank_design(30, 16, 16, 8)?;
    let y = response(&x);
    let fit = loco_fit(&x, &y, &LocoConfig::new(1, ProjectionSize::Ratio(0.1), 0.3, 0))?;
    let full = ridge_closed_form(&RidgeProblem::new(&x, &y, 0.3)?)?;
    let err = relative_error(&fit.beta, &full);
    out.push(record(s, "single_worker_equals_ridge", err < 1e-8, json!({ "relative_error": err })));
    Ok(out)
}

pub fn run_checks(suite: Suite) -> Result<Vec<CheckRecord>> {
    Ok(match suite {
        Suite::Theory => theory()?,
        Suite::Solvers => solvers()?,
        Suite::All => {
            let mut v = solvers()?;
            v.extend(theory()?);
            v
        }
    })
}
