//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use loco_core::baselines::BaselineKind;
use loco_core::datagen::SimSpec;
use loco_core::engine::{LocalSolver, ProjectionSize};
use loco_core::projections::{MergeMode, ProjectionKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Preset {
        name: String,
        seed: u64,
    },
    /// A directory written by `loco generate`.
    File {
        path: PathBuf,
    },
    Inline {
        spec: SimSpec,
    },
}

/// Grid of LOCO settings; every combination of `workers` and `sizes` is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoGrid {
    pub workers: Vec<usize>,
    pub sizes: Vec<ProjectionSize>,
    #[serde(default)]
    pub merge: MergeMode,
    #[serde(default)]
    pub projection_kind: ProjectionKind,
    #[serde(default)]
    pub solver: LocalSolver,
    #[serde(default)]
    pub standardize_sketches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Loco(LocoGrid),
    Baseline {
        baseline: BaselineKind,
        #[serde(default)]
        projection_kind: ProjectionKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub methods: Vec<MethodSpec>,
    pub lambdas: Vec<f64>,
    /// Pick λ from `lambdas` by k-fold cross-validation instead of
    /// reporting every grid value.
    #[serde(default)]
    pub cv_folds: Option<usize>,
    pub seeds: Vec<u64>,
    /// Redraw generated data for every seed (`derive_seed(data seed, seed)`).
    #[serde(default)]
    pub regenerate_data: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("config lists no methods");
        }
        if self.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            bail!("lambdas must be a non-empty list of positive numbers");
        }
        if let Some(k) = self.cv_folds {
            if k < 2 {
                bail!("cv_folds must be at least 2, got {k}");
            }
        }
        for m in &self.methods {
            if let MethodSpec::Loco(g) = m {
                if g.workers.is_empty() || g.sizes.is_empty() {
                    bail!("loco grid needs at least one worker count and one projection size");
                }
            }
        }
        Ok(())
    }
}
