use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use loco_bench::checks::{run_checks, Suite};
use loco_bench::output::{write_csv, write_jsonl};
use loco_bench::{run_experiment, ExperimentConfig, RunOptions};
use loco_core::datagen::{generate, write_dataset, SimSpec};

#[derive(Parser)]
#[command(name = "loco", version, about = "Distributed ridge regression with random projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Generate {
        /// JSON simulation spec.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        /// Named preset instead of a spec file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment grid and write JSON Lines records.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV export.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Exit with an error when any record failed.
        #[arg(long)]
        strict: bool,
        /// Run grid points concurrently (no speedup columns).
        #[arg(long)]
        parallel_grid: bool,
        /// Worker threads per LOCO fit; defaults to LOCO_THREADS or the core count.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run built-in numerical checks.
    Check {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { spec, preset, seed, out } => {
            let spec = match (spec, preset) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading spec {}", path.display()))?;
                    serde_json::from_str::<SimSpec>(&text)
                        .with_context(|| format!("parsing spec {}", path.display()))?
                }
                (None, Some(name)) => SimSpec::preset(&name, seed)?,
                (None, None) => bail!("pass --spec or --preset"),
            };
            let ds = generate(&spec)?;
            write_dataset(&out, &ds)?;
            eprintln!("wrote {}x{} dataset to {}", spec.n, spec.p, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out, csv, strict, parallel_grid, threads } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                bail!("no output path: pass --out or set `output` in the config");
            };
            let records = run_experiment(&cfg, &RunOptions { parallel_grid, threads })?;
            write_jsonl(&out, &records)?;
            if let Some(path) = csv {
                write_csv(&path, &records)?;
            }
            let failed = records.iter().filter(|r| r.is_failed()).count();
            eprintln!("{} records, {failed} failed -> {}", records.len(), out.display());
            Ok(if strict && failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Check { suite, out } => {
            let records = run_checks(suite)?;
            write_jsonl(&out, &records)?;
            let failed: Vec<&str> = records.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
            for r in &records {
                eprintln!("{:<5} {}/{}", if r.passed { "PASS" } else { "FAIL" }, r.suite, r.name);
            }
            Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
