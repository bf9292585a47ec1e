//! Experiment runner: config, seeded trials, records, summaries.
//!
//! A run directory holds
//!
//! - `records.csv`: one row per trial and method (see [`record`]),
//! - `timings.csv`: solver wall-clock times in the same row order,
//! - `summary.csv`: per-method means (see [`summary::SummaryRow`]),
//! - `summary_timings.csv`: per-method mean solve time and iterations,
//! - `cdf_power.csv`, `cdf_rate.csv`: empirical CDFs of per-antenna power
//!   and per-UE rate,
//! - `manifest.json`: config echo, version, seeds and outcome counts.
//!
//! Everything except the two timing files is byte-identical across reruns.

pub mod config;
pub mod longterm;
pub mod record;
pub mod run;
pub mod summary;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

pub use config::{BudgetPoint, ExperimentConfig, PrecoderKind, WeightMode};
pub use longterm::longterm_weights;
pub use record::{TrialRecord, TrialStatus};
pub use run::run_experiment;
pub use summary::{summarize, Summary};

use crate::channel::SystemDims;
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The config as TOML, so non-finite values survive.
    pub config_toml: String,
    pub dims: Vec<SystemDims>,
    pub trials: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub records: usize,
    pub feasible: usize,
    pub flagged_infeasible: usize,
    pub failed: usize,
    /// Every record is feasible after recheck or explicitly flagged.
    pub all_accounted: bool,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, records: &[TrialRecord], files: Vec<String>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_toml: cfg.to_toml_string()?,
            dims: cfg.system.dims(),
            trials: cfg.channel.trials,
            base_seed: cfg.channel.base_seed,
            seeds: (0..cfg.channel.trials).map(|t| cfg.trial_seed(t)).collect(),
            records: records.len(),
            feasible: records
                .iter()
                .filter(|r| r.status == TrialStatus::Ok && r.feasibility.all())
                .count(),
            flagged_infeasible: records
                .iter()
                .filter(|r| r.status == TrialStatus::NoFeasiblePoint)
                .count(),
            failed: records
                .iter()
                .filter(|r| matches!(r.status, TrialStatus::Failed(_)))
                .count(),
            all_accounted: records.iter().all(TrialRecord::accounted_for),
            files,
        })
    }
}

/// Writes records, timings, summary, CDFs and the manifest into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<(RunManifest, Summary)> {
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
    record::write_records(create("records.csv")?, records)?;
    record::write_timings(create("timings.csv")?, records)?;
    let summary = summarize(records, &cfg.pa)?;
    summary.write_rows(create("summary.csv")?)?;
    summary.write_timings(create("summary_timings.csv")?)?;
    Summary::write_cdfs(&summary.power_cdfs, create("cdf_power.csv")?)?;
    Summary::write_cdfs(&summary.rate_cdfs, create("cdf_rate.csv")?)?;
    let files = [
        "records.csv",
        "timings.csv",
        "summary.csv",
        "summary_timings.csv",
        "cdf_power.csv",
        "cdf_rate.csv",
        "manifest.json",
    ]
    .map(String::from)
    .to_vec();
    let manifest = RunManifest::new(cfg, records, files)?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| crate::error::FlatPrecError::Config(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok((manifest, summary))
}
