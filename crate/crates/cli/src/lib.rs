//! Config-driven experiment runner behind the `mg` binary.
//!
//! [`run_to_dir`] is the whole pipeline: validate the config, run it on a
//! pool of the requested width, write the outputs and then `manifest.json`.
//! Outputs depend only on the config and its master seed.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

pub use config::{ExperimentConfig, Kind};
use output::{CSV_SCHEMA_VERSION, JSON_SCHEMA_VERSION};
pub use run::{execute, RunOutput, SeedRecord};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";
pub const THREADS_ENV: &str = "MG_THREADS";

#[derive(Debug, Clone, Serialize)]
pub struct SchemaVersions {
    pub csv: u32,
    pub json: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to reproduce and verify a run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub schema_versions: SchemaVersions,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, output: &RunOutput) -> Self {
        RunManifest {
            tool: "mg",
            tool_version: TOOL_VERSION,
            schema_versions: SchemaVersions {
                csv: CSV_SCHEMA_VERSION,
                json: JSON_SCHEMA_VERSION,
            },
            config: config.clone(),
            seeds: output.seeds.clone(),
            files: output
                .files
                .iter()
                .map(|f| FileRecord {
                    name: f.name.clone(),
                    bytes: f.bytes.len(),
                    sha256: f.sha256(),
                })
                .collect(),
        }
    }
}

/// Pool width: `MG_THREADS` wins over the config's `threads`; neither
/// means one worker per core.
pub fn thread_count(config: &ExperimentConfig) -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
            anyhow::ensure!(n > 0, "{THREADS_ENV} must be at least 1");
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(config.threads),
        Err(e) => Err(e).context(THREADS_ENV),
    }
}

/// Runs `config` on a dedicated pool and returns the files plus manifest.
pub fn run_in_pool(config: &ExperimentConfig, threads: Option<usize>) -> anyhow::Result<(RunOutput, RunManifest)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    let output = pool.install(|| execute(config))?;
    let manifest = RunManifest::new(config, &output);
    Ok((output, manifest))
}

pub fn output_dir(config: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUTPUT_DIR))
}

/// Full pipeline. On failure nothing from this invocation is left behind.
pub fn run_to_dir(config: &ExperimentConfig, override_dir: Option<&Path>) -> anyhow::Result<(PathBuf, RunManifest)> {
    let dir = output_dir(config, override_dir);
    let (output, manifest) = run_in_pool(config, thread_count(config)?)?;
    let mut files = output.files;
    files.push(output::json(MANIFEST_NAME, &manifest)?);
    output::write_all(&dir, &files)?;
    Ok((dir, manifest))
}

pub fn describe(config: &ExperimentConfig) -> String {
    let outputs: &[&str] = match config.kind {
        Kind::Basic => &["trace.csv", "summary.json"],
        Kind::Gcmg => &["trace.csv", "summary.json"],
        Kind::Emg => &["trace.csv", "genes.csv", "summary.json"],
        Kind::Simplex => &["trace.csv", "summary.json"],
        Kind::PhaseScan => &["phase_scan.csv", "summary.json"],
        Kind::EquilibriumReport => &["equilibrium.json"],
        Kind::Offload => &[
            "fig1_attendance.csv",
            "fig2_volatility.csv",
            "fig3_utility.csv",
            "fig4_utility.csv",
            "fig5_below_threshold.csv",
            "fig5_random_baseline.csv",
            "summary.json",
        ],
    };
    format!(
        "kind = {}, seed = {}, outputs: {}, {MANIFEST_NAME}",
        config.kind.as_str(),
        config.seed,
        outputs.join(", ")
    )
}
