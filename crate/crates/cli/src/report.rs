//! `summary.json` and CSV tables.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, SCHEMA_VERSION};
use crate::pipeline::{RunResult, TaskReport};

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub name: &'a str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub tasks: &'a [TaskReport],
    pub exit_code: i32,
}

pub fn summary<'a>(cfg: &'a ExperimentConfig, seed: u64, result: &'a RunResult) -> Summary<'a> {
    Summary {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        schema: SCHEMA_VERSION,
        name: &cfg.name,
        seed,
        config: cfg,
        tasks: &result.tasks,
        exit_code: result.exit_code(),
    }
}

/// Writes the selected formats into `dir`, creating it if needed.
pub fn write(dir: &Path, cfg: &ExperimentConfig, seed: u64, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if cfg.output.formats.contains(&Format::Json) {
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary(cfg, seed, result))?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if cfg.output.formats.contains(&Format::Csv) {
        for t in &result.tables {
            let path = dir.join(&t.file);
            let mut w = csv::Writer::from_path(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            w.write_record(&t.header)?;
            for row in &t.rows {
                w.write_record(row.iter().map(|v| format!("{v:e}")))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
