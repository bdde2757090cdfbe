//! Run directory writer and manifest.
//!
//! All files of a run go through one [`RunWriter`], which records what it
//! wrote for the manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use nullctl::report::CsvTable;

use crate::config::ExperimentConfig;

/// Bumped whenever a CSV column list changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub name: String,
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Tolerances {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
    /// Free-form scalar results of the run.
    pub summary: Vec<(String, f64)>,
    pub config: ExperimentConfig,
}

pub struct RunWriter {
    dir: PathBuf,
    manifest: RunManifest,
    stage: Option<(String, Instant)>,
}

impl RunWriter {
    pub fn create(subcommand: &str, cfg: &ExperimentConfig) -> nullctl::Result<Self> {
        let dir = cfg.output.clone();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                config_hash: cfg.hash(),
                artifact_version: env!("CARGO_PKG_VERSION").to_string(),
                seed: cfg.seed,
                tolerances: Tolerances {
                    cg_tol: cfg.hum.cg_tol,
                    cg_max_iter: cfg.hum.cg_max_iter,
                    fixed_point_tol: cfg.fixed_point.tol,
                    fixed_point_max_iter: cfg.fixed_point.max_iter,
                    newton_tol: cfg.fixed_point.newton_tol,
                    newton_max_iter: cfg.fixed_point.newton_max_iter,
                },
                stages: Vec::new(),
                files: Vec::new(),
                summary: Vec::new(),
                config: cfg.clone(),
            },
            stage: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Closes the running stage (if any) and starts timing `name`.
    pub fn stage(&mut self, name: &str) {
        self.end_stage();
        self.stage = Some((name.to_string(), Instant::now()));
    }

    fn end_stage(&mut self) {
        if let Some((name, t0)) = self.stage.take() {
            self.manifest.stages.push(StageTiming {
                stage: name,
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> nullctl::Result<()> {
        table.write_file(&self.dir.join(name))?;
        self.manifest.files.push(FileEntry {
            name: name.to_string(),
            schema_version: CSV_SCHEMA_VERSION,
            columns: table.header().to_vec(),
            rows: table.len(),
        });
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> nullctl::Result<()> {
        std::fs::write(self.dir.join(name), data)?;
        self.manifest.files.push(FileEntry {
            name: name.to_string(),
            schema_version: CSV_SCHEMA_VERSION,
            columns: Vec::new(),
            rows: 0,
        });
        Ok(())
    }

    pub fn summary(&mut self, key: &str, value: f64) {
        self.manifest.summary.push((key.to_string(), value));
    }

    pub fn summaries(&self) -> &[(String, f64)] {
        &self.manifest.summary
    }

    /// Writes `summary.csv` and `manifest.json`.
    pub fn finish(mut self) -> nullctl::Result<RunManifest> {
        self.end_stage();
        let mut t = CsvTable::new(&["metric", "value"]);
        for (k, v) in &self.manifest.summary {
            t.push(vec![k.as_str().into(), (*v).into()]);
        }
        self.csv("summary.csv", &t)?;
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(self.dir.join("manifest.json"), json + "\n")?;
        Ok(self.manifest)
    }
}
