//! CSV records and the JSON run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::SimError;

/// Bumped whenever the CSV columns or the manifest layout change.
pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_COLUMNS: [&str; 8] = [
    "experiment",
    "estimator",
    "user_index",
    "metric",
    "value",
    "stderr",
    "seed",
    "config_hash",
];

/// One CSV row. Sweep coordinates are part of `experiment`, e.g.
/// `mse:snr_d_db=5:tau_d=100`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub experiment: String,
    pub estimator: String,
    pub user_index: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
}

/// Stamps records with the seed and hash of one run.
#[derive(Debug, Clone)]
pub struct RecordSink {
    seed: u64,
    hash: String,
    pub records: Vec<Record>,
    pub warnings: Vec<String>,
}

impl RecordSink {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        RecordSink {
            seed: cfg.seed,
            hash: cfg.hash(),
            records: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        experiment: impl Into<String>,
        estimator: &str,
        user_index: Option<usize>,
        metric: &str,
        value: f64,
        stderr: Option<f64>,
    ) {
        self.records.push(Record {
            experiment: experiment.into(),
            estimator: estimator.into(),
            user_index,
            metric: metric.into(),
            value,
            stderr,
            seed: self.seed,
            config_hash: self.hash.clone(),
        });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Records matching `experiment`, `estimator` and `metric`.
    pub fn find<'a>(&'a self, experiment: &'a str, estimator: &'a str, metric: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records
            .iter()
            .filter(move |r| r.experiment == experiment && r.estimator == estimator && r.metric == metric)
    }
}

pub fn write_csv<W: Write>(records: &[Record], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.estimator.clone(),
            r.user_index.map(|u| u.to_string()).unwrap_or_default(),
            r.metric.clone(),
            r.value.to_string(),
            r.stderr.map(|s| s.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[Record]) -> Result<String, SimError> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub experiment: &'a str,
    pub version: &'a str,
    pub config: &'a ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub csv_columns: [&'a str; 8],
    pub records: usize,
    pub warnings: &'a [String],
}

/// Writes `<experiment>.csv` and `<experiment>.manifest.json` into `dir`.
pub fn write_run(
    dir: &Path,
    experiment: &str,
    cfg: &ExperimentConfig,
    sink: &RecordSink,
    workers: usize,
) -> Result<(PathBuf, PathBuf), SimError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{experiment}.csv"));
    write_csv(&sink.records, std::fs::File::create(&csv_path)?)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        workers,
        csv_columns: CSV_COLUMNS,
        records: sink.records.len(),
        warnings: &sink.warnings,
    };
    let manifest_path = dir.join(format!("{experiment}.manifest.json"));
    let mut f = std::fs::File::create(&manifest_path)?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    Ok((csv_path, manifest_path))
}
