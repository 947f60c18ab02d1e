//! Experiment orchestration: dataset ingestion, the synthetic and real-graph
//! benchmark pipelines, the concentration study, frequency-response export
//! and the filter-interpolation demo, behind the `dsgm` CLI.
//!
//! Every experiment consumes a [`RawConfig`] plus a master seed and writes
//! CSV tables and a JSON run manifest into its output directory. CSV content
//! is a pure function of (config, seed); wall-clock timings go only into the
//! manifest so reruns are byte-identical.

mod concentration_study;
mod config;
mod dataset;
mod freq;
mod interpolate_demo;
mod real;
mod synthetic;

pub use concentration_study::{run_concentration_study, ConcentrationStudyConfig};
pub use config::RawConfig;
pub use dataset::{load_dataset, Dataset, DatasetPaths, Split};
pub use freq::{run_frequency_analysis, spectral_energy_fraction, FreqConfig, FreqPanel};
pub use interpolate_demo::{run_interpolate_demo, InterpolateDemoConfig, InterpolateRow};
pub use real::{run_real_benchmark, RealBenchmarkConfig};
pub use synthetic::{run_synthetic_benchmark, SyntheticConfig, SyntheticTrial};

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::concentration::ConcentrationError;
use crate::gnn::GnnError;
use crate::graphs::GraphError;
use crate::kernels::KernelError;
use crate::spectra::SpectraError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error in {context}: {message}")]
    Config { context: String, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("dataset validation failed: {0}")]
    Dataset(String),
    #[error("in trial {context}: {source}")]
    Trial {
        context: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Concentration(#[from] ConcentrationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub(crate) fn in_trial(self, context: impl Into<String>) -> Self {
        HarnessError::Trial {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

/// One trained-and-evaluated model instance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrialRecord {
    /// Benchmark setting: `gamma=0.002` for synthetic runs, `original` or
    /// `drop20`/`drop70` for real runs.
    pub setting: String,
    /// Sparsified-replica index (0 when the graph is not resampled).
    pub replica: u64,
    /// Trial index: the seed index for synthetic runs, the split id for
    /// real runs.
    pub trial: u64,
    pub method: String,
    pub operator: String,
    /// Embedding dimension K for spectral methods, 0 for GNNs.
    pub dim: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Wall time of this trial; reported in the manifest only.
    pub wall_ms: f64,
}

/// Aggregate over all records sharing (setting, method, operator, dim).
#[derive(Debug, Clone, serde::Serialize)]
pub struct Aggregate {
    pub setting: String,
    pub method: String,
    pub operator: String,
    pub dim: usize,
    pub count: usize,
    pub mean_test_acc: f64,
    pub stderr_test_acc: f64,
}

/// Benchmark outcome: per-trial records plus their aggregates.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl RunResult {
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let mut groups: Vec<((String, String, String, usize), Vec<f64>)> = Vec::new();
        for r in &records {
            let key = (
                r.setting.clone(),
                r.method.clone(),
                r.operator.clone(),
                r.dim,
            );
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, acc)) => acc.push(r.test_acc),
                None => groups.push((key, vec![r.test_acc])),
            }
        }
        let aggregates = groups
            .into_iter()
            .map(|((setting, method, operator, dim), accs)| {
                let (mean, stderr) = mean_and_stderr(&accs);
                Aggregate {
                    setting,
                    method,
                    operator,
                    dim,
                    count: accs.len(),
                    mean_test_acc: mean,
                    stderr_test_acc: stderr,
                }
            })
            .collect();
        RunResult {
            records,
            aggregates,
        }
    }

    /// Largest deviation between stored aggregates and a recomputation from
    /// the records; the contract is ≤ 1e-12.
    pub fn aggregate_deviation(&self) -> f64 {
        let fresh = RunResult::from_records(self.records.clone());
        if self.aggregates.len() != fresh.aggregates.len() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.aggregates.iter().zip(&fresh.aggregates) {
            worst = worst.max((a.mean_test_acc - b.mean_test_acc).abs());
            worst = worst.max((a.stderr_test_acc - b.stderr_test_acc).abs());
        }
        worst
    }

    pub fn aggregate_for(
        &self,
        setting: &str,
        method: &str,
        operator: &str,
        dim: usize,
    ) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| {
            a.setting == setting && a.method == method && a.operator == operator && a.dim == dim
        })
    }
}

/// Writes a CSV file; every cell is already formatted.
pub(crate) fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::File {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes `results.csv` and `aggregates.csv` for a benchmark outcome.
pub(crate) fn write_run_result(
    out_dir: &Path,
    result: &RunResult,
) -> Result<Vec<PathBuf>, HarnessError> {
    let results = out_dir.join("results.csv");
    write_csv(
        &results,
        "setting,replica,trial,method,operator,dim,train_acc,test_acc",
        result.records.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                r.setting,
                r.replica,
                r.trial,
                r.method,
                r.operator,
                r.dim,
                fmt_f64(r.train_acc),
                fmt_f64(r.test_acc)
            )
        }),
    )?;
    let aggregates = out_dir.join("aggregates.csv");
    write_csv(
        &aggregates,
        "setting,method,operator,dim,count,mean_test_acc,stderr_test_acc",
        result.aggregates.iter().map(|a| {
            format!(
                "{},{},{},{},{},{},{}",
                a.setting,
                a.method,
                a.operator,
                a.dim,
                a.count,
                fmt_f64(a.mean_test_acc),
                fmt_f64(a.stderr_test_acc)
            )
        }),
    )?;
    Ok(vec![results, aggregates])
}

/// Run manifest: configuration echo, seed, version and timings. Timings are
/// deliberately excluded from the CSV outputs.
#[derive(Debug, serde::Serialize)]
pub struct Manifest {
    pub command: String,
    pub crate_version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: std::collections::BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, config: &RawConfig, seed: u64, threads: usize) -> Self {
        Manifest {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            config: config
                .entries()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            outputs: Vec::new(),
            wall_ms: 0.0,
            extra: None,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = out_dir.join("manifest.json");
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::File {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| HarnessError::Dataset(format!("manifest serialization: {e}")))?;
        Ok(path)
    }
}

/// Runs `body` on a rayon pool with the requested thread count (0 = rayon
/// default). Trial outputs are merged in trial order, so results do not
/// depend on the pool size.
pub(crate) fn with_pool<T: Send>(
    threads: usize,
    body: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    if threads == 0 {
        return Ok(body());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config {
            context: "threads".into(),
            message: e.to_string(),
        })?;
    Ok(pool.install(body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(setting: &str, trial: u64, acc: f64) -> TrialRecord {
        TrialRecord {
            setting: setting.into(),
            replica: 0,
            trial,
            method: "se".into(),
            operator: "adj".into(),
            dim: 2,
            train_acc: 1.0,
            test_acc: acc,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn aggregates_are_recomputable() {
        let records = vec![
            record("a", 0, 0.5),
            record("a", 1, 0.7),
            record("b", 0, 0.9),
        ];
        let result = RunResult::from_records(records);
        assert_eq!(result.aggregates.len(), 2);
        let a = result.aggregate_for("a", "se", "adj", 2).unwrap();
        assert!((a.mean_test_acc - 0.6).abs() < 1e-15);
        // stderr = sd/sqrt(n) with ddof 1: sd = 0.1*sqrt(2), stderr = 0.1.
        assert!((a.stderr_test_acc - 0.1).abs() < 1e-12);
        assert!(result.aggregate_deviation() <= 1e-12);
    }
}
