//! Command implementations plus shared experiment plumbing.

pub mod ablate;
pub mod eval;
pub mod metrics_cmd;
pub mod ntk_cmd;
pub mod sweep;
pub mod train;

use std::io::Write;
use std::path::{Path, PathBuf};

use amp_core::datasets::{Normalizer, SyntheticDataset};
use amp_core::metrics::{
    all_metrics, format_metrics_table, write_metrics_csv, MetricsRow, ScorePopulations,
};
use amp_core::nn::MlpModel;
use amp_core::scoring::{ScoreRule, ScoredSample};
use amp_core::Tensor2D;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Generated data with the ID-training normalization applied everywhere.
pub struct Prepared {
    pub train_raw: SyntheticDataset,
    pub test_raw: SyntheticDataset,
    pub normalizer: Normalizer,
    pub train_features: Tensor2D,
    pub test_features: Tensor2D,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, CliError> {
    let (train_raw, test_raw) = config.generate_id_data()?;
    let normalizer = Normalizer::fit(&train_raw.features);
    let train_features = normalizer.apply(&train_raw.features)?;
    let test_features = normalizer.apply(&test_raw.features)?;
    Ok(Prepared {
        train_raw,
        test_raw,
        normalizer,
        train_features,
        test_features,
    })
}

pub fn ensure_out_dir(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Timestamps live only in this sidecar log, never in data outputs.
pub fn append_run_log(dir: &Path, line: &str) -> Result<(), CliError> {
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("run.log"))?;
    writeln!(f, "[{ts}] {line}")?;
    Ok(())
}

/// Checkpoint architecture must match the config before evaluation.
pub fn check_architecture(model: &MlpModel, config: &ExperimentConfig) -> Result<(), CliError> {
    let expected = config.layer_sizes();
    if model.layer_sizes() != expected.as_slice() {
        return Err(CliError::Runtime(format!(
            "checkpoint architecture {:?} does not match config architecture {:?}",
            model.layer_sizes(),
            expected
        )));
    }
    Ok(())
}

/// Per-rule metric rows from scored ID and OOD samples, using each rule's
/// orientation contract.
pub fn metric_rows(
    id: &[ScoredSample],
    ood: &[ScoredSample],
) -> Result<Vec<MetricsRow>, CliError> {
    let mut rows = Vec::with_capacity(ScoreRule::ALL.len());
    for rule in ScoreRule::ALL {
        let pop = ScorePopulations::new(
            id.iter().map(|s| s.scores.get(rule)).collect(),
            ood.iter().map(|s| s.scores.get(rule)).collect(),
            rule.higher_is_id(),
        )?;
        rows.push(MetricsRow {
            rule: rule.name().to_string(),
            metrics: all_metrics(&pop)?,
        });
    }
    Ok(rows)
}

pub fn emit_metrics(rows: &[MetricsRow], dir: &Path) -> Result<(), CliError> {
    write_metrics_csv(rows, &dir.join("metrics.csv"))?;
    let table = format_metrics_table(rows);
    std::fs::write(dir.join("metrics.txt"), &table)?;
    print!("{table}");
    Ok(())
}
