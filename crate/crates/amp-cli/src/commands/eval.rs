use std::path::Path;

use amp_core::checkpoint;
use amp_core::scoring::{
    score_dataset_vanilla, score_with_anchors, sample_anchors, write_scores_csv, ScoreRecord,
    ScoredSample,
};
use amp_core::Tensor2D;

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn run(config: &ExperimentConfig, checkpoint_path: Option<&Path>) -> Result<(), CliError> {
    let dir = super::ensure_out_dir(config)?;
    let default_ckpt = dir.join("model.ckpt");
    let ckpt = checkpoint_path.unwrap_or(&default_ckpt);
    if !ckpt.exists() {
        return Err(CliError::Runtime(format!(
            "checkpoint {} not found (run `amp train` first or pass --checkpoint)",
            ckpt.display()
        )));
    }
    let model = checkpoint::load(ckpt)?;
    super::check_architecture(&model, config)?;

    let prepared = super::prepare(config)?;
    let ood_features = config.generate_ood(&prepared.test_raw.features, &prepared.normalizer)?;

    let (id_scores, ood_scores) =
        score_both(config, &model, &prepared.train_features, &prepared.test_features, &ood_features)?;

    let mut records = Vec::with_capacity(id_scores.len() + ood_scores.len());
    for (i, sample) in id_scores.iter().enumerate() {
        records.push(ScoreRecord {
            sample_id: i,
            label: prepared.test_raw.labels[i] as i64,
            is_ood: false,
            sample: sample.clone(),
        });
    }
    for (i, sample) in ood_scores.iter().enumerate() {
        records.push(ScoreRecord {
            sample_id: id_scores.len() + i,
            label: -1,
            is_ood: true,
            sample: sample.clone(),
        });
    }
    write_scores_csv(&records, &dir.join("scores.csv"))?;

    let rows = super::metric_rows(&id_scores, &ood_scores)?;
    super::emit_metrics(&rows, &dir)?;
    super::append_run_log(
        &dir,
        &format!(
            "eval seed={} k={} mode={} n_id={} n_ood={}",
            config.seed,
            config.inference.k_anchors,
            config.inference.temperature_mode,
            id_scores.len(),
            ood_scores.len()
        ),
    )?;
    Ok(())
}

/// Score ID test and OOD features with one fixed anchor draw (anchored
/// models) or plain forward passes (vanilla models).
pub fn score_both(
    config: &ExperimentConfig,
    model: &amp_core::nn::MlpModel,
    anchor_pool: &Tensor2D,
    id_features: &Tensor2D,
    ood_features: &Tensor2D,
) -> Result<(Vec<ScoredSample>, Vec<ScoredSample>), CliError> {
    if config.model.anchored {
        let anchors = sample_anchors(anchor_pool, config.inference.k_anchors, config.seed)?;
        let mode = config.temperature_mode();
        Ok((
            score_with_anchors(model, id_features, &anchors, mode)?,
            score_with_anchors(model, ood_features, &anchors, mode)?,
        ))
    } else {
        Ok((
            score_dataset_vanilla(model, id_features)?,
            score_dataset_vanilla(model, ood_features)?,
        ))
    }
}
