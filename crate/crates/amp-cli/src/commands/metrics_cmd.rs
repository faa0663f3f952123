use std::path::Path;

use amp_core::metrics::{all_metrics, MetricsRow, ScorePopulations};
use amp_core::scoring::{read_scores_csv, ScoreRule};

use crate::CliError;

/// Standalone metric computation from an existing score CSV.
pub fn run(scores_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let rows = read_scores_csv(scores_path)?;
    if rows.is_empty() {
        return Err(CliError::Runtime(format!(
            "score table {} has no rows",
            scores_path.display()
        )));
    }
    let mut metric_rows = Vec::with_capacity(ScoreRule::ALL.len());
    for rule in ScoreRule::ALL {
        let id: Vec<f64> = rows
            .iter()
            .filter(|(is_ood, _)| !is_ood)
            .map(|(_, s)| s.get(rule))
            .collect();
        let ood: Vec<f64> = rows
            .iter()
            .filter(|(is_ood, _)| *is_ood)
            .map(|(_, s)| s.get(rule))
            .collect();
        let pop = ScorePopulations::new(id, ood, rule.higher_is_id())?;
        metric_rows.push(MetricsRow {
            rule: rule.name().to_string(),
            metrics: all_metrics(&pop)?,
        });
    }
    let dir = match out {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            d.to_path_buf()
        }
        None => scores_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf(),
    };
    super::emit_metrics(&metric_rows, &dir)?;
    Ok(())
}
