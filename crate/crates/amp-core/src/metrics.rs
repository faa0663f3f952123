//! OOD detection metrics over two score populations: FPR at 95% TPR, AUROC,
//! AUPR (In/Out), and detection accuracy.
//!
//! Conventions (fixed so every metric is oracle-testable):
//! - scores are oriented internally so that higher means in-distribution;
//! - a sample is classified ID iff `score >= threshold`;
//! - AUROC ties contribute 0.5 (Mann-Whitney with midranks);
//! - DTACC uses equal priors, `0.5 * (TPR + TNR)`.

use std::path::Path;

use crate::error::{AmpError, Result};

/// ID and OOD score lists, stored oriented (higher = ID).
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePopulations {
    id: Vec<f64>,
    ood: Vec<f64>,
}

impl ScorePopulations {
    /// Validates both lists (nonempty, finite) and orients them so larger
    /// values indicate in-distribution.
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>, higher_is_id: bool) -> Result<Self> {
        if id_scores.is_empty() || ood_scores.is_empty() {
            return Err(AmpError::InvalidArgument(
                "both score populations must be nonempty".into(),
            ));
        }
        if id_scores
            .iter()
            .chain(&ood_scores)
            .any(|v| !v.is_finite())
        {
            return Err(AmpError::NonFinite("ScorePopulations::new"));
        }
        let orient = |mut v: Vec<f64>| {
            if !higher_is_id {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        };
        Ok(Self {
            id: orient(id_scores),
            ood: orient(ood_scores),
        })
    }

    pub fn id(&self) -> &[f64] {
        &self.id
    }

    pub fn ood(&self) -> &[f64] {
        &self.ood
    }
}

/// False-positive rate on OOD at the largest threshold whose ID true-positive
/// rate is at least `tpr_target`.
pub fn fpr_at_tpr(pop: &ScorePopulations, tpr_target: f64) -> Result<f64> {
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(AmpError::InvalidArgument(format!(
            "tpr_target must be in (0, 1], got {tpr_target}"
        )));
    }
    let mut id_desc = pop.id.clone();
    id_desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // Smallest ID count with TPR >= target; the m-th largest ID score is the
    // largest threshold achieving it under the `>=` classification rule.
    let m = (tpr_target * id_desc.len() as f64).ceil() as usize;
    let threshold = id_desc[m - 1];
    let fp = pop.ood.iter().filter(|&&s| s >= threshold).count();
    Ok(fp as f64 / pop.ood.len() as f64)
}

pub fn fpr95(pop: &ScorePopulations) -> Result<f64> {
    fpr_at_tpr(pop, 0.95)
}

/// Area under the ROC curve via the Mann-Whitney rank statistic; ties count
/// one half.
pub fn auroc(pop: &ScorePopulations) -> Result<f64> {
    let n_id = pop.id.len();
    let n_ood = pop.ood.len();
    let mut all: Vec<(f64, bool)> = pop
        .id
        .iter()
        .map(|&s| (s, true))
        .chain(pop.ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Midrank sum over the ID population.
    let mut id_rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        let ties_id = all[i..j].iter().filter(|(_, is_id)| *is_id).count();
        id_rank_sum += midrank * ties_id as f64;
        i = j;
    }
    let u = id_rank_sum - (n_id * (n_id + 1)) as f64 / 2.0;
    Ok(u / (n_id as f64 * n_ood as f64))
}

/// Which population counts as positive for precision-recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuprPositive {
    In,
    Out,
}

/// Step-interpolated area under the precision-recall curve. With
/// `positive = Out`, scores are negated and the roles swap.
pub fn aupr(pop: &ScorePopulations, positive: AuprPositive) -> Result<f64> {
    let (pos, neg): (Vec<f64>, Vec<f64>) = match positive {
        AuprPositive::In => (pop.id.clone(), pop.ood.clone()),
        AuprPositive::Out => (
            pop.ood.iter().map(|&s| -s).collect(),
            pop.id.iter().map(|&s| -s).collect(),
        ),
    };
    let total_pos = pos.len() as f64;
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut area = 0.0;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        for &(_, is_pos) in &all[i..j] {
            if is_pos {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        let recall = tp / total_pos;
        let precision = tp / (tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(area)
}

/// Maximum equal-prior detection accuracy `0.5 * (TPR + TNR)` over all
/// thresholds.
pub fn dtacc(pop: &ScorePopulations) -> Result<f64> {
    let n_id = pop.id.len() as f64;
    let n_ood = pop.ood.len() as f64;
    let mut all: Vec<(f64, bool)> = pop
        .id
        .iter()
        .map(|&s| (s, true))
        .chain(pop.ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // Threshold above every score: nothing classified ID.
    let mut best: f64 = 0.5;
    let mut id_ge = 0.0;
    let mut ood_ge = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        for &(_, is_id) in &all[i..j] {
            if is_id {
                id_ge += 1.0;
            } else {
                ood_ge += 1.0;
            }
        }
        let acc = 0.5 * (id_ge / n_id + (n_ood - ood_ge) / n_ood);
        best = best.max(acc);
        i = j;
    }
    Ok(best)
}

/// All five reported metrics for one scoring rule.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub fpr95: f64,
    pub auroc: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
    pub dtacc: f64,
}

pub fn all_metrics(pop: &ScorePopulations) -> Result<MetricsSummary> {
    Ok(MetricsSummary {
        fpr95: fpr95(pop)?,
        auroc: auroc(pop)?,
        aupr_in: aupr(pop, AuprPositive::In)?,
        aupr_out: aupr(pop, AuprPositive::Out)?,
        dtacc: dtacc(pop)?,
    })
}

/// A named metrics row (one scoring rule).
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub rule: String,
    pub metrics: MetricsSummary,
}

pub const METRICS_CSV_SCHEMA: &str = "# amp-metrics-v1";
pub const METRICS_CSV_HEADER: &str = "rule,fpr95,auroc,aupr_in,aupr_out,dtacc";

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{METRICS_CSV_SCHEMA}")?;
    writeln!(out, "{METRICS_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.rule,
            r.metrics.fpr95,
            r.metrics.auroc,
            r.metrics.aupr_in,
            r.metrics.aupr_out,
            r.metrics.dtacc
        )?;
    }
    Ok(())
}

/// Fixed-width text table for terminal output.
pub fn format_metrics_table(rows: &[MetricsRow]) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<10} {:>8} {:>8} {:>9} {:>9} {:>8}\n",
        "rule", "FPR95", "AUROC", "AUPR-In", "AUPR-Out", "DTACC"
    ));
    for r in rows {
        s.push_str(&format!(
            "{:<10} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>8.4}\n",
            r.rule,
            r.metrics.fpr95,
            r.metrics.auroc,
            r.metrics.aupr_in,
            r.metrics.aupr_out,
            r.metrics.dtacc
        ));
    }
    s
}
