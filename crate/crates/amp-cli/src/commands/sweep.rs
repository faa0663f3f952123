use std::io::Write;
use std::path::Path;

use amp_core::anchoring::{train_anchored, train_vanilla};
use amp_core::checkpoint;
use amp_core::datasets::{corrupt, CorruptionKind};
use amp_core::scoring::ScoredSample;
use amp_core::seeding;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const LEVELS: [u32; 5] = [1, 2, 3, 4, 5];
pub const HIST_BINS: usize = 40;

pub fn run(config: &ExperimentConfig, checkpoint_path: Option<&Path>) -> Result<(), CliError> {
    let dir = super::ensure_out_dir(config)?;
    let kind = CorruptionKind::parse(
        config
            .ood
            .as_ref()
            .and_then(|o| o.corruption.as_deref())
            .ok_or_else(|| {
                CliError::Config("sweep requires ood.corruption (kind = \"corruption\")".into())
            })?,
    )?;
    let prepared = super::prepare(config)?;
    let split = config.seeds();

    // Use the checkpoint when one exists; otherwise train in place.
    let default_ckpt = dir.join("model.ckpt");
    let ckpt = checkpoint_path.unwrap_or(&default_ckpt);
    let model = if ckpt.exists() {
        let m = checkpoint::load(ckpt)?;
        super::check_architecture(&m, config)?;
        m
    } else {
        let mut m = config.build_model()?;
        let sgd = config.sgd_config();
        if config.model.anchored {
            train_anchored(
                &mut m,
                &prepared.train_features,
                &prepared.train_raw.labels,
                &sgd,
                &config.consistency_spec(),
            )?;
        } else {
            train_vanilla(&mut m, &prepared.train_features, &prepared.train_raw.labels, &sgd)?;
        }
        m
    };

    let (id_scores, _) = super::eval::score_both(
        config,
        &model,
        &prepared.train_features,
        &prepared.test_features,
        &prepared.test_features,
    )?;

    let mut per_level: Vec<(u32, Vec<ScoredSample>)> = Vec::with_capacity(LEVELS.len());
    for level in LEVELS {
        let corrupted = corrupt(
            &prepared.test_raw.features,
            kind,
            level,
            seeding::derive(split.eval, &[0x0c, level as u64]),
        )?;
        let ood_features = prepared.normalizer.apply(&corrupted)?;
        let (_, ood_scores) = super::eval::score_both(
            config,
            &model,
            &prepared.train_features,
            &prepared.test_features,
            &ood_features,
        )?;
        per_level.push((level, ood_scores));
    }

    // Per-level metric table over every scoring rule.
    let metrics_path = dir.join("sweep_metrics.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
    writeln!(out, "# amp-sweep-metrics-v1")?;
    writeln!(out, "level,rule,fpr95,auroc,aupr_in,aupr_out,dtacc")?;
    for (level, ood_scores) in &per_level {
        for row in super::metric_rows(&id_scores, ood_scores)? {
            let m = &row.metrics;
            writeln!(
                out,
                "{level},{},{},{},{},{},{}",
                row.rule, m.fpr95, m.auroc, m.aupr_in, m.aupr_out, m.dtacc
            )?;
        }
    }
    drop(out);

    // AMP score histograms with bin edges shared across every population.
    let id_amp: Vec<f64> = id_scores.iter().map(|s| s.scores.amp).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in id_amp
        .iter()
        .chain(per_level.iter().flat_map(|(_, s)| s.iter().map(|x| &x.scores.amp)))
    {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let hist_path = dir.join("sweep_histograms.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&hist_path)?);
    writeln!(out, "# amp-sweep-hist-v1")?;
    writeln!(out, "population,bin_index,bin_lo,bin_hi,count")?;
    write_hist(&mut out, "id", &id_amp, lo, hi)?;
    for (level, scores) in &per_level {
        let vals: Vec<f64> = scores.iter().map(|s| s.scores.amp).collect();
        write_hist(&mut out, &format!("ood_level_{level}"), &vals, lo, hi)?;
    }
    drop(out);

    super::append_run_log(
        &dir,
        &format!("sweep seed={} corruption={} levels=1..5", config.seed, kind),
    )?;
    println!("sweep outputs written to {}", dir.display());
    Ok(())
}

fn write_hist(
    out: &mut impl Write,
    population: &str,
    values: &[f64],
    lo: f64,
    hi: f64,
) -> Result<(), CliError> {
    let mut counts = vec![0usize; HIST_BINS];
    let width = (hi - lo) / HIST_BINS as f64;
    for &v in values {
        let mut b = ((v - lo) / width) as usize;
        if b >= HIST_BINS {
            b = HIST_BINS - 1;
        }
        counts[b] += 1;
    }
    for (b, count) in counts.iter().enumerate() {
        let bin_lo = lo + b as f64 * width;
        let bin_hi = lo + (b + 1) as f64 * width;
        writeln!(out, "{population},{b},{bin_lo},{bin_hi},{count}")?;
    }
    Ok(())
}
