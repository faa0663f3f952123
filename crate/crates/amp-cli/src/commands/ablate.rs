use std::io::Write;

use amp_core::anchoring::{train_anchored, AnchorTransform, ConsistencySpec};
use amp_core::metrics::{fpr95, ScorePopulations};
use amp_core::scoring::{sample_anchors, score_with_anchors, ScoreRule};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const K_GRID: [usize; 4] = [2, 5, 10, 20];
pub const TRANSFORM_SETS: [&str; 4] = ["none", "noise_scale", "mask", "all"];

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    if !config.model.anchored {
        return Err(CliError::Config(
            "ablate requires model.anchored = true".into(),
        ));
    }
    let dir = super::ensure_out_dir(config)?;
    let prepared = super::prepare(config)?;
    let ood_features = config.generate_ood(&prepared.test_raw.features, &prepared.normalizer)?;
    let sgd = config.sgd_config();
    let mode = config.temperature_mode();
    let k_max = *K_GRID.iter().max().unwrap();

    let mut matrix: Vec<(String, Vec<f64>)> = Vec::with_capacity(TRANSFORM_SETS.len());
    for set in TRANSFORM_SETS {
        let spec = transform_set(config, set);
        let mut model = config.build_model()?;
        train_anchored(
            &mut model,
            &prepared.train_features,
            &prepared.train_raw.labels,
            &sgd,
            &spec,
        )?;
        // One fixed draw of the largest anchor set; each K uses its prefix so
        // the comparison across K is matched.
        let anchors = sample_anchors(&prepared.train_features, k_max, config.seed)?;
        let mut row = Vec::with_capacity(K_GRID.len());
        for k in K_GRID {
            let prefix = anchors.select_rows(&(0..k).collect::<Vec<_>>());
            let id = score_with_anchors(&model, &prepared.test_features, &prefix, mode)?;
            let ood = score_with_anchors(&model, &ood_features, &prefix, mode)?;
            let pop = ScorePopulations::new(
                id.iter().map(|s| s.scores.get(ScoreRule::Amp)).collect(),
                ood.iter().map(|s| s.scores.get(ScoreRule::Amp)).collect(),
                ScoreRule::Amp.higher_is_id(),
            )?;
            row.push(fpr95(&pop)?);
        }
        matrix.push((set.to_string(), row));
    }

    let path = dir.join("ablation.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "# amp-ablation-v1")?;
    writeln!(out, "transform_set,k_2,k_5,k_10,k_20")?;
    for (set, row) in &matrix {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{set},{}", cells.join(","))?;
    }
    drop(out);
    super::append_run_log(&dir, &format!("ablate seed={}", config.seed))?;
    println!("ablation grid written to {}", path.display());
    Ok(())
}

/// The Table-8-shaped transform sets, parameterized by the config's
/// consistency section (falling back to library defaults when absent).
pub fn transform_set(config: &ExperimentConfig, name: &str) -> ConsistencySpec {
    let base = config.consistency_spec();
    let all = if base.transforms.is_empty() {
        vec![
            AnchorTransform::GaussianNoise { sigma: 0.1 },
            AnchorTransform::RandomScale { lo: 0.9, hi: 1.1 },
            AnchorTransform::RandomMask { p: 0.1 },
        ]
    } else {
        base.transforms.clone()
    };
    let transforms = match name {
        "none" => vec![],
        "noise_scale" => all
            .iter()
            .filter(|t| {
                matches!(
                    t,
                    AnchorTransform::GaussianNoise { .. } | AnchorTransform::RandomScale { .. }
                )
            })
            .cloned()
            .collect(),
        "mask" => all
            .iter()
            .filter(|t| matches!(t, AnchorTransform::RandomMask { .. }))
            .cloned()
            .collect(),
        _ => all,
    };
    ConsistencySpec {
        transforms,
        apply_every: base.apply_every,
        rng_seed: base.rng_seed,
    }
}
