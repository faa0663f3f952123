use std::io::Write;

use amp_core::anchoring::{train_anchored, train_vanilla, TrainTrace};
use amp_core::checkpoint;

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    let dir = super::ensure_out_dir(config)?;
    let prepared = super::prepare(config)?;
    let mut model = config.build_model()?;
    let sgd = config.sgd_config();

    let trace: TrainTrace = if config.model.anchored {
        train_anchored(
            &mut model,
            &prepared.train_features,
            &prepared.train_raw.labels,
            &sgd,
            &config.consistency_spec(),
        )?
    } else {
        train_vanilla(
            &mut model,
            &prepared.train_features,
            &prepared.train_raw.labels,
            &sgd,
        )?
    };

    let ckpt_path = dir.join("model.ckpt");
    checkpoint::save(&model, &ckpt_path)?;
    write_trace(&trace, &dir.join("training_trace.csv"))?;
    super::append_run_log(
        &dir,
        &format!(
            "train seed={} anchored={} epochs={} final_loss={:.6} final_acc={:.4}",
            config.seed,
            config.model.anchored,
            sgd.epochs,
            trace.epoch_loss.last().copied().unwrap_or(f64::NAN),
            trace.epoch_accuracy.last().copied().unwrap_or(f64::NAN),
        ),
    )?;
    println!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

fn write_trace(trace: &TrainTrace, path: &std::path::Path) -> Result<(), CliError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# amp-train-trace-v1")?;
    writeln!(out, "epoch,loss,accuracy")?;
    for (e, (loss, acc)) in trace
        .epoch_loss
        .iter()
        .zip(&trace.epoch_accuracy)
        .enumerate()
    {
        writeln!(out, "{e},{loss},{acc}")?;
    }
    Ok(())
}
