use std::io::Write;
use std::path::Path;

use amp_core::datasets;
use amp_core::ntk::{
    anchored_kernel, build_gram, empirical_convergence, grid_2d, kernel_spectrum, ntk_kernel,
    sample_unit_vectors, toy_anchor_demo, unit_circle_grid, AnchoredKernelMode, KernelProvenance,
    NtkRegressor,
};
use amp_core::seeding;
use amp_core::Tensor2D;

use crate::config::{ExperimentConfig, NtkConfig};
use crate::CliError;

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    let dir = super::ensure_out_dir(config)?;
    let ntk = config.ntk.clone().unwrap_or_else(default_ntk);
    let split = config.seeds();

    // Spectra: vanilla vs anchored on the unit-circle grid.
    let grid = unit_circle_grid(ntk.grid_points);
    let vanilla = build_gram(&grid, ntk_kernel, KernelProvenance::Analytic, None)?;
    write_spectrum(&kernel_spectrum(&vanilla)?, &dir.join("spectrum_vanilla.csv"))?;

    let c = anchor_vector(ntk.anchor_scale, seeding::derive(split.eval, &[0x21]))?;
    let anchored = build_gram(
        &grid,
        |a, b| anchored_kernel(a, b, &c, AnchoredKernelMode::Exact),
        KernelProvenance::AnchoredExact,
        Some(c.clone()),
    )?;
    write_spectrum(&kernel_spectrum(&anchored)?, &dir.join("spectrum_anchored.csv"))?;

    // Width-convergence report for the Monte-Carlo estimate.
    let convergence = empirical_convergence(
        &ntk.widths,
        4,
        ntk.pairs,
        ntk.seeds_per_width,
        seeding::derive(split.eval, &[0x22]),
    )?;
    let conv_path = dir.join("convergence.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&conv_path)?);
    writeln!(out, "# amp-ntk-convergence-v1")?;
    writeln!(out, "width,mean_rel_error")?;
    for (w, e) in &convergence {
        writeln!(out, "{w},{e}")?;
    }
    drop(out);

    // Toy decision maps: per-anchor kernel-regression predictions on a small
    // two-class set, plus the pointwise disagreement map.
    let demo = datasets::gen_two_moons(
        ntk.demo_train_n,
        config.dataset.noise.unwrap_or(0.1),
        seeding::derive(split.data, &[0x23]),
    )?;
    let targets: Vec<f64> = demo
        .labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let anchors = amp_core::scoring::sample_anchors(&demo.features, ntk.demo_anchors, config.seed)?;
    let mut predictors: Vec<NtkRegressor> = Vec::with_capacity(ntk.demo_anchors);
    for a in 0..ntk.demo_anchors {
        let anchor: Vec<f64> = anchors.row(a).to_vec();
        predictors.push(NtkRegressor::fit(
            demo.features.clone(),
            &targets,
            |_| Ok(0.0),
            move |x, y| anchored_kernel(x, y, &anchor, AnchoredKernelMode::Exact),
            1e-8,
        )?);
    }
    let map_grid = grid_2d(-2.0, 3.0, -1.75, 2.25, ntk.demo_grid, ntk.demo_grid);
    let maps = toy_anchor_demo(ntk.demo_anchors, &map_grid, |a, p| predictors[a].predict(p))?;
    for (a, map) in maps.per_anchor.iter().enumerate() {
        write_map(&map_grid, map, &dir.join(format!("map_anchor_{a}.csv")))?;
    }
    write_map(&map_grid, &maps.std_map, &dir.join("std_map.csv"))?;

    super::append_run_log(
        &dir,
        &format!(
            "ntk seed={} grid_points={} widths={:?}",
            config.seed, ntk.grid_points, ntk.widths
        ),
    )?;
    println!("ntk artifacts written to {}", dir.display());
    Ok(())
}

fn default_ntk() -> NtkConfig {
    toml::from_str("").expect("all ntk fields have defaults")
}

/// A fixed random anchor with the requested norm.
fn anchor_vector(scale: f64, seed: u64) -> Result<Vec<f64>, CliError> {
    let dir = sample_unit_vectors(1, 2, seed)?;
    Ok(dir.row(0).iter().map(|v| v * scale).collect())
}

fn write_spectrum(eigenvalues: &[f64], path: &Path) -> Result<(), CliError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# amp-spectrum-v1")?;
    writeln!(out, "index,eigenvalue")?;
    for (i, e) in eigenvalues.iter().enumerate() {
        writeln!(out, "{i},{e}")?;
    }
    Ok(())
}

fn write_map(grid: &Tensor2D, values: &[f64], path: &Path) -> Result<(), CliError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# amp-map-v1")?;
    writeln!(out, "x,y,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{},{v}", grid.get(i, 0), grid.get(i, 1))?;
    }
    Ok(())
}
