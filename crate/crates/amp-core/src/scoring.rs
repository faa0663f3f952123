//! Anchor-marginalized inference with heteroscedastic temperature scaling,
//! the AMP score, and the logit-based baseline scores.
//!
//! For a test point `x` and anchors `c_1..c_K`, the model is evaluated on
//! every `[c_k, x - c_k]`. `H` is the per-class mean of the K logit vectors
//! and the temperature `tau` is the sum over classes of the standard
//! deviation of the sigmoid-activated logits across anchors. Calibrated
//! logits divide `H` by a temperature map chosen by [`TemperatureMode`].
//!
//! Reductions over the anchor dimension sort values first, so every
//! statistic is bitwise invariant under anchor permutation.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{AmpError, Result};
use crate::nn::functions::{logsumexp, sigmoid_scalar, softmax};
use crate::nn::mlp::{argmax, MlpModel};
use crate::seeding;
use crate::tensor::Tensor2D;

/// How the temperature turns into the calibration denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureMode {
    /// `H / max(tau, epsilon)`; the guard covers tau -> 0.
    Direct { epsilon: f64 },
    /// `H / (1 + exp(tau))`; the small-variance variant, default for small
    /// synthetic datasets.
    Softened,
}

impl TemperatureMode {
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn denominator(&self, tau: f64) -> f64 {
        match *self {
            TemperatureMode::Direct { epsilon } => tau.max(epsilon),
            TemperatureMode::Softened => 1.0 + tau.exp(),
        }
    }
}

/// The four scoring rules emitted for every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreRule {
    Amp,
    Msp,
    Entropy,
    Energy,
}

impl ScoreRule {
    pub const ALL: [ScoreRule; 4] = [
        ScoreRule::Amp,
        ScoreRule::Msp,
        ScoreRule::Entropy,
        ScoreRule::Energy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScoreRule::Amp => "amp",
            ScoreRule::Msp => "msp",
            ScoreRule::Entropy => "entropy",
            ScoreRule::Energy => "energy",
        }
    }

    /// Orientation contract for the metrics module: whether larger scores
    /// indicate in-distribution. Scores are always stored raw.
    pub fn higher_is_id(&self) -> bool {
        match self {
            ScoreRule::Amp | ScoreRule::Msp => true,
            ScoreRule::Entropy | ScoreRule::Energy => false,
        }
    }
}

impl fmt::Display for ScoreRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw values for all scoring rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSet {
    pub amp: f64,
    pub msp: f64,
    pub entropy: f64,
    pub energy: f64,
}

impl ScoreSet {
    pub fn get(&self, rule: ScoreRule) -> f64 {
        match rule {
            ScoreRule::Amp => self.amp,
            ScoreRule::Msp => self.msp,
            ScoreRule::Entropy => self.entropy,
            ScoreRule::Energy => self.energy,
        }
    }
}

/// Scored test sample: anchored statistics plus per-rule scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub mean_logits: Vec<f64>,
    pub temperature: f64,
    pub calibrated_logits: Vec<f64>,
    pub scores: ScoreSet,
    pub k_anchors: usize,
    pub pred_class: usize,
}

/// Mean logits `H` and temperature `tau` from a `(K x num_classes)` logit
/// matrix, one row per anchor. Population convention: variance divides by K.
pub fn anchor_logit_stats(per_anchor_logits: &Tensor2D) -> Result<(Vec<f64>, f64)> {
    let k = per_anchor_logits.rows();
    if k == 0 {
        return Err(AmpError::InvalidArgument(
            "need at least one anchor".into(),
        ));
    }
    let classes = per_anchor_logits.cols();
    let mut mean_logits = Vec::with_capacity(classes);
    let mut tau = 0.0;
    for j in 0..classes {
        let col: Vec<f64> = (0..k).map(|i| per_anchor_logits.get(i, j)).collect();
        mean_logits.push(canonical_mean(&col));
        let sig: Vec<f64> = col.iter().map(|&v| sigmoid_scalar(v)).collect();
        tau += canonical_pop_std(&sig);
    }
    Ok((mean_logits, tau))
}

/// Eq.-1 style inference for one input against K anchors, followed by
/// temperature calibration and scoring.
pub fn marginalized_inference(
    model: &MlpModel,
    input: &[f64],
    anchors: &Tensor2D,
    mode: TemperatureMode,
) -> Result<ScoredSample> {
    let d = anchors.cols();
    if input.len() != d {
        return Err(AmpError::ShapeMismatch {
            context: "marginalized_inference",
            expected: format!("input of length {d}"),
            actual: format!("length {}", input.len()),
        });
    }
    if anchors.rows() == 0 {
        return Err(AmpError::InvalidArgument("K must be >= 1".into()));
    }
    if model.input_dim() != 2 * d {
        return Err(AmpError::ShapeMismatch {
            context: "marginalized_inference model",
            expected: format!("input width {}", 2 * d),
            actual: format!("input width {}", model.input_dim()),
        });
    }
    let k = anchors.rows();
    let mut rows = Vec::with_capacity(k);
    for i in 0..k {
        let c = anchors.row(i);
        let mut row = Vec::with_capacity(2 * d);
        row.extend_from_slice(c);
        row.extend(input.iter().zip(c).map(|(x, a)| x - a));
        rows.push(row);
    }
    let batch = Tensor2D::from_rows(&rows)?;
    let logits = model.forward(&batch)?;
    let (mean_logits, tau) = anchor_logit_stats(&logits)?;
    Ok(finish_sample(mean_logits, tau, k, mode))
}

/// Score a model without anchoring: `H` is the single forward pass,
/// `tau = 0`, and calibrated logits equal the raw logits.
pub fn vanilla_inference(model: &MlpModel, input: &[f64]) -> Result<ScoredSample> {
    let batch = Tensor2D::from_rows(std::slice::from_ref(&input.to_vec()))?;
    let logits = model.forward(&batch)?;
    let mean_logits = logits.row(0).to_vec();
    let scores = ScoreSet {
        amp: amp_score(&mean_logits),
        ..baseline_score_set(&mean_logits)
    };
    Ok(ScoredSample {
        pred_class: argmax(&mean_logits),
        calibrated_logits: mean_logits.clone(),
        mean_logits,
        temperature: 0.0,
        scores,
        k_anchors: 1,
    })
}

fn finish_sample(
    mean_logits: Vec<f64>,
    tau: f64,
    k: usize,
    mode: TemperatureMode,
) -> ScoredSample {
    let denom = mode.denominator(tau);
    let calibrated_logits: Vec<f64> = mean_logits.iter().map(|&v| v / denom).collect();
    let scores = ScoreSet {
        amp: amp_score(&calibrated_logits),
        ..baseline_score_set(&mean_logits)
    };
    ScoredSample {
        pred_class: argmax(&mean_logits),
        mean_logits,
        temperature: tau,
        calibrated_logits,
        scores,
        k_anchors: k,
    }
}

/// AMP score: negative mean log-softmax of the calibrated logits, i.e.
/// `logsumexp(Hc) - mean(Hc)`. Minimum `ln N`, attained exactly when the
/// calibrated logits are class-uniform; higher means more in-distribution.
pub fn amp_score(calibrated_logits: &[f64]) -> f64 {
    let n = calibrated_logits.len() as f64;
    let lse = logsumexp(calibrated_logits);
    let mean: f64 = calibrated_logits.iter().sum::<f64>() / n;
    lse - mean
}

/// Baseline scores from the mean logits: maximum softmax probability,
/// predictive entropy, and energy (`-logsumexp`).
pub fn baseline_scores(mean_logits: &[f64]) -> (f64, f64, f64) {
    let t = Tensor2D::from_raw(1, mean_logits.len(), mean_logits.to_vec());
    let p = softmax(&t);
    let msp = p.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let entropy = -p
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum::<f64>();
    let energy = -logsumexp(mean_logits);
    (msp, entropy, energy)
}

fn baseline_score_set(mean_logits: &[f64]) -> ScoreSet {
    let (msp, entropy, energy) = baseline_scores(mean_logits);
    ScoreSet {
        amp: 0.0,
        msp,
        entropy,
        energy,
    }
}

/// Draw `k` anchors uniformly without replacement from the pool; one fixed
/// draw per evaluation run.
pub fn sample_anchors(pool: &Tensor2D, k: usize, seed: u64) -> Result<Tensor2D> {
    if k == 0 {
        return Err(AmpError::InvalidArgument("K must be >= 1".into()));
    }
    if pool.rows() < k {
        return Err(AmpError::InvalidArgument(format!(
            "anchor pool has {} rows, need K = {k}",
            pool.rows()
        )));
    }
    let mut indices: Vec<usize> = (0..pool.rows()).collect();
    let mut rng = seeding::rng_for(seed, &[seeding::ROLE_ANCHORS]);
    indices.shuffle(&mut rng);
    indices.truncate(k);
    Ok(pool.select_rows(&indices))
}

/// Score a whole feature matrix with one fixed anchor draw reused for every
/// sample. Empty inputs yield an empty table.
pub fn score_dataset(
    model: &MlpModel,
    features: &Tensor2D,
    anchor_pool: &Tensor2D,
    k: usize,
    mode: TemperatureMode,
    seed: u64,
) -> Result<Vec<ScoredSample>> {
    if anchor_pool.rows() == 0 {
        return Err(AmpError::InvalidArgument("anchor pool is empty".into()));
    }
    let anchors = sample_anchors(anchor_pool, k, seed)?;
    score_with_anchors(model, features, &anchors, mode)
}

/// Score against an explicit, already-drawn anchor set.
pub fn score_with_anchors(
    model: &MlpModel,
    features: &Tensor2D,
    anchors: &Tensor2D,
    mode: TemperatureMode,
) -> Result<Vec<ScoredSample>> {
    (0..features.rows())
        .map(|i| marginalized_inference(model, features.row(i), anchors, mode))
        .collect()
}

/// Score every row of `features` through a plain forward pass.
pub fn score_dataset_vanilla(model: &MlpModel, features: &Tensor2D) -> Result<Vec<ScoredSample>> {
    (0..features.rows())
        .map(|i| vanilla_inference(model, features.row(i)))
        .collect()
}

/// One row of the score table with its identity columns.
#[derive(Debug, Clone)]
pub struct ScoreRecord {
    pub sample_id: usize,
    /// Class label for ID rows; -1 for unlabeled OOD rows.
    pub label: i64,
    pub is_ood: bool,
    pub sample: ScoredSample,
}

pub const SCORES_CSV_SCHEMA: &str = "# amp-scores-v1";
pub const SCORES_CSV_HEADER: &str =
    "sample_id,label,is_ood,tau,amp,msp,entropy,energy,pred_class";

/// Emit the score table CSV. Header names are part of the contract.
pub fn write_scores_csv(records: &[ScoreRecord], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{SCORES_CSV_SCHEMA}")?;
    writeln!(out, "{SCORES_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.sample_id,
            r.label,
            u8::from(r.is_ood),
            r.sample.temperature,
            r.sample.scores.amp,
            r.sample.scores.msp,
            r.sample.scores.entropy,
            r.sample.scores.energy,
            r.sample.pred_class,
        )?;
    }
    Ok(())
}

/// Read back a score table written by [`write_scores_csv`]; returns
/// `(is_ood, per-rule scores)` rows.
pub fn read_scores_csv(path: &Path) -> Result<Vec<(bool, ScoreSet)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(2) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(AmpError::InvalidArgument(format!(
                "bad score row (expected 9 fields): {line}"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| AmpError::InvalidArgument(format!("bad number '{s}'")))
        };
        rows.push((
            f[2] == "1",
            ScoreSet {
                amp: parse(f[4])?,
                msp: parse(f[5])?,
                entropy: parse(f[6])?,
                energy: parse(f[7])?,
            },
        ));
    }
    Ok(rows)
}

/// Sum in ascending value order so the result is independent of input order.
fn canonical_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    sorted.iter().sum()
}

fn canonical_mean(values: &[f64]) -> f64 {
    canonical_sum(values) / values.len() as f64
}

/// Population standard deviation (divide by K), order-canonical.
fn canonical_pop_std(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = canonical_mean(values);
    let sq: Vec<f64> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
    (canonical_sum(&sq) / k).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Activation;

    fn toy_model(d: usize, classes: usize, seed: u64) -> MlpModel {
        MlpModel::new(&[2 * d, 16, classes], Activation::Relu, seed).unwrap()
    }

    #[test]
    fn identical_anchors_give_zero_tau_and_denominator_two() {
        let model = toy_model(2, 3, 4);
        let anchors = Tensor2D::from_rows(&vec![vec![0.5, -0.5]; 5]).unwrap();
        let s =
            marginalized_inference(&model, &[1.0, 2.0], &anchors, TemperatureMode::Softened)
                .unwrap();
        assert_eq!(s.temperature, 0.0);
        assert_eq!(TemperatureMode::Softened.denominator(0.0), 2.0);
        for (h, hc) in s.mean_logits.iter().zip(&s.calibrated_logits) {
            assert_eq!(*hc, h / 2.0);
        }
    }

    #[test]
    fn tau_matches_hand_computed_population_std() {
        // Two anchors, two classes: sigmoids {0.6, 0.4} and {0.8, 0.4}.
        // Population std: 0.1 and 0.2, so tau = 0.3.
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let rows = vec![
            vec![logit(0.6), logit(0.8)],
            vec![logit(0.4), logit(0.4)],
        ];
        let logits = Tensor2D::from_rows(&rows).unwrap();
        let (_, tau) = anchor_logit_stats(&logits).unwrap();
        assert!((tau - 0.3).abs() < 1e-12, "tau = {tau}");
    }

    #[test]
    fn anchor_permutation_is_bitwise_invariant() {
        let model = toy_model(2, 4, 9);
        let anchors = Tensor2D::from_rows(&[
            vec![0.1, 0.2],
            vec![-0.4, 0.9],
            vec![2.0, -1.0],
            vec![0.0, 0.3],
            vec![-1.2, 0.5],
        ])
        .unwrap();
        let permuted = anchors.select_rows(&[3, 0, 4, 2, 1]);
        let a = marginalized_inference(&model, &[0.7, -0.3], &anchors, TemperatureMode::Softened)
            .unwrap();
        let b = marginalized_inference(&model, &[0.7, -0.3], &permuted, TemperatureMode::Softened)
            .unwrap();
        assert_eq!(a.temperature.to_bits(), b.temperature.to_bits());
        for (x, y) in a.mean_logits.iter().zip(&b.mean_logits) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.scores.amp.to_bits(), b.scores.amp.to_bits());
        assert_eq!(a.scores.msp.to_bits(), b.scores.msp.to_bits());
        assert_eq!(a.scores.entropy.to_bits(), b.scores.entropy.to_bits());
        assert_eq!(a.scores.energy.to_bits(), b.scores.energy.to_bits());
    }

    #[test]
    fn amp_score_of_uniform_logits_is_ln_n() {
        let hc = vec![0.7; 10];
        assert!((amp_score(&hc) - 10f64.ln()).abs() < 1e-12);
        assert!((amp_score(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn amp_score_matches_hand_evaluation() {
        // softmax([10, 0]) ~ (0.9999546, 4.5398e-5);
        // score = -(ln p1 + ln p2)/2 = 5 + ln(1 + e^-10) ~ 5.0000454
        let score = amp_score(&[10.0, 0.0]);
        let p1 = 1.0 / (1.0 + (-10f64).exp());
        let p2 = (-10f64).exp() / (1.0 + (-10f64).exp());
        let expect = -(p1.ln() + p2.ln()) / 2.0;
        assert!((score - expect).abs() < 1e-12);
        assert!((score - 5.0000454).abs() < 1e-6);
    }

    #[test]
    fn amp_score_decreases_toward_ln_n_under_stronger_scaling() {
        let h = vec![3.0, -1.0, 0.5];
        let mut last = amp_score(&h);
        for denom in [2.0, 4.0, 8.0, 64.0, 1024.0] {
            let scaled: Vec<f64> = h.iter().map(|v| v / denom).collect();
            let s = amp_score(&scaled);
            assert!(s < last);
            assert!(s >= 3f64.ln() - 1e-15);
            last = s;
        }
    }

    #[test]
    fn baseline_scores_on_reference_points() {
        let (msp, entropy, energy) = baseline_scores(&[0.0, 0.0]);
        assert!((msp - 0.5).abs() < 1e-15);
        assert!((entropy - 2f64.ln()).abs() < 1e-12);
        assert!((energy + 2f64.ln()).abs() < 1e-12);

        let (msp, entropy, _) = baseline_scores(&[100.0, 0.0]);
        assert!(msp > 1.0 - 1e-12);
        assert!(entropy < 1e-10);
    }

    #[test]
    fn entropy_agrees_with_logsumexp_identity() {
        // entropy = logsumexp(H) - sum_i p_i H_i
        let cases = [
            vec![0.3, -1.2, 2.0, 0.7],
            vec![5.0, 5.0, 5.0],
            vec![-3.0, 0.0, 3.0],
        ];
        for h in cases {
            let (_, entropy, _) = baseline_scores(&h);
            let t = Tensor2D::from_raw(1, h.len(), h.clone());
            let p = softmax(&t);
            let alt = logsumexp(&h)
                - p.data()
                    .iter()
                    .zip(&h)
                    .map(|(pi, hi)| pi * hi)
                    .sum::<f64>();
            assert!((entropy - alt).abs() < 1e-10);
        }
    }

    #[test]
    fn softened_mode_bounds_calibrated_norm() {
        let model = toy_model(2, 3, 12);
        let anchors = Tensor2D::from_rows(&[
            vec![0.3, 0.1],
            vec![-0.2, 0.8],
            vec![1.0, -0.5],
        ])
        .unwrap();
        let s = marginalized_inference(&model, &[0.4, 0.6], &anchors, TemperatureMode::Softened)
            .unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&s.calibrated_logits) <= norm(&s.mean_logits) / 2.0 + 1e-15);
        assert_eq!(s.pred_class, argmax(&s.calibrated_logits));
    }

    #[test]
    fn direct_mode_guards_zero_temperature() {
        let mode = TemperatureMode::Direct {
            epsilon: TemperatureMode::DEFAULT_EPSILON,
        };
        assert_eq!(mode.denominator(0.0), 1e-6);
        assert_eq!(mode.denominator(0.5), 0.5);
    }

    #[test]
    fn k_zero_is_rejected_and_k_one_gives_zero_tau() {
        let model = toy_model(2, 2, 3);
        let empty = Tensor2D::zeros(0, 2);
        assert!(
            marginalized_inference(&model, &[0.1, 0.2], &empty, TemperatureMode::Softened)
                .is_err()
        );
        let one = Tensor2D::from_rows(&[vec![0.4, -0.1]]).unwrap();
        let s = marginalized_inference(&model, &[0.1, 0.2], &one, TemperatureMode::Softened)
            .unwrap();
        assert_eq!(s.temperature, 0.0);
        assert_eq!(s.k_anchors, 1);
    }

    #[test]
    fn score_dataset_is_deterministic_and_size_checked() {
        let model = toy_model(2, 2, 8);
        let pool =
            Tensor2D::from_rows(&(0..10).map(|i| vec![i as f64 * 0.1, 0.5]).collect::<Vec<_>>())
                .unwrap();
        let feats = Tensor2D::from_rows(&[vec![0.2, 0.3], vec![-1.0, 0.4]]).unwrap();
        let a = score_dataset(&model, &feats, &pool, 5, TemperatureMode::Softened, 42).unwrap();
        let b = score_dataset(&model, &feats, &pool, 5, TemperatureMode::Softened, 42).unwrap();
        assert_eq!(a, b);
        let empty = Tensor2D::zeros(0, 2);
        assert_eq!(
            score_dataset(&model, &empty, &pool, 5, TemperatureMode::Softened, 42)
                .unwrap()
                .len(),
            0
        );
        assert!(score_dataset(&model, &feats, &pool, 11, TemperatureMode::Softened, 42).is_err());
        assert!(score_dataset(&model, &feats, &pool, 0, TemperatureMode::Softened, 42).is_err());
    }

    #[test]
    fn scores_csv_round_trips() {
        let model = toy_model(2, 2, 8);
        let pool = Tensor2D::from_rows(&(0..6).map(|i| vec![i as f64, 1.0]).collect::<Vec<_>>())
            .unwrap();
        let feats = Tensor2D::from_rows(&[vec![0.2, 0.3], vec![5.0, -4.0]]).unwrap();
        let samples =
            score_dataset(&model, &feats, &pool, 3, TemperatureMode::Softened, 1).unwrap();
        let records: Vec<ScoreRecord> = samples
            .into_iter()
            .enumerate()
            .map(|(i, sample)| ScoreRecord {
                sample_id: i,
                label: if i == 0 { 1 } else { -1 },
                is_ood: i != 0,
                sample,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_scores_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1) == Some(SCORES_CSV_HEADER));
        let rows = read_scores_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(!rows[0].0);
        assert!(rows[1].0);
        assert_eq!(rows[0].1.amp, records[0].sample.scores.amp);
    }
}
