//! Anchored training: the coordinate transform `x -> [c, x - c]`, in-batch
//! anchor shuffling, the consistency transform applied to anchors on a
//! schedule, and the training loops (anchored and vanilla baseline).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AmpError, Result};
use crate::nn::mlp::{argmax, Gradients, MlpModel};
use crate::nn::optim::{sgd_step, SgdConfig, SgdState};
use crate::seeding;
use crate::tensor::Tensor2D;

/// A mini-batch in anchored coordinates.
///
/// `concatenated[i] = anchors[i] ++ residuals[i]`, and residuals are always
/// computed against the un-transformed anchor: only the anchor half may be
/// perturbed by a consistency transform.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredBatch {
    pub anchors: Tensor2D,
    pub residuals: Tensor2D,
    pub concatenated: Tensor2D,
    pub labels: Vec<usize>,
}

/// One anchor perturbation. Transforms compose in declared list order.
#[derive(Debug, Clone, PartialEq)]
pub enum AnchorTransform {
    GaussianNoise { sigma: f64 },
    RandomScale { lo: f64, hi: f64 },
    RandomMask { p: f64 },
    Identity,
}

impl AnchorTransform {
    fn validate(&self) -> Result<()> {
        match *self {
            AnchorTransform::GaussianNoise { sigma } if sigma < 0.0 => Err(
                AmpError::InvalidArgument(format!("gaussian_noise sigma must be >= 0, got {sigma}")),
            ),
            AnchorTransform::RandomScale { lo, hi } if !(lo > 0.0 && hi >= lo) => {
                Err(AmpError::InvalidArgument(format!(
                    "random_scale needs 0 < lo <= hi, got [{lo}, {hi}]"
                )))
            }
            AnchorTransform::RandomMask { p } if !(0.0..=1.0).contains(&p) => Err(
                AmpError::InvalidArgument(format!("random_mask p must be in [0, 1], got {p}")),
            ),
            _ => Ok(()),
        }
    }

    /// Apply to one anchor matrix. Scale draws one factor per row; mask and
    /// noise act per element.
    fn apply(&self, anchors: &Tensor2D, rng: &mut ChaCha8Rng) -> Tensor2D {
        match *self {
            AnchorTransform::Identity => anchors.clone(),
            AnchorTransform::GaussianNoise { sigma } => {
                if sigma == 0.0 {
                    return anchors.clone();
                }
                let mut data = Vec::with_capacity(anchors.rows() * anchors.cols());
                for &v in anchors.data() {
                    let g: f64 = StandardNormal.sample(rng);
                    data.push(v + sigma * g);
                }
                Tensor2D::from_raw(anchors.rows(), anchors.cols(), data)
            }
            AnchorTransform::RandomScale { lo, hi } => {
                let mut data = Vec::with_capacity(anchors.rows() * anchors.cols());
                for i in 0..anchors.rows() {
                    let s = if hi > lo { rng.random_range(lo..hi) } else { lo };
                    data.extend(anchors.row(i).iter().map(|&v| v * s));
                }
                Tensor2D::from_raw(anchors.rows(), anchors.cols(), data)
            }
            AnchorTransform::RandomMask { p } => {
                let mut data = Vec::with_capacity(anchors.rows() * anchors.cols());
                for &v in anchors.data() {
                    let keep = rng.random_range(0.0..1.0) >= p;
                    data.push(if keep { v } else { 0.0 });
                }
                Tensor2D::from_raw(anchors.rows(), anchors.cols(), data)
            }
        }
    }
}

/// Anchor-perturbation schedule: the transform list is applied to the anchor
/// half whenever the running batch index is a multiple of `apply_every`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencySpec {
    pub transforms: Vec<AnchorTransform>,
    pub apply_every: usize,
    pub rng_seed: u64,
}

impl ConsistencySpec {
    /// No perturbation ever (empty transform list).
    pub fn none() -> Self {
        Self {
            transforms: vec![],
            apply_every: 1,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.apply_every == 0 {
            return Err(AmpError::InvalidArgument(
                "apply_every must be >= 1".into(),
            ));
        }
        for t in &self.transforms {
            t.validate()?;
        }
        Ok(())
    }

    fn is_active(&self) -> bool {
        self.transforms
            .iter()
            .any(|t| !matches!(t, AnchorTransform::Identity))
    }
}

/// Pair every input with an anchor drawn by a seeded shuffle of
/// `anchor_source` rows; residual = input - anchor; concatenation order is
/// `[anchor, residual]`. If the source has fewer rows than the batch, the
/// shuffled assignment repeats cyclically.
pub fn make_anchored_batch(
    inputs: &Tensor2D,
    labels: &[usize],
    anchor_source: &Tensor2D,
    rng: &mut ChaCha8Rng,
) -> Result<AnchoredBatch> {
    if anchor_source.rows() == 0 {
        return Err(AmpError::InvalidArgument(
            "anchor source must have at least one row".into(),
        ));
    }
    if anchor_source.cols() != inputs.cols() {
        return Err(AmpError::ShapeMismatch {
            context: "make_anchored_batch",
            expected: format!("{} feature columns", inputs.cols()),
            actual: format!("{} feature columns", anchor_source.cols()),
        });
    }
    let mut order: Vec<usize> = (0..anchor_source.rows()).collect();
    order.shuffle(rng);
    let assignment: Vec<usize> = (0..inputs.rows())
        .map(|i| order[i % order.len()])
        .collect();
    let anchors = anchor_source.select_rows(&assignment);
    let residuals = inputs.sub(&anchors)?;
    let concatenated = anchors.hcat(&residuals)?;
    Ok(AnchoredBatch {
        anchors,
        residuals,
        concatenated,
        labels: labels.to_vec(),
    })
}

/// Re-encode with a transformed anchor half when the schedule fires;
/// otherwise return the batch unchanged. Residuals and labels are never
/// touched.
pub fn apply_consistency(
    batch: AnchoredBatch,
    spec: &ConsistencySpec,
    batch_index: usize,
    rng: &mut ChaCha8Rng,
) -> AnchoredBatch {
    if !spec.is_active() || spec.transforms.is_empty() || batch_index % spec.apply_every != 0 {
        return batch;
    }
    let mut anchors = batch.anchors.clone();
    for t in &spec.transforms {
        anchors = t.apply(&anchors, rng);
    }
    let concatenated = anchors
        .hcat(&batch.residuals)
        .expect("anchor/residual row counts agree");
    AnchoredBatch {
        anchors,
        residuals: batch.residuals,
        concatenated,
        labels: batch.labels,
    }
}

/// Per-epoch mean training loss and accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub epoch_loss: Vec<f64>,
    pub epoch_accuracy: Vec<f64>,
}

/// Train an anchored model: each mini-batch is re-encoded against a seeded
/// shuffle of itself, the consistency transform fires on its schedule, and
/// parameters follow SGD with momentum. Returns the per-epoch trace.
pub fn train_anchored(
    model: &mut MlpModel,
    features: &Tensor2D,
    labels: &[usize],
    sgd: &SgdConfig,
    spec: &ConsistencySpec,
) -> Result<TrainTrace> {
    sgd.validate()?;
    spec.validate()?;
    if model.input_dim() != 2 * features.cols() {
        return Err(AmpError::ShapeMismatch {
            context: "train_anchored",
            expected: format!("model input width {}", 2 * features.cols()),
            actual: format!("model input width {}", model.input_dim()),
        });
    }
    train_loop(model, features, labels, sgd, Some(spec))
}

/// Baseline loop on raw inputs (no anchoring).
pub fn train_vanilla(
    model: &mut MlpModel,
    features: &Tensor2D,
    labels: &[usize],
    sgd: &SgdConfig,
) -> Result<TrainTrace> {
    sgd.validate()?;
    if model.input_dim() != features.cols() {
        return Err(AmpError::ShapeMismatch {
            context: "train_vanilla",
            expected: format!("model input width {}", features.cols()),
            actual: format!("model input width {}", model.input_dim()),
        });
    }
    train_loop(model, features, labels, sgd, None)
}

// Tag constants for per-batch RNG streams derived from the shuffle seed.
const STREAM_EPOCH_ORDER: u64 = 0x10;
const STREAM_ANCHOR: u64 = 0x11;
const STREAM_TRANSFORM: u64 = 0x12;

fn train_loop(
    model: &mut MlpModel,
    features: &Tensor2D,
    labels: &[usize],
    sgd: &SgdConfig,
    spec: Option<&ConsistencySpec>,
) -> Result<TrainTrace> {
    let n = features.rows();
    if labels.len() != n || n == 0 {
        return Err(AmpError::ShapeMismatch {
            context: "train labels",
            expected: format!("{n} labels (nonzero)"),
            actual: format!("{} labels", labels.len()),
        });
    }
    let mut state = SgdState::new(model, sgd);
    let mut trace = TrainTrace {
        epoch_loss: Vec::with_capacity(sgd.epochs),
        epoch_accuracy: Vec::with_capacity(sgd.epochs),
    };
    // Running batch counter across epochs; drives the consistency schedule.
    let mut batch_counter = 0usize;
    for epoch in 0..sgd.epochs {
        state.start_epoch(epoch, sgd);
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_rng =
            seeding::rng_for(sgd.shuffle_seed, &[STREAM_EPOCH_ORDER, epoch as u64]);
        order.shuffle(&mut epoch_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(sgd.batch_size) {
            let inputs = features.select_rows(chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (grads, loss, preds): (Gradients, f64, Vec<usize>) = match spec {
                Some(spec) => {
                    let mut anchor_rng = seeding::rng_for(
                        sgd.shuffle_seed,
                        &[STREAM_ANCHOR, epoch as u64, batch_counter as u64],
                    );
                    let batch =
                        make_anchored_batch(&inputs, &batch_labels, &inputs, &mut anchor_rng)?;
                    let mut transform_rng = seeding::rng_for(
                        spec.rng_seed,
                        &[STREAM_TRANSFORM, epoch as u64, batch_counter as u64],
                    );
                    let batch = apply_consistency(batch, spec, batch_counter, &mut transform_rng);
                    let logits = model.forward(&batch.concatenated)?;
                    let preds = (0..logits.rows()).map(|i| argmax(logits.row(i))).collect();
                    let (grads, loss) = model.backward(&batch.concatenated, &batch.labels)?;
                    (grads, loss, preds)
                }
                None => {
                    let logits = model.forward(&inputs)?;
                    let preds = (0..logits.rows()).map(|i| argmax(logits.row(i))).collect();
                    let (grads, loss) = model.backward(&inputs, &batch_labels)?;
                    (grads, loss, preds)
                }
            };
            sgd_step(model, &grads, &mut state, sgd)?;
            loss_sum += loss * chunk.len() as f64;
            correct += preds
                .iter()
                .zip(&batch_labels)
                .filter(|(p, y)| p == y)
                .count();
            batch_counter += 1;
        }
        trace.epoch_loss.push(loss_sum / n as f64);
        trace.epoch_accuracy.push(correct as f64 / n as f64);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Activation;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn residuals_vanish_when_anchors_equal_inputs() {
        // Single-row source: the only possible assignment is that row, so
        // anchoring the row against itself must give a zero residual.
        let inputs = Tensor2D::new(1, 2, vec![0.3, -0.7]).unwrap();
        let batch = make_anchored_batch(&inputs, &[0], &inputs, &mut rng(1)).unwrap();
        assert_eq!(batch.residuals.data(), &[0.0, 0.0]);
        assert_eq!(batch.concatenated.row(0), &[0.3, -0.7, 0.0, 0.0]);
    }

    #[test]
    fn anchor_assignment_is_seed_deterministic() {
        let inputs = Tensor2D::from_rows(&(0..8).map(|i| vec![i as f64, 0.0]).collect::<Vec<_>>())
            .unwrap();
        let labels = vec![0; 8];
        let a = make_anchored_batch(&inputs, &labels, &inputs, &mut rng(5)).unwrap();
        let b = make_anchored_batch(&inputs, &labels, &inputs, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        let c = make_anchored_batch(&inputs, &labels, &inputs, &mut rng(6)).unwrap();
        assert_ne!(a.anchors, c.anchors);
    }

    #[test]
    fn single_row_source_anchors_everything_to_that_row() {
        let inputs = Tensor2D::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let source = Tensor2D::new(1, 2, vec![10.0, 20.0]).unwrap();
        let batch = make_anchored_batch(&inputs, &[0, 1, 0], &source, &mut rng(2)).unwrap();
        for i in 0..3 {
            assert_eq!(batch.anchors.row(i), &[10.0, 20.0]);
            assert_eq!(
                batch.residuals.row(i),
                &[inputs.get(i, 0) - 10.0, inputs.get(i, 1) - 20.0]
            );
        }
    }

    #[test]
    fn anchors_plus_residuals_reconstruct_inputs() {
        // Dyadic inputs: subtraction and re-addition are exact, so the
        // untransformed path reconstructs bitwise.
        let inputs = Tensor2D::from_rows(
            &(0..16)
                .map(|i| vec![i as f64 * 0.125 - 1.0, (i % 5) as f64 * 0.25, 0.5])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let labels = vec![0; 16];
        let batch = make_anchored_batch(&inputs, &labels, &inputs, &mut rng(7)).unwrap();
        for i in 0..16 {
            for j in 0..3 {
                let rebuilt = batch.anchors.get(i, j) + batch.residuals.get(i, j);
                assert_eq!(rebuilt.to_bits(), inputs.get(i, j).to_bits());
            }
        }
        // Arbitrary floats reconstruct to rounding error.
        let general = Tensor2D::from_rows(
            &(0..16)
                .map(|i| vec![(i as f64).sin(), (i as f64).cos(), i as f64 * 0.1])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let batch = make_anchored_batch(&general, &labels, &general, &mut rng(8)).unwrap();
        for i in 0..16 {
            for j in 0..3 {
                let rebuilt = batch.anchors.get(i, j) + batch.residuals.get(i, j);
                assert!((rebuilt - general.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let inputs = Tensor2D::new(2, 2, vec![1.0; 4]).unwrap();
        let source = Tensor2D::new(2, 3, vec![1.0; 6]).unwrap();
        assert!(make_anchored_batch(&inputs, &[0, 0], &source, &mut rng(0)).is_err());
    }

    #[test]
    fn schedule_gates_the_transform() {
        let inputs = Tensor2D::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let batch = make_anchored_batch(&inputs, &[0, 1], &inputs, &mut rng(3)).unwrap();
        let spec = ConsistencySpec {
            transforms: vec![AnchorTransform::GaussianNoise { sigma: 0.5 }],
            apply_every: 5,
            rng_seed: 9,
        };
        let untouched = apply_consistency(batch.clone(), &spec, 3, &mut rng(9));
        assert_eq!(untouched, batch);
        let transformed = apply_consistency(batch.clone(), &spec, 5, &mut rng(9));
        assert_ne!(transformed.anchors, batch.anchors);
        assert_eq!(transformed.residuals, batch.residuals);
        assert_eq!(transformed.labels, batch.labels);
        assert_eq!(
            &transformed.concatenated.row(0)[2..],
            &batch.concatenated.row(0)[2..]
        );
    }

    #[test]
    fn identity_and_degenerate_noise_change_nothing() {
        let inputs = Tensor2D::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let batch = make_anchored_batch(&inputs, &[0, 1], &inputs, &mut rng(3)).unwrap();
        let id_spec = ConsistencySpec {
            transforms: vec![AnchorTransform::Identity],
            apply_every: 1,
            rng_seed: 0,
        };
        assert_eq!(apply_consistency(batch.clone(), &id_spec, 0, &mut rng(0)), batch);
        let zero_noise = ConsistencySpec {
            transforms: vec![AnchorTransform::GaussianNoise { sigma: 0.0 }],
            apply_every: 1,
            rng_seed: 0,
        };
        assert_eq!(
            apply_consistency(batch.clone(), &zero_noise, 0, &mut rng(0)),
            batch
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_every = ConsistencySpec {
            transforms: vec![],
            apply_every: 0,
            rng_seed: 0,
        };
        assert!(bad_every.validate().is_err());
        let bad_scale = ConsistencySpec {
            transforms: vec![AnchorTransform::RandomScale { lo: -1.0, hi: 1.0 }],
            apply_every: 1,
            rng_seed: 0,
        };
        assert!(bad_scale.validate().is_err());
        let bad_mask = ConsistencySpec {
            transforms: vec![AnchorTransform::RandomMask { p: 1.5 }],
            apply_every: 1,
            rng_seed: 0,
        };
        assert!(bad_mask.validate().is_err());
    }

    #[test]
    fn one_class_dataset_reaches_full_accuracy_fast() {
        let features = Tensor2D::from_rows(
            &(0..32)
                .map(|i| vec![(i % 7) as f64 * 0.1, (i % 5) as f64 * 0.1])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let labels = vec![0usize; 32];
        let mut model = MlpModel::new(&[4, 16, 2], Activation::Relu, 3).unwrap();
        let sgd = SgdConfig {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            schedule: vec![],
            epochs: 5,
            batch_size: 8,
            shuffle_seed: 1,
        };
        let trace =
            train_anchored(&mut model, &features, &labels, &sgd, &ConsistencySpec::none())
                .unwrap();
        assert_eq!(*trace.epoch_accuracy.last().unwrap(), 1.0);
    }

    #[test]
    fn training_is_bit_identical_across_runs() {
        let features = Tensor2D::from_rows(
            &(0..24)
                .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..24).map(|i| i % 2).collect();
        let sgd = SgdConfig {
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            schedule: vec![(2, 0.2)],
            epochs: 4,
            batch_size: 6,
            shuffle_seed: 11,
        };
        let spec = ConsistencySpec {
            transforms: vec![
                AnchorTransform::GaussianNoise { sigma: 0.05 },
                AnchorTransform::RandomScale { lo: 0.9, hi: 1.1 },
            ],
            apply_every: 2,
            rng_seed: 5,
        };
        let mut m1 = MlpModel::new(&[4, 12, 2], Activation::Relu, 21).unwrap();
        let t1 = train_anchored(&mut m1, &features, &labels, &sgd, &spec).unwrap();
        let mut m2 = MlpModel::new(&[4, 12, 2], Activation::Relu, 21).unwrap();
        let t2 = train_anchored(&mut m2, &features, &labels, &sgd, &spec).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
    }
}
