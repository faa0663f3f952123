//! SGD with classic momentum, L2 weight decay, and a step LR schedule.

use crate::error::{AmpError, Result};
use crate::nn::mlp::{Gradients, MlpModel};
use crate::tensor::Tensor2D;

/// Optimizer and training-loop hyperparameters.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// `(epoch, multiplier)` pairs; the learning rate is multiplied when
    /// the given (0-based) epoch begins.
    pub schedule: Vec<(usize, f64)>,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(AmpError::InvalidArgument(format!(
                "lr must be > 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(AmpError::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.schedule.iter().any(|&(_, m)| !(m > 0.0)) {
            return Err(AmpError::InvalidArgument(
                "schedule multipliers must be > 0".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(AmpError::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Momentum buffers plus the current (schedule-adjusted) learning rate.
#[derive(Debug, Clone)]
pub struct SgdState {
    velocity_w: Vec<Tensor2D>,
    velocity_b: Vec<Tensor2D>,
    lr: f64,
}

impl SgdState {
    pub fn new(model: &MlpModel, config: &SgdConfig) -> Self {
        let velocity_w = (0..model.num_layers())
            .map(|l| Tensor2D::zeros(model.weight(l).rows(), model.weight(l).cols()))
            .collect();
        let velocity_b = (0..model.num_layers())
            .map(|l| Tensor2D::zeros(1, model.bias(l).cols()))
            .collect();
        Self {
            velocity_w,
            velocity_b,
            lr: config.lr,
        }
    }

    pub fn current_lr(&self) -> f64 {
        self.lr
    }

    /// Apply every schedule entry registered for `epoch`.
    pub fn start_epoch(&mut self, epoch: usize, config: &SgdConfig) {
        for &(e, m) in &config.schedule {
            if e == epoch {
                self.lr *= m;
            }
        }
    }
}

/// One update step:
/// `g = grad + wd * param; v = momentum * v + g; param -= lr * v`.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut SgdState,
    config: &SgdConfig,
) -> Result<()> {
    if grads.weights.len() != model.num_layers() || grads.biases.len() != model.num_layers() {
        return Err(AmpError::ShapeMismatch {
            context: "sgd_step",
            expected: format!("{} layers", model.num_layers()),
            actual: format!("{}/{} layers", grads.weights.len(), grads.biases.len()),
        });
    }
    let lr = state.lr;
    let (weights, biases) = model.params_mut();
    for l in 0..weights.len() {
        update_tensor(
            &mut weights[l],
            &grads.weights[l],
            &mut state.velocity_w[l],
            lr,
            config.momentum,
            config.weight_decay,
        )?;
        // Biases are exempt from weight decay.
        update_tensor(
            &mut biases[l],
            &grads.biases[l],
            &mut state.velocity_b[l],
            lr,
            config.momentum,
            0.0,
        )?;
    }
    Ok(())
}

fn update_tensor(
    param: &mut Tensor2D,
    grad: &Tensor2D,
    velocity: &mut Tensor2D,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if param.rows() != grad.rows() || param.cols() != grad.cols() {
        return Err(AmpError::ShapeMismatch {
            context: "sgd_step gradient",
            expected: format!("{}x{}", param.rows(), param.cols()),
            actual: format!("{}x{}", grad.rows(), grad.cols()),
        });
    }
    let p = param.data_mut();
    let v = velocity.data_mut();
    for ((p, v), &g) in p.iter_mut().zip(v.iter_mut()).zip(grad.data()) {
        let g = g + weight_decay * *p;
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Activation;

    fn config(lr: f64, momentum: f64, weight_decay: f64) -> SgdConfig {
        SgdConfig {
            lr,
            momentum,
            weight_decay,
            schedule: vec![],
            epochs: 1,
            batch_size: 1,
            shuffle_seed: 0,
        }
    }

    fn constant_grads(model: &MlpModel, value: f64) -> Gradients {
        Gradients {
            weights: (0..model.num_layers())
                .map(|l| {
                    Tensor2D::zeros(model.weight(l).rows(), model.weight(l).cols())
                        .map(|_| value)
                })
                .collect(),
            biases: (0..model.num_layers())
                .map(|l| Tensor2D::zeros(1, model.bias(l).cols()).map(|_| value))
                .collect(),
        }
    }

    #[test]
    fn plain_step_subtracts_gradient() {
        let mut m = MlpModel::zeros(&[2, 2], Activation::Relu).unwrap();
        let cfg = config(1.0, 0.0, 0.0);
        let mut state = SgdState::new(&m, &cfg);
        let g = constant_grads(&m, 0.25);
        sgd_step(&mut m, &g, &mut state, &cfg).unwrap();
        assert!(m.weight(0).data().iter().all(|&w| w == -0.25));
    }

    #[test]
    fn momentum_second_delta_is_one_point_nine_g() {
        // v1 = g, delta1 = g; v2 = 0.9 g + g = 1.9 g, delta2 = 1.9 g.
        let mut m = MlpModel::zeros(&[1, 1], Activation::Relu).unwrap();
        let cfg = config(1.0, 0.9, 0.0);
        let mut state = SgdState::new(&m, &cfg);
        let g = constant_grads(&m, 2.0);
        sgd_step(&mut m, &g, &mut state, &cfg).unwrap();
        let after_first = m.weight(0).get(0, 0);
        assert!((after_first - (-2.0)).abs() < 1e-15);
        sgd_step(&mut m, &g, &mut state, &cfg).unwrap();
        let second_delta = m.weight(0).get(0, 0) - after_first;
        assert!((second_delta - (-1.9 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_adds_param_to_gradient() {
        let mut m = MlpModel::zeros(&[1, 1], Activation::Relu).unwrap();
        m.set_params(
            vec![Tensor2D::new(1, 1, vec![2.0]).unwrap()],
            vec![Tensor2D::zeros(1, 1)],
        );
        let cfg = config(0.5, 0.0, 0.1);
        let mut state = SgdState::new(&m, &cfg);
        let g = constant_grads(&m, 1.0);
        sgd_step(&mut m, &g, &mut state, &cfg).unwrap();
        // g_eff = 1 + 0.1 * 2 = 1.2; param = 2 - 0.5 * 1.2 = 1.4
        assert!((m.weight(0).get(0, 0) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn schedule_scales_lr_at_listed_epoch() {
        let m = MlpModel::zeros(&[1, 1], Activation::Relu).unwrap();
        let mut cfg = config(1.0, 0.0, 0.0);
        cfg.schedule = vec![(2, 0.2)];
        let mut state = SgdState::new(&m, &cfg);
        state.start_epoch(0, &cfg);
        state.start_epoch(1, &cfg);
        assert_eq!(state.current_lr(), 1.0);
        state.start_epoch(2, &cfg);
        assert!((state.current_lr() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_bad_hyperparameters() {
        assert!(config(0.0, 0.0, 0.0).validate().is_err());
        assert!(config(0.1, 1.0, 0.0).validate().is_err());
        assert!(config(0.1, -0.1, 0.0).validate().is_err());
        let mut c = config(0.1, 0.5, 0.0);
        c.schedule = vec![(3, 0.0)];
        assert!(c.validate().is_err());
        c.schedule = vec![(3, 0.5)];
        assert!(c.validate().is_ok());
    }
}
