use alloc::vec::Vec;

use num_traits::Float;

use super::{Param, Tensor};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub base_lr: f64,
    /// Learning rate halves every this many epochs.
    pub halve_every: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 0.01,
            halve_every: 10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 20,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

/// Step-decay schedule: base_lr * 0.5^(epoch / halve_every).
pub fn lr_at(cfg: &TrainConfig, epoch: u32) -> f64 {
    cfg.base_lr * 0.5f64.powi((epoch / cfg.halve_every) as i32)
}

/// One Adam update on a single parameter vector, bias-corrected moments:
///   m' = b1*m + (1-b1)*g,  v' = b2*v + (1-b2)*g^2
///   p -= lr * (m'/(1-b1^t)) / (sqrt(v'/(1-b2^t)) + eps)
pub fn adam_update<F: Float>(
    param: &mut [F],
    grad: &[F],
    m: &mut [F],
    v: &mut [F],
    t: u64,
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
) {
    assert!(t >= 1);
    let one = F::one();
    let bc1 = one - beta1.powi(t as i32);
    let bc2 = one - beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (one - beta1) * g;
        v[i] = beta2 * v[i] + (one - beta2) * g * g;
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        param[i] = param[i] - lr * mhat / (vhat.sqrt() + eps);
    }
}

/// Adam state for a model whose parameters are visited in a fixed order.
/// `begin_step` advances the shared timestep; `step_param` must then be
/// called once per parameter with a stable index.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    beta1: F,
    beta2: F,
    eps: F,
    t: u64,
    slots: Vec<(Tensor<F>, Tensor<F>)>,
}

impl<F: Float> Adam<F> {
    pub fn new(cfg: &TrainConfig) -> Self {
        Adam {
            beta1: F::from(cfg.beta1).unwrap(),
            beta2: F::from(cfg.beta2).unwrap(),
            eps: F::from(cfg.eps).unwrap(),
            t: 0,
            slots: Vec::new(),
        }
    }

    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    pub fn step_param(&mut self, index: usize, param: &mut Param<F>, lr: F) {
        assert!(self.t >= 1, "step_param before begin_step");
        while self.slots.len() <= index {
            self.slots.push((Tensor::zeros(&[0]), Tensor::zeros(&[0])));
        }
        let slot = &mut self.slots[index];
        if slot.0.numel() != param.value.numel() {
            slot.0 = Tensor::zeros(&param.value.shape[..]);
            slot.1 = Tensor::zeros(&param.value.shape[..]);
        }
        adam_update(
            &mut param.value.data,
            &param.grad.data,
            &mut slot.0.data,
            &mut slot.1.data,
            self.t,
            lr,
            self.beta1,
            self.beta2,
            self.eps,
        );
    }
}
