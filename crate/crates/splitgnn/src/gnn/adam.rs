//! Bias-corrected Adam, split into per-block states so the two halves of
//! the model can live on different tiers. Stepping the full model with one
//! [`AdamState`] is arithmetically identical to stepping the two blocks
//! with separate states, because the update is coordinate-wise.

use ndarray::{Array1, Array2};

use super::{GnnModel, Layer1Grads, Layer1Part, Layer2Grads, Layer2Part, ModelGrads};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS_HAT: f64 = 1e-8;

fn update2(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: usize,
) {
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    });
}

fn update1(
    p: &mut Array1<f64>,
    g: &Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: usize,
) {
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    });
}

/// Adam state for the layer-1 block (weights, bias, batch-norm scale and
/// shift).
#[derive(Debug, Clone)]
pub struct Layer1Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub step_count: usize,
    m: Layer1Grads,
    v: Layer1Grads,
}

impl Layer1Adam {
    pub fn new(part: &Layer1Part) -> Self {
        let zeros = || Layer1Grads {
            w_self: Array2::zeros(part.layer.w_self.dim()),
            w_neigh: Array2::zeros(part.layer.w_neigh.dim()),
            bias: Array1::zeros(part.layer.bias.dim()),
            gamma: Array1::zeros(part.bn.gamma.dim()),
            beta: Array1::zeros(part.bn.beta.dim()),
        };
        Self {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps_hat: DEFAULT_EPS_HAT,
            step_count: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update. Masked weights have zero gradients and are re-masked
    /// afterwards, so they stay exactly zero.
    pub fn step(&mut self, part: &mut Layer1Part, grads: &Layer1Grads, lr: f64) {
        self.step_count += 1;
        let (t, b1, b2, e) = (self.step_count, self.beta1, self.beta2, self.eps_hat);
        update2(&mut part.layer.w_self, &grads.w_self, &mut self.m.w_self, &mut self.v.w_self, lr, b1, b2, e, t);
        update2(&mut part.layer.w_neigh, &grads.w_neigh, &mut self.m.w_neigh, &mut self.v.w_neigh, lr, b1, b2, e, t);
        update1(&mut part.layer.bias, &grads.bias, &mut self.m.bias, &mut self.v.bias, lr, b1, b2, e, t);
        update1(&mut part.bn.gamma, &grads.gamma, &mut self.m.gamma, &mut self.v.gamma, lr, b1, b2, e, t);
        update1(&mut part.bn.beta, &grads.beta, &mut self.m.beta, &mut self.v.beta, lr, b1, b2, e, t);
        part.layer.w_self = &part.layer.w_self * &part.layer.mask_self;
        part.layer.w_neigh = &part.layer.w_neigh * &part.layer.mask_neigh;
    }
}

/// Adam state for the layer-2 block.
#[derive(Debug, Clone)]
pub struct Layer2Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub step_count: usize,
    m: Layer2Grads,
    v: Layer2Grads,
}

impl Layer2Adam {
    pub fn new(part: &Layer2Part) -> Self {
        let zeros = || Layer2Grads {
            w_self: Array2::zeros(part.layer.w_self.dim()),
            w_neigh: Array2::zeros(part.layer.w_neigh.dim()),
            bias: Array1::zeros(part.layer.bias.dim()),
        };
        Self {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps_hat: DEFAULT_EPS_HAT,
            step_count: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, part: &mut Layer2Part, grads: &Layer2Grads, lr: f64) {
        self.step_count += 1;
        let (t, b1, b2, e) = (self.step_count, self.beta1, self.beta2, self.eps_hat);
        update2(&mut part.layer.w_self, &grads.w_self, &mut self.m.w_self, &mut self.v.w_self, lr, b1, b2, e, t);
        update2(&mut part.layer.w_neigh, &grads.w_neigh, &mut self.m.w_neigh, &mut self.v.w_neigh, lr, b1, b2, e, t);
        update1(&mut part.layer.bias, &grads.bias, &mut self.m.bias, &mut self.v.bias, lr, b1, b2, e, t);
        part.layer.w_self = &part.layer.w_self * &part.layer.mask_self;
        part.layer.w_neigh = &part.layer.w_neigh * &part.layer.mask_neigh;
    }
}

/// Full-model Adam: the two block states advanced in lockstep.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub l1: Layer1Adam,
    pub l2: Layer2Adam,
}

impl AdamState {
    pub fn new(model: &GnnModel) -> Self {
        Self { l1: Layer1Adam::new(&model.layer1), l2: Layer2Adam::new(&model.layer2) }
    }

    pub fn step(&mut self, model: &mut GnnModel, grads: &ModelGrads, lr: f64) {
        self.l1.step(&mut model.layer1, &grads.layer1, lr);
        self.l2.step(&mut model.layer2, &grads.layer2, lr);
    }
}
