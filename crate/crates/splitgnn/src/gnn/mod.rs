//! Two-layer mean-aggregating SAGE network with exact reverse-mode
//! gradients.
//!
//! Each layer updates a node from its own representation and the mean of
//! its active neighbors' representations:
//!
//! ```text
//! h_v' = (mask_self ⊙ W_self)ᵀ h_v
//!      + (mask_neigh ⊙ W_neigh)ᵀ mean{ h_u : u ∈ N(v) }
//!      + bias
//! ```
//!
//! with the zero vector standing in for the mean of an empty neighborhood.
//! Layer 1 is followed by batch normalization, ReLU and (in train mode)
//! inverted dropout; layer 2 emits raw logits. The layer-1 block and the
//! layer-2 block are separate parameter bundles ([`Layer1Part`],
//! [`Layer2Part`]) so the split protocol can place them on different
//! tiers while the monolithic path composes the exact same functions.
//!
//! Dropout is position-keyed: the mask for a node depends on (seed, epoch,
//! node id) only, so any partitioning of the nodes reproduces the same
//! masks. Batch-norm statistics in train mode are taken over the rows of
//! the current forward pass; running statistics serve eval mode.

mod adam;
mod checkpoint;
mod flops;
mod train;

pub use adam::{AdamState, Layer1Adam, Layer2Adam, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS_HAT};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use flops::{count_flops, count_flops_layer1, magnitude_prune_weights};
pub use train::{
    accuracy, train_monolithic, DataSplit, Precision, TrainConfig, TrainTrace,
};

use ndarray::{Array1, Array2, Axis};

use crate::graph::Graph;
use crate::rng::{self, SplitMix64};

#[derive(Debug, thiserror::Error)]
pub enum GnnError {
    #[error("feature dim {got} does not match model input dim {expected}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("activation matrix has {got} columns, expected hidden dim {expected}")]
    HiddenDimMismatch { expected: usize, got: usize },
    #[error("node mask is empty")]
    EmptyNodeMask,
    #[error("node {node} has label {label}, but the model has {classes} classes")]
    LabelOutOfRange { node: usize, label: usize, classes: usize },
    #[error("labels cover {got} nodes, expected {expected}")]
    LabelCount { expected: usize, got: usize },
    #[error("graph has no labels")]
    MissingLabels,
    #[error("flops target {target} is below the mask-independent floor {floor}")]
    TargetUnreachable { target: u64, floor: u64 },
    #[error("flops target ratio must be in (0, 1], got {0}")]
    InvalidTargetRatio(f64),
    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),
    #[error("checkpoint io: {0}")]
    CheckpointIo(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
}

/// Train/eval switch for the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One SAGE layer: self and neighbor transforms with per-weight binary
/// masks. Masked weights are kept at exactly zero; the effective parameter
/// is always `mask ⊙ W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub w_self: Array2<f64>,
    pub w_neigh: Array2<f64>,
    pub bias: Array1<f64>,
    pub mask_self: Array2<f64>,
    pub mask_neigh: Array2<f64>,
}

impl SageLayer {
    /// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero bias,
    /// all-ones masks. Entries are drawn row-major, `w_self` first.
    pub fn init(in_dim: usize, out_dim: usize, gen: &mut SplitMix64) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut draw = |_| gen.next_range(-bound, bound);
        let w_self = Array2::from_shape_fn((in_dim, out_dim), &mut draw);
        let w_neigh = Array2::from_shape_fn((in_dim, out_dim), &mut draw);
        Self {
            w_self,
            w_neigh,
            bias: Array1::zeros(out_dim),
            mask_self: Array2::ones((in_dim, out_dim)),
            mask_neigh: Array2::ones((in_dim, out_dim)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_self.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w_self.ncols()
    }

    pub fn effective_self(&self) -> Array2<f64> {
        &self.w_self * &self.mask_self
    }

    pub fn effective_neigh(&self) -> Array2<f64> {
        &self.w_neigh * &self.mask_neigh
    }

    pub fn nnz_self(&self) -> u64 {
        self.mask_self.iter().filter(|&&m| m != 0.0).count() as u64
    }

    pub fn nnz_neigh(&self) -> u64 {
        self.mask_neigh.iter().filter(|&&m| m != 0.0).count() as u64
    }
}

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    pub fn init(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }
}

/// The layer-1 block (transform + batch norm); lives client-side under the
/// split placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer1Part {
    pub layer: SageLayer,
    pub bn: BatchNorm,
}

/// The layer-2 block (classifier); lives server-side under the split
/// placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer2Part {
    pub layer: SageLayer,
}

/// The full two-layer model.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub layer1: Layer1Part,
    pub layer2: Layer2Part,
    pub dropout_rate: f64,
}

impl GnnModel {
    /// Seeded initialization; the draw order is layer1.w_self,
    /// layer1.w_neigh, layer2.w_self, layer2.w_neigh from one generator
    /// seeded with the init stream of `seed`.
    pub fn new(
        feature_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        dropout_rate: f64,
        seed: u64,
    ) -> Self {
        assert!((0.0..1.0).contains(&dropout_rate), "dropout rate must be in [0, 1)");
        let mut gen = SplitMix64::new(rng::derive_seed(seed, &[rng::stream::INIT]));
        let layer1 = SageLayer::init(feature_dim, hidden_dim, &mut gen);
        let layer2 = SageLayer::init(hidden_dim, num_classes, &mut gen);
        Self {
            layer1: Layer1Part { layer: layer1, bn: BatchNorm::init(hidden_dim) },
            layer2: Layer2Part { layer: layer2 },
            dropout_rate,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.layer1.layer.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer1.layer.out_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layer2.layer.out_dim()
    }

    /// Count of trainable parameters, dense (masks do not shrink it): both
    /// weight matrices and the bias of each layer, plus the batch-norm
    /// scale and shift.
    pub fn num_parameters(&self) -> usize {
        let l = |layer: &SageLayer| 2 * layer.in_dim() * layer.out_dim() + layer.out_dim();
        l(&self.layer1.layer) + 2 * self.hidden_dim() + l(&self.layer2.layer)
    }

    /// Round every parameter through f32 storage. Applied after init and
    /// after every optimizer step when training at float32 precision.
    pub fn quantize_f32(&mut self) {
        let q = |a: &mut Array2<f64>| a.mapv_inplace(|x| x as f32 as f64);
        let q1 = |a: &mut Array1<f64>| a.mapv_inplace(|x| x as f32 as f64);
        for part in [&mut self.layer1.layer, &mut self.layer2.layer] {
            q(&mut part.w_self);
            q(&mut part.w_neigh);
            q1(&mut part.bias);
        }
        q1(&mut self.layer1.bn.gamma);
        q1(&mut self.layer1.bn.beta);
        q1(&mut self.layer1.bn.running_mean);
        q1(&mut self.layer1.bn.running_var);
    }
}

/// Mean over active neighbors, rows aligned with `adj`; zero row for
/// isolated nodes.
pub fn aggregate_mean(adj: &[Vec<usize>], x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((adj.len(), x.ncols()));
    for (v, nbrs) in adj.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let inv = 1.0 / nbrs.len() as f64;
        for &u in nbrs {
            let mut dst = out.row_mut(v);
            dst += &x.row(u);
        }
        out.row_mut(v).mapv_inplace(|s| s * inv);
    }
    out
}

/// Adjoint of [`aggregate_mean`]: routes each row's cotangent back to the
/// neighbors it averaged.
pub fn aggregate_mean_transpose(adj: &[Vec<usize>], grad: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(grad.dim());
    for (v, nbrs) in adj.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let inv = 1.0 / nbrs.len() as f64;
        let g = grad.row(v).mapv(|x| x * inv);
        for &u in nbrs {
            let mut dst = out.row_mut(u);
            dst += &g;
        }
    }
    out
}

/// Everything the layer-1 backward pass needs.
#[derive(Debug, Clone)]
pub struct Layer1Cache {
    pub x: Array2<f64>,
    pub m1: Array2<f64>,
    pub mode: Mode,
    /// Statistics the normalization actually used (batch in train mode,
    /// running in eval), and whether they were batch statistics.
    pub bn_mean: Array1<f64>,
    pub bn_var: Array1<f64>,
    pub x_hat: Array2<f64>,
    pub relu_out: Array2<f64>,
    /// Inverted-dropout scale mask (0 or 1/(1-p)); `None` in eval mode.
    pub dropout_mask: Option<Array2<f64>>,
    pub h: Array2<f64>,
}

/// Layer-1 block forward: transform, batch norm, ReLU, dropout.
///
/// Pure; train-mode running-statistics updates are a separate explicit
/// step ([`bn_update_running`]). `node_ids` are the global ids of the rows
/// of `x`, used only to key dropout; `dropout_seed` should be derived per
/// epoch (see [`dropout_seed_for_epoch`]).
pub fn layer1_forward(
    part: &Layer1Part,
    adj: &[Vec<usize>],
    x: &Array2<f64>,
    node_ids: &[usize],
    mode: Mode,
    dropout_rate: f64,
    dropout_seed: u64,
) -> Result<(Array2<f64>, Layer1Cache), GnnError> {
    let layer = &part.layer;
    if x.ncols() != layer.in_dim() {
        return Err(GnnError::FeatureDimMismatch { expected: layer.in_dim(), got: x.ncols() });
    }
    let n = x.nrows();
    let m1 = aggregate_mean(adj, x);
    let h1_pre = x.dot(&layer.effective_self()) + m1.dot(&layer.effective_neigh()) + &layer.bias;

    // Normalization statistics: batch in train mode, running in eval.
    let (mean, var) = match mode {
        Mode::Train => {
            let mean = h1_pre.mean_axis(Axis(0)).expect("n > 0");
            let centered = &h1_pre - &mean;
            let var = centered.mapv(|c| c * c).mean_axis(Axis(0)).expect("n > 0");
            (mean, var)
        }
        Mode::Eval => (part.bn.running_mean.clone(), part.bn.running_var.clone()),
    };
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let x_hat = (&h1_pre - &mean) * &inv_std;
    let bn_out = &x_hat * &part.bn.gamma + &part.bn.beta;

    let relu_out = bn_out.mapv(|v| v.max(0.0));

    let (h, dropout_mask) = match mode {
        Mode::Train if dropout_rate > 0.0 => {
            let keep = 1.0 - dropout_rate;
            let mut mask = Array2::zeros((n, relu_out.ncols()));
            for (row, &id) in node_ids.iter().enumerate() {
                let mut gen = SplitMix64::new(rng::derive_seed(dropout_seed, &[id as u64]));
                for j in 0..relu_out.ncols() {
                    if gen.next_f64() >= dropout_rate {
                        mask[[row, j]] = 1.0 / keep;
                    }
                }
            }
            (&relu_out * &mask, Some(mask))
        }
        _ => (relu_out.clone(), None),
    };

    let cache = Layer1Cache {
        x: x.clone(),
        m1,
        mode,
        bn_mean: mean,
        bn_var: var,
        x_hat,
        relu_out,
        dropout_mask,
        h: h.clone(),
    };
    Ok((h, cache))
}

/// Fold the batch statistics of a train-mode forward into the running
/// statistics: `running ← (1-m)·running + m·batch` with momentum 0.1.
pub fn bn_update_running(bn: &mut BatchNorm, cache: &Layer1Cache) {
    debug_assert!(matches!(cache.mode, Mode::Train));
    bn.running_mean =
        &bn.running_mean * (1.0 - BN_MOMENTUM) + &cache.bn_mean * BN_MOMENTUM;
    bn.running_var = &bn.running_var * (1.0 - BN_MOMENTUM) + &cache.bn_var * BN_MOMENTUM;
}

/// The standard per-epoch dropout seed derivation shared by the monolithic
/// trainer and the split protocol.
pub fn dropout_seed_for_epoch(train_seed: u64, epoch: usize) -> u64 {
    rng::derive_seed(train_seed, &[rng::stream::DROPOUT, epoch as u64])
}

/// Layer-2 forward: SAGE transform of the layer-1 activations into raw
/// logits. Returns the aggregated activations too (the backward pass and
/// the FLOP counter reuse them).
pub fn layer2_forward(
    part: &Layer2Part,
    adj: &[Vec<usize>],
    h: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>), GnnError> {
    let layer = &part.layer;
    if h.ncols() != layer.in_dim() {
        return Err(GnnError::HiddenDimMismatch { expected: layer.in_dim(), got: h.ncols() });
    }
    let m2 = aggregate_mean(adj, h);
    let logits = h.dot(&layer.effective_self()) + m2.dot(&layer.effective_neigh()) + &layer.bias;
    Ok((logits, m2))
}

/// Full-model forward pass.
pub struct ForwardArtifacts {
    pub logits: Array2<f64>,
    pub cache1: Layer1Cache,
    pub m2: Array2<f64>,
}

/// Run layers 1 and 2 on the active subgraph. In train mode this also
/// folds the batch statistics into the running batch-norm state.
pub fn forward(
    model: &mut GnnModel,
    g: &Graph,
    mode: Mode,
    dropout_seed: u64,
) -> Result<ForwardArtifacts, GnnError> {
    let adj = g.adjacency();
    let ids: Vec<usize> = (0..g.num_nodes()).collect();
    let (h, cache1) = layer1_forward(
        &model.layer1,
        &adj,
        g.features(),
        &ids,
        mode,
        model.dropout_rate,
        dropout_seed,
    )?;
    if matches!(mode, Mode::Train) {
        bn_update_running(&mut model.layer1.bn, &cache1);
    }
    let (logits, m2) = layer2_forward(&model.layer2, &adj, &h)?;
    Ok(ForwardArtifacts { logits, cache1, m2 })
}

/// Deterministic eval-mode logits without mutating the model.
pub fn eval_logits(model: &GnnModel, g: &Graph) -> Result<Array2<f64>, GnnError> {
    let adj = g.adjacency();
    let ids: Vec<usize> = (0..g.num_nodes()).collect();
    let (h, _) = layer1_forward(
        &model.layer1,
        &adj,
        g.features(),
        &ids,
        Mode::Eval,
        model.dropout_rate,
        0,
    )?;
    let (logits, _) = layer2_forward(&model.layer2, &adj, &h)?;
    Ok(logits)
}

/// Gradients for the layer-1 block.
#[derive(Debug, Clone)]
pub struct Layer1Grads {
    pub w_self: Array2<f64>,
    pub w_neigh: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Gradients for the layer-2 block.
#[derive(Debug, Clone)]
pub struct Layer2Grads {
    pub w_self: Array2<f64>,
    pub w_neigh: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradient set for the full model. Masked weights always carry zero
/// gradient.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layer1: Layer1Grads,
    pub layer2: Layer2Grads,
}

/// Mean cross-entropy of softmax logits over the given nodes, plus the
/// logits cotangent (zero outside the node set).
pub fn softmax_ce_loss(
    logits: &Array2<f64>,
    labels: &[usize],
    nodes: &[usize],
) -> Result<(f64, Array2<f64>), GnnError> {
    if nodes.is_empty() {
        return Err(GnnError::EmptyNodeMask);
    }
    if labels.len() != logits.nrows() {
        return Err(GnnError::LabelCount { expected: logits.nrows(), got: labels.len() });
    }
    let classes = logits.ncols();
    let inv = 1.0 / nodes.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Array2::zeros(logits.dim());
    for &v in nodes {
        let y = labels[v];
        if y >= classes {
            return Err(GnnError::LabelOutOfRange { node: v, label: y, classes });
        }
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += (log_z - row[y]) * inv;
        for c in 0..classes {
            let p = (row[c] - log_z).exp();
            dlogits[[v, c]] = (p - if c == y { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((loss, dlogits))
}

/// Layer-2 backward: parameter gradients plus the cotangent of the layer-1
/// activations, including the path back through the mean aggregation.
pub fn layer2_backward(
    part: &Layer2Part,
    adj: &[Vec<usize>],
    h: &Array2<f64>,
    m2: &Array2<f64>,
    dlogits: &Array2<f64>,
) -> (Layer2Grads, Array2<f64>) {
    let layer = &part.layer;
    let grads = Layer2Grads {
        w_self: h.t().dot(dlogits) * &layer.mask_self,
        w_neigh: m2.t().dot(dlogits) * &layer.mask_neigh,
        bias: dlogits.sum_axis(Axis(0)),
    };
    let dm2 = dlogits.dot(&layer.effective_neigh().t());
    let dh = dlogits.dot(&layer.effective_self().t()) + aggregate_mean_transpose(adj, &dm2);
    (grads, dh)
}

/// Layer-1 backward from the activation cotangent `dh`.
pub fn layer1_backward(part: &Layer1Part, cache: &Layer1Cache, dh: &Array2<f64>) -> Layer1Grads {
    // Dropout.
    let d_relu = match &cache.dropout_mask {
        Some(mask) => dh * mask,
        None => dh.clone(),
    };
    // ReLU gate (relu_out > 0 iff the pre-activation was positive).
    let d_bn_out = &d_relu * &cache.relu_out.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });

    // Batch norm.
    let gamma_grad = (&d_bn_out * &cache.x_hat).sum_axis(Axis(0));
    let beta_grad = d_bn_out.sum_axis(Axis(0));
    let d_x_hat = &d_bn_out * &part.bn.gamma;
    let inv_std = cache.bn_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let d_pre = match cache.mode {
        Mode::Train => {
            // Batch statistics participated in the forward pass.
            let mean_d = d_x_hat.mean_axis(Axis(0)).expect("n > 0");
            let mean_dx = (&d_x_hat * &cache.x_hat).mean_axis(Axis(0)).expect("n > 0");
            (&d_x_hat - &mean_d - &cache.x_hat * &mean_dx) * &inv_std
        }
        Mode::Eval => &d_x_hat * &inv_std,
    };

    Layer1Grads {
        w_self: cache.x.t().dot(&d_pre) * &part.layer.mask_self,
        w_neigh: cache.m1.t().dot(&d_pre) * &part.layer.mask_neigh,
        bias: d_pre.sum_axis(Axis(0)),
        gamma: gamma_grad,
        beta: beta_grad,
    }
}

/// Loss and exact gradients for every unmasked weight, by running the
/// forward pass in the requested mode and reverse-differentiating it.
/// Train mode folds batch statistics into the running batch-norm state,
/// exactly like [`forward`].
pub fn loss_and_grads(
    model: &mut GnnModel,
    g: &Graph,
    labels: &[usize],
    node_mask: &[usize],
    mode: Mode,
    dropout_seed: u64,
) -> Result<(f64, ModelGrads), GnnError> {
    let adj = g.adjacency();
    let art = forward(model, g, mode, dropout_seed)?;
    let (loss, dlogits) = softmax_ce_loss(&art.logits, labels, node_mask)?;
    let (g2, dh) = layer2_backward(&model.layer2, &adj, &art.cache1.h, &art.m2, &dlogits);
    let g1 = layer1_backward(&model.layer1, &art.cache1, &dh);
    Ok((loss, ModelGrads { layer1: g1, layer2: g2 }))
}
