//! Full-batch training loop and data splitting.

use ndarray::Array2;

use crate::graph::{Graph, GraphError};
use crate::rng::{self, SplitMix64};

use super::{
    dropout_seed_for_epoch, eval_logits, loss_and_grads, AdamState, GnnError, GnnModel, Mode,
};

/// Numeric width of the trained parameters. Arithmetic always runs in f64;
/// at `Float32` every parameter is rounded through f32 storage after
/// initialization and after each optimizer step, so trajectories are
/// exactly representable at that width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Float32,
    Float64,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            dropout_rate: 0.3,
            seed: 0,
            precision: Precision::Float64,
        }
    }
}

/// Train/test node designation over a labeled graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    /// Stratified split: per class, shuffle that class's nodes with the
    /// seeded generator and take the first `train_per_class` for training;
    /// everything else is test. Classes smaller than `train_per_class`
    /// contribute all their nodes to training.
    pub fn stratified(g: &Graph, train_per_class: usize, seed: u64) -> Result<Self, GraphError> {
        let labels = g.labels().ok_or(GraphError::LabelCount { expected: g.num_nodes(), got: 0 })?;
        let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in 0..num_classes {
            let mut members: Vec<usize> =
                (0..g.num_nodes()).filter(|&v| labels[v] == class).collect();
            let mut gen =
                SplitMix64::new(rng::derive_seed(seed, &[rng::stream::PARTITION, class as u64]));
            for i in (1..members.len()).rev() {
                let j = (gen.next_u64() as usize) % (i + 1);
                members.swap(i, j);
            }
            let cut = train_per_class.min(members.len());
            train.extend_from_slice(&members[..cut]);
            test.extend_from_slice(&members[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok(Self { train, test })
    }
}

/// Fraction of `nodes` whose argmax logit matches the label. Argmax ties
/// resolve to the lowest class index.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = nodes
        .iter()
        .filter(|&&v| {
            let row = logits.row(v);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best == labels[v]
        })
        .count();
    correct as f64 / nodes.len() as f64
}

/// Per-run training record.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub per_epoch_loss: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Train the whole model in one place: each epoch runs a full-batch
/// forward/backward on the training nodes and one Adam step. Deterministic
/// given the config; the split protocol reproduces this trajectory exactly
/// when its tiers are collapsed to one client chain.
pub fn train_monolithic(
    model: &mut GnnModel,
    adam: &mut AdamState,
    g: &Graph,
    split: &DataSplit,
    cfg: &TrainConfig,
) -> Result<TrainTrace, GnnError> {
    if cfg.learning_rate <= 0.0 {
        return Err(GnnError::InvalidLearningRate(cfg.learning_rate));
    }
    let labels = g.labels().ok_or(GnnError::MissingLabels)?.to_vec();
    if matches!(cfg.precision, Precision::Float32) {
        model.quantize_f32();
    }
    let mut per_epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let dropout_seed = dropout_seed_for_epoch(cfg.seed, epoch);
        let (loss, grads) =
            loss_and_grads(model, g, &labels, &split.train, Mode::Train, dropout_seed)?;
        adam.step(model, &grads, cfg.learning_rate);
        if matches!(cfg.precision, Precision::Float32) {
            model.quantize_f32();
        }
        per_epoch_loss.push(loss);
    }
    let logits = eval_logits(model, g)?;
    Ok(TrainTrace {
        per_epoch_loss,
        train_accuracy: accuracy(&logits, &labels, &split.train),
        test_accuracy: accuracy(&logits, &labels, &split.test),
    })
}
