//! Joint graph sparsification and retraining.
//!
//! Each round trains the model, predicts a label for every node
//! (eval-mode argmax), and removes up to `floor(p_g · ‖A‖₀)` edges from
//! the mask:
//!
//! 1. **Negative edges first** — active edges whose endpoints received
//!    different predictions, in ascending order of importance
//!    (min of the endpoints' combined centrality, ties by edge index).
//! 2. **Non-bridge fallback** — when the negative candidates run out
//!    before the quota, any remaining active non-bridge edges, same
//!    ordering.
//!
//! A bridge is never removed, in either phase; bridge status is
//! re-checked on the surviving graph before every single removal (earlier
//! removals can promote an edge to a bridge, never the reverse). Removing
//! fewer edges than the quota is a recorded, non-fatal outcome. The
//! centrality ordering is computed once per round.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::centrality::{CentralityError, CentralityScores, CombinedMode};
use crate::gnn::{
    self, count_flops, eval_logits, AdamState, DataSplit, GnnError, GnnModel, TrainConfig,
};
use crate::graph::{Graph, GraphError};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum PruneError {
    #[error("predictions cover {got} nodes, expected {expected}")]
    PredictionLength { expected: usize, got: usize },
    #[error("invalid prune config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Whether the per-round quota is a fraction of the round-0 active-edge
/// count (every round removes the same absolute number) or of the current
/// count (geometric decay).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaBase {
    OriginalEdges,
    CurrentEdges,
}

/// Schedule for [`iterative_prune_train`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PruneRoundConfig {
    /// Per-round edge-removal fraction of ‖A‖₀.
    pub p_g: f64,
    pub rounds: usize,
    pub retrain_epochs: usize,
    pub quota_base: QuotaBase,
    /// When set, magnitude-prune the weights to this FLOPs ratio after the
    /// final round.
    pub flops_target: Option<f64>,
}

impl PruneRoundConfig {
    pub fn new(p_g: f64, rounds: usize, retrain_epochs: usize) -> Result<Self, PruneError> {
        if !(0.0..1.0).contains(&p_g) {
            return Err(PruneError::InvalidConfig(format!("p_g must be in [0, 1), got {p_g}")));
        }
        if p_g * rounds as f64 >= 1.0 {
            return Err(PruneError::InvalidConfig(format!(
                "p_g * rounds = {} would exceed the edge budget",
                p_g * rounds as f64
            )));
        }
        Ok(Self {
            p_g,
            rounds,
            retrain_epochs,
            quota_base: QuotaBase::OriginalEdges,
            flops_target: None,
        })
    }

    pub fn with_flops_target(mut self, target: f64) -> Self {
        self.flops_target = Some(target);
        self
    }
}

/// Active edges whose endpoints received different predicted labels.
pub fn compute_negative_edges(g: &Graph, predictions: &[usize]) -> Result<Vec<usize>, PruneError> {
    if predictions.len() != g.num_nodes() {
        return Err(PruneError::PredictionLength {
            expected: g.num_nodes(),
            got: predictions.len(),
        });
    }
    Ok(g.edges()
        .iter()
        .enumerate()
        .filter(|&(i, &(u, v))| g.edge_mask()[i] && predictions[u] != predictions[v])
        .map(|(i, _)| i)
        .collect())
}

/// What one round removed, by phase (edge indices into the canonical
/// list).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRemoval {
    pub quota: usize,
    pub negative: Vec<usize>,
    pub non_bridge: Vec<usize>,
}

impl RoundRemoval {
    pub fn total(&self) -> usize {
        self.negative.len() + self.non_bridge.len()
    }
}

/// Eval-mode argmax predictions for every node.
pub fn predict(model: &GnnModel, g: &Graph) -> Result<Vec<usize>, PruneError> {
    let logits = eval_logits(model, g)?;
    Ok((0..g.num_nodes())
        .map(|v| {
            let row = logits.row(v);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// One pruning round driven by the model's own predictions.
pub fn prune_round(
    g: &mut Graph,
    model: &GnnModel,
    p_g: f64,
    base_edge_count: usize,
) -> Result<RoundRemoval, PruneError> {
    let predictions = predict(model, g)?;
    prune_round_with_predictions(g, &predictions, p_g, base_edge_count)
}

/// One pruning round with the predictions supplied by the caller.
pub fn prune_round_with_predictions(
    g: &mut Graph,
    predictions: &[usize],
    p_g: f64,
    base_edge_count: usize,
) -> Result<RoundRemoval, PruneError> {
    let quota = (p_g * base_edge_count as f64).floor() as usize;
    let mut removal = RoundRemoval { quota, negative: Vec::new(), non_bridge: Vec::new() };
    if quota == 0 || g.num_active_edges() == 0 {
        return Ok(removal);
    }

    // Importance ordering for the whole round: cheapest endpoints go
    // first.
    let scores = CentralityScores::compute(g, CombinedMode::StandardHarmonic)?;
    let importance = |edges: &[(usize, usize)], edge_idx: usize| {
        let (u, v) = edges[edge_idx];
        scores.combined[u].min(scores.combined[v])
    };
    let edges = g.edges().to_vec();
    let sort_by_importance = |indices: &mut Vec<usize>| {
        indices.sort_by(|&a, &b| {
            importance(&edges, a)
                .partial_cmp(&importance(&edges, b))
                .expect("combined scores are not NaN")
                .then(a.cmp(&b))
        });
    };

    let mut negatives = compute_negative_edges(g, predictions)?;
    sort_by_importance(&mut negatives);

    let mut bridges: HashSet<usize> = g.find_bridges().into_iter().collect();
    for e in negatives {
        if removal.total() == quota {
            break;
        }
        if bridges.contains(&e) {
            continue;
        }
        g.set_edge_active(e, false)?;
        removal.negative.push(e);
        // Removal can promote other edges to bridges.
        bridges = g.find_bridges().into_iter().collect();
    }

    while removal.total() < quota {
        let bridges: HashSet<usize> = g.find_bridges().into_iter().collect();
        let mut candidates: Vec<usize> = g
            .active_edge_indices()
            .into_iter()
            .filter(|e| !bridges.contains(e))
            .collect();
        if candidates.is_empty() {
            break;
        }
        sort_by_importance(&mut candidates);
        let e = candidates[0];
        g.set_edge_active(e, false)?;
        removal.non_bridge.push(e);
    }

    Ok(removal)
}

/// One row of a [`PruneReport`]: the state after round `round`'s edge
/// removal and retraining.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneRoundRecord {
    pub round: usize,
    pub edges_removed_negative: usize,
    pub edges_removed_nonbridge: usize,
    pub remaining_active_edges: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub flops: u64,
}

/// Per-round evidence from [`iterative_prune_train`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneReport {
    pub rounds: Vec<PruneRoundRecord>,
}

impl PruneReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "round,edges_removed_negative,edges_removed_nonbridge,remaining_active_edges,train_accuracy,test_accuracy,flops\n",
        );
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.round,
                r.edges_removed_negative,
                r.edges_removed_nonbridge,
                r.remaining_active_edges,
                r.train_accuracy,
                r.test_accuracy,
                r.flops
            );
        }
        s
    }
}

/// The full loop: an initial training phase, then `rounds` iterations of
/// [prune → retrain], then the optional final magnitude pruning of the
/// weights. One Adam state persists across all phases; each phase draws
/// its dropout streams from a distinct derived seed.
pub fn iterative_prune_train(
    mut g: Graph,
    mut model: GnnModel,
    cfg: &PruneRoundConfig,
    train_cfg: &TrainConfig,
    split: &DataSplit,
) -> Result<(GnnModel, Graph, PruneReport), PruneError> {
    let original_edges = g.num_active_edges();
    let mut adam = AdamState::new(&model);
    let mut report = PruneReport::default();

    let phase_cfg = |phase: usize, epochs: usize| TrainConfig {
        epochs,
        seed: rng::derive_seed(train_cfg.seed, &[rng::stream::RETRAIN, phase as u64]),
        ..*train_cfg
    };

    // Initial fit so round 0's predictions come from a trained model.
    gnn::train_monolithic(&mut model, &mut adam, &g, split, &phase_cfg(0, train_cfg.epochs))?;

    for round in 0..cfg.rounds {
        let base = match cfg.quota_base {
            QuotaBase::OriginalEdges => original_edges,
            QuotaBase::CurrentEdges => g.num_active_edges(),
        };
        let removal = prune_round(&mut g, &model, cfg.p_g, base)?;

        let trace = gnn::train_monolithic(
            &mut model,
            &mut adam,
            &g,
            split,
            &phase_cfg(round + 1, cfg.retrain_epochs),
        )?;

        report.rounds.push(PruneRoundRecord {
            round,
            edges_removed_negative: removal.negative.len(),
            edges_removed_nonbridge: removal.non_bridge.len(),
            remaining_active_edges: g.num_active_edges(),
            train_accuracy: trace.train_accuracy,
            test_accuracy: trace.test_accuracy,
            flops: count_flops(&model, &g),
        });
    }

    if let Some(target) = cfg.flops_target {
        gnn::magnitude_prune_weights(&mut model, target, &g)?;
    }

    Ok((model, g, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sbm_generate;
    use ndarray::Array2;

    fn graph_from_edges(n: usize, edges: &[(usize, usize)], labels: Vec<usize>) -> Graph {
        let mut gen = crate::rng::SplitMix64::new(3);
        let feats = Array2::from_shape_fn((n, 2), |_| gen.next_range(-1.0, 1.0));
        Graph::build(n, edges, feats, Some(labels)).unwrap()
    }

    /// All-zero weights give all-zero logits, so argmax predicts class 0
    /// for every node.
    fn constant_model(feature_dim: usize, classes: usize) -> GnnModel {
        let mut m = GnnModel::new(feature_dim, 3, classes, 0.0, 0);
        for layer in [&mut m.layer1.layer, &mut m.layer2.layer] {
            layer.w_self.fill(0.0);
            layer.w_neigh.fill(0.0);
            layer.bias.fill(0.0);
        }
        m
    }

    #[test]
    fn negative_edges_cases() {
        let g = graph_from_edges(3, &[(0, 1), (1, 2)], vec![0, 0, 0]);
        assert!(compute_negative_edges(&g, &[0, 0, 0]).unwrap().is_empty());
        assert_eq!(compute_negative_edges(&g, &[0, 0, 1]).unwrap(), vec![1]);
        assert!(matches!(
            compute_negative_edges(&g, &[0, 0]),
            Err(PruneError::PredictionLength { .. })
        ));
    }

    #[test]
    fn negative_edges_match_exhaustive_scan() {
        let g = sbm_generate(&[6, 6], 0.6, 0.2, 2, 19).unwrap();
        let mut gen = crate::rng::SplitMix64::new(4);
        let preds: Vec<usize> = (0..12).map(|_| (gen.next_u64() % 3) as usize).collect();
        let got = compute_negative_edges(&g, &preds).unwrap();
        let expect: Vec<usize> = g
            .edges()
            .iter()
            .enumerate()
            .filter(|&(i, &(u, v))| g.edge_mask()[i] && preds[u] != preds[v])
            .map(|(i, _)| i)
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn fallback_removal_preserves_connectivity() {
        // A 4-cycle with a pendant: uniform predictions leave no negative
        // edges; the fallback takes cycle edges and never the pendant
        // bridge. After one cycle edge goes, the rest are bridges.
        let mut g = graph_from_edges(
            5,
            &[(0, 1), (1, 2), (2, 3), (0, 3), (3, 4)],
            vec![0, 0, 0, 0, 0],
        );
        let model = constant_model(2, 2);
        let removal = prune_round(&mut g, &model, 0.4, 5).unwrap();
        assert_eq!(removal.quota, 2);
        assert!(removal.negative.is_empty());
        assert_eq!(removal.non_bridge.len(), 1);
        assert_eq!(g.num_components(), 1);
    }

    #[test]
    fn fallback_on_two_cycles_meets_quota_and_stays_connected() {
        // Two 3-cycles sharing node 2: two independent cycles, so quota 2
        // is attainable without disconnecting anything.
        let mut g = graph_from_edges(
            5,
            &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)],
            vec![0; 5],
        );
        let model = constant_model(2, 2);
        let removal = prune_round(&mut g, &model, 0.34, 6).unwrap();
        assert_eq!(removal.quota, 2);
        assert_eq!(removal.non_bridge.len(), 2);
        assert_eq!(g.num_components(), 1);
    }

    #[test]
    fn tree_with_uniform_predictions_loses_nothing() {
        let mut g = graph_from_edges(5, &[(0, 1), (1, 2), (2, 3), (2, 4)], vec![0; 5]);
        let model = constant_model(2, 2);
        let removal = prune_round(&mut g, &model, 0.5, 4).unwrap();
        assert_eq!(removal.total(), 0);
        assert_eq!(g.num_active_edges(), 4);
    }

    #[test]
    fn removed_negatives_are_a_subset_of_the_negative_set() {
        let g0 = sbm_generate(&[5, 5, 5], 0.8, 0.15, 2, 5).unwrap();
        // Deliberately wrong predictions on one block: block 0 predicted
        // as class 1, creating negatives along the 0-1 block boundary.
        let labels = g0.labels().unwrap().to_vec();
        let preds: Vec<usize> = labels.iter().map(|&c| if c == 0 { 1 } else { c }).collect();
        let negatives: HashSet<usize> =
            compute_negative_edges(&g0, &preds).unwrap().into_iter().collect();

        let mut g = g0.clone();
        let removal =
            prune_round_with_predictions(&mut g, &preds, 0.1, g0.num_active_edges()).unwrap();
        assert!(!removal.negative.is_empty());
        assert!(removal.non_bridge.is_empty());
        for e in &removal.negative {
            assert!(negatives.contains(e));
        }
    }

    #[test]
    fn quota_respected_and_never_removes_inactive_edges() {
        let g0 = sbm_generate(&[8, 8], 0.5, 0.2, 2, 31).unwrap();
        let mut gen = crate::rng::SplitMix64::new(6);
        let preds: Vec<usize> = (0..16).map(|_| (gen.next_u64() % 2) as usize).collect();
        let mut g = g0.clone();
        let original = g.num_active_edges();
        let removal = prune_round_with_predictions(&mut g, &preds, 0.2, original).unwrap();
        assert!(removal.total() <= (0.2 * original as f64).floor() as usize);
        let mut seen = HashSet::new();
        for e in removal.negative.iter().chain(&removal.non_bridge) {
            assert!(g0.edge_mask()[*e], "edge {e} was already inactive");
            assert!(seen.insert(*e), "edge {e} removed twice");
        }
        assert_eq!(g.num_active_edges(), original - removal.total());
    }

    fn desk_setup(seed: u64) -> (Graph, GnnModel, DataSplit, TrainConfig) {
        let g = sbm_generate(&[12, 12, 12], 0.4, 0.03, 4, seed).unwrap();
        let split = DataSplit::stratified(&g, 6, seed).unwrap();
        let cfg = TrainConfig { epochs: 30, seed, ..Default::default() };
        let model = GnnModel::new(4, 6, 3, cfg.dropout_rate, seed);
        (g, model, split, cfg)
    }

    #[test]
    fn zero_rounds_is_plain_training() {
        let (g, model, split, tcfg) = desk_setup(2);
        let mask_before = g.edge_mask().to_vec();
        let cfg = PruneRoundConfig::new(0.1, 0, 10).unwrap();
        let (_, g_out, report) = iterative_prune_train(g, model, &cfg, &tcfg, &split).unwrap();
        assert!(report.rounds.is_empty());
        assert_eq!(g_out.edge_mask(), mask_before.as_slice());
    }

    #[test]
    fn edge_accounting_identity_and_quota_bound() {
        let (g, model, split, tcfg) = desk_setup(7);
        let original = g.num_active_edges();
        let cfg = PruneRoundConfig::new(0.1, 3, 10).unwrap();
        let (_, g_out, report) = iterative_prune_train(g, model, &cfg, &tcfg, &split).unwrap();
        assert_eq!(report.rounds.len(), 3);
        let quota = (0.1 * original as f64).floor() as usize;
        let mut expected_remaining = original;
        for r in &report.rounds {
            let removed = r.edges_removed_negative + r.edges_removed_nonbridge;
            assert!(removed <= quota);
            expected_remaining -= removed;
            assert_eq!(r.remaining_active_edges, expected_remaining);
        }
        assert_eq!(g_out.num_active_edges(), expected_remaining);
    }

    #[test]
    fn connected_input_never_disconnects() {
        // Bridges are refused in both phases, so a connected graph stays
        // connected whatever mix of negative and fallback removals runs.
        let g = sbm_generate(&[24], 0.3, 0.3, 3, 11).unwrap();
        assert_eq!(g.num_components(), 1);
        let split = DataSplit { train: (0..12).collect(), test: (12..24).collect() };
        let tcfg = TrainConfig { epochs: 20, seed: 5, ..Default::default() };
        let model = GnnModel::new(3, 4, 2, tcfg.dropout_rate, 5);
        let cfg = PruneRoundConfig::new(0.15, 2, 5).unwrap();
        let (_, g_out, report) = iterative_prune_train(g, model, &cfg, &tcfg, &split).unwrap();
        let removed: usize = report
            .rounds
            .iter()
            .map(|r| r.edges_removed_negative + r.edges_removed_nonbridge)
            .sum();
        assert!(removed > 0);
        assert_eq!(g_out.num_components(), 1);
    }

    #[test]
    fn prune_train_is_deterministic() {
        let run = || {
            let (g, model, split, tcfg) = desk_setup(13);
            let cfg = PruneRoundConfig::new(0.08, 2, 8).unwrap().with_flops_target(0.6);
            let (m, g, report) = iterative_prune_train(g, model, &cfg, &tcfg, &split).unwrap();
            (m, g.edge_mask().to_vec(), report)
        };
        let (ma, maska, ra) = run();
        let (mb, maskb, rb) = run();
        assert_eq!(ma, mb);
        assert_eq!(maska, maskb);
        assert_eq!(ra, rb);
    }

    #[test]
    fn config_validation() {
        assert!(PruneRoundConfig::new(0.5, 2, 1).is_err()); // 0.5 * 2 >= 1
        assert!(PruneRoundConfig::new(1.2, 1, 1).is_err());
        assert!(PruneRoundConfig::new(0.2, 4, 1).is_ok());
    }
}
