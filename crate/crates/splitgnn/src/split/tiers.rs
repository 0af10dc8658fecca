//! The three tier roles: satellite preprocessing, space-station layer-1
//! compute, and ground-station layer-2 training.

use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;

use crate::centrality::{self, CentralityScores, CombinedMode};
use crate::gnn::{
    bn_update_running, dropout_seed_for_epoch, layer1_backward, layer1_forward, layer2_backward,
    layer2_forward, softmax_ce_loss, Layer1Adam, Layer1Cache, Layer1Part, Layer2Adam, Layer2Grads,
    Layer2Part, Mode, Precision,
};
use crate::graph::Graph;
use crate::privacy::{apply_dp_to_graph, PrivacyParams};
use crate::rng;

use super::{
    ActivationPayload, Message, Payload, ProtocolError, ShardPayload, TierNodeId, UpdatePayload,
};

/// Node-pruning settings a satellite applies to its shard.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ShardPruneConfig {
    /// Fraction of the shard's nodes to drop (lowest combined centrality).
    pub dropping_ratio: f64,
    pub mode: CombinedMode,
}

impl Default for ShardPruneConfig {
    fn default() -> Self {
        Self { dropping_ratio: 0.0, mode: CombinedMode::StandardHarmonic }
    }
}

/// A satellite: owns a raw shard of the global graph and the
/// parameter-free preprocessing.
#[derive(Debug, Clone)]
pub struct Satellite {
    pub id: usize,
    pub station: usize,
    /// Global ids of the shard's nodes, ascending.
    pub owned: Vec<usize>,
    pub shard: Graph,
}

impl Satellite {
    /// Apply differential privacy (when configured) and node pruning to
    /// the shard and emit the release addressed to this satellite's space
    /// station. `seed` keys the DP noise stream.
    pub fn satellite_step(
        &self,
        privacy: Option<&PrivacyParams>,
        prune: &ShardPruneConfig,
        seed: u64,
    ) -> Result<Message, ProtocolError> {
        if self.shard.num_nodes() == 0 {
            return Err(ProtocolError::EmptyShard(self.id));
        }
        let mut graph = match privacy {
            Some(params) => {
                let seed = rng::derive_seed(seed, &[rng::stream::DP_NOISE, self.id as u64]);
                apply_dp_to_graph(&self.shard, params, seed)?.graph
            }
            None => self.shard.clone(),
        };
        let mut global_ids = self.owned.clone();

        if prune.dropping_ratio > 0.0 {
            let scores = CentralityScores::compute(&graph, prune.mode)?;
            let sel = centrality::select_prune_nodes_ratio(&scores.combined, prune.dropping_ratio)?;
            let kept = sel.kept(graph.num_nodes());
            global_ids = kept.iter().map(|&local| global_ids[local]).collect();
            graph = centrality::prune_graph(&graph, &sel)?;
        }

        Ok(Message::pruned_graph(
            TierNodeId::Satellite(self.id),
            TierNodeId::SpaceStation(self.station),
            ShardPayload { global_ids, graph },
        ))
    }
}

/// A space station: unions its satellites' released shards and runs the
/// layer-1 block on them every round.
#[derive(Debug)]
pub struct SpaceStation {
    pub id: usize,
    pub satellites: Vec<usize>,
    pub part: Layer1Part,
    pub adam: Layer1Adam,
    dropout_rate: f64,
    train_seed: u64,
    learning_rate: f64,
    precision: Precision,
    graph: Option<Graph>,
    global_ids: Vec<usize>,
    cache: Option<Layer1Cache>,
}

impl SpaceStation {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        satellites: Vec<usize>,
        part: Layer1Part,
        dropout_rate: f64,
        train_seed: u64,
        learning_rate: f64,
        precision: Precision,
    ) -> Self {
        let adam = Layer1Adam::new(&part);
        Self {
            id,
            satellites,
            part,
            adam,
            dropout_rate,
            train_seed,
            learning_rate,
            precision,
            graph: None,
            global_ids: Vec::new(),
            cache: None,
        }
    }

    /// Union the received shards (disjoint union: nodes renumbered
    /// sequentially in satellite order, no cross-shard edges exist in any
    /// shard) and emit the structure-only release for the ground station:
    /// same nodes and edges, no features, no labels.
    pub fn assemble(&mut self, shards: &[&Message]) -> Result<Message, ProtocolError> {
        let mut by_satellite: BTreeMap<usize, &ShardPayload> = BTreeMap::new();
        for msg in shards {
            let (TierNodeId::Satellite(sat), Payload::PrunedGraph(shard)) = (msg.src, &msg.payload)
            else {
                return Err(ProtocolError::Violation(format!(
                    "station {} got a non-shard message from {}",
                    self.id, msg.src
                )));
            };
            if by_satellite.insert(sat, shard).is_some() {
                return Err(ProtocolError::Violation(format!(
                    "station {} received two shards from satellite {sat}",
                    self.id
                )));
            }
        }
        let mut edges = Vec::new();
        let mut feature_rows: Vec<Vec<f64>> = Vec::new();
        let mut labels = Vec::new();
        let mut have_labels = true;
        let mut global_ids = Vec::new();
        for &sat in &self.satellites {
            let shard = by_satellite
                .get(&sat)
                .ok_or(ProtocolError::MissingShard { station: self.id, satellite: sat })?;
            let offset = global_ids.len();
            global_ids.extend_from_slice(&shard.global_ids);
            for (i, &(u, v)) in shard.graph.edges().iter().enumerate() {
                if shard.graph.edge_mask()[i] {
                    edges.push((u + offset, v + offset));
                }
            }
            for row in shard.graph.features().rows() {
                feature_rows.push(row.to_vec());
            }
            match shard.graph.labels() {
                Some(l) => labels.extend_from_slice(l),
                None => have_labels = false,
            }
        }
        let n = global_ids.len();
        let graph = Graph::build_from_rows(
            n,
            &edges,
            &feature_rows,
            if have_labels { Some(labels) } else { None },
        )?;

        let structure = Graph::build(n, &edges, Array2::zeros((n, 0)), None)?;
        self.graph = Some(graph);
        self.global_ids = global_ids.clone();
        Ok(Message::pruned_graph(
            TierNodeId::SpaceStation(self.id),
            TierNodeId::Ground,
            ShardPayload { global_ids, graph: structure },
        ))
    }

    /// Layer-1 forward for one round; caches activations for the backward
    /// pass and emits the smashed data.
    pub fn space_station_step(&mut self, round: usize) -> Result<Message, ProtocolError> {
        let graph = self
            .graph
            .as_ref()
            .ok_or_else(|| ProtocolError::Violation(format!("station {} not assembled", self.id)))?;
        let dropout_seed = dropout_seed_for_epoch(self.train_seed, round);
        let (h, cache) = layer1_forward(
            &self.part,
            &graph.adjacency(),
            graph.features(),
            &self.global_ids,
            Mode::Train,
            self.dropout_rate,
            dropout_seed,
        )?;
        bn_update_running(&mut self.part.bn, &cache);
        self.cache = Some(cache);
        Ok(Message::smashed(
            TierNodeId::SpaceStation(self.id),
            TierNodeId::Ground,
            ActivationPayload { global_ids: self.global_ids.clone(), values: h },
        ))
    }

    /// Backward through the layer-1 block from the returned activation
    /// cotangent, then one local Adam step.
    pub fn apply_gradients(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let Payload::GradientsBack(data) = &msg.payload else {
            return Err(ProtocolError::Violation(format!(
                "station {} expected gradients, got {:?}",
                self.id, msg.kind
            )));
        };
        let cache = self.cache.take().ok_or_else(|| {
            ProtocolError::Violation(format!("station {} has no cached forward", self.id))
        })?;
        let grads = layer1_backward(&self.part, &cache, &data.values);
        self.adam.step(&mut self.part, &grads, self.learning_rate);
        if matches!(self.precision, Precision::Float32) {
            quantize_layer1(&mut self.part);
        }
        Ok(())
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.graph.as_ref()
    }

    pub fn global_ids(&self) -> &[usize] {
        &self.global_ids
    }
}

fn quantize_layer1(part: &mut Layer1Part) {
    for a in [&mut part.layer.w_self, &mut part.layer.w_neigh] {
        a.mapv_inplace(|x| x as f32 as f64);
    }
    for a in [
        &mut part.layer.bias,
        &mut part.bn.gamma,
        &mut part.bn.beta,
        &mut part.bn.running_mean,
        &mut part.bn.running_var,
    ] {
        a.mapv_inplace(|x| x as f32 as f64);
    }
}

fn quantize_layer2(part: &mut Layer2Part) {
    for a in [&mut part.layer.w_self, &mut part.layer.w_neigh] {
        a.mapv_inplace(|x| x as f32 as f64);
    }
    part.layer.bias.mapv_inplace(|x| x as f32 as f64);
}

/// One station's structure as the ground station sees it.
#[derive(Debug)]
struct StationView {
    adjacency: Vec<Vec<usize>>,
    global_ids: Vec<usize>,
}

/// Ground-station results for one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundOutcome {
    pub loss: f64,
    pub train_accuracy: f64,
}

/// The ground station: layer-2 classifier, loss, and the server-side Adam
/// state.
#[derive(Debug)]
pub struct GroundStation {
    pub part: Layer2Part,
    pub adam: Layer2Adam,
    learning_rate: f64,
    precision: Precision,
    labels: Vec<usize>,
    train_nodes: HashSet<usize>,
    stations: BTreeMap<usize, StationView>,
}

impl GroundStation {
    pub fn new(
        part: Layer2Part,
        labels: Vec<usize>,
        train_nodes: &[usize],
        learning_rate: f64,
        precision: Precision,
    ) -> Self {
        let adam = Layer2Adam::new(&part);
        Self {
            part,
            adam,
            learning_rate,
            precision,
            labels,
            train_nodes: train_nodes.iter().copied().collect(),
            stations: BTreeMap::new(),
        }
    }

    /// Register a station's structure release (setup phase).
    pub fn register_structure(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let (TierNodeId::SpaceStation(id), Payload::PrunedGraph(shard)) = (msg.src, &msg.payload)
        else {
            return Err(ProtocolError::Violation(
                "ground expected a structure release from a space station".into(),
            ));
        };
        for &g in &shard.global_ids {
            if g >= self.labels.len() {
                return Err(ProtocolError::LabelMismatch {
                    expected: g + 1,
                    got: self.labels.len(),
                });
            }
        }
        self.stations.insert(
            id,
            StationView {
                adjacency: shard.graph.adjacency(),
                global_ids: shard.global_ids.clone(),
            },
        );
        Ok(())
    }

    /// Complete the forward pass, compute loss and gradients, step the
    /// server-side Adam, and emit one GradientsBack per SmashedData plus a
    /// ModelUpdate per station. Aborts on a missing or duplicated smashed
    /// message.
    pub fn ground_station_step(
        &mut self,
        smashed: &[&Message],
    ) -> Result<(Vec<Message>, Vec<Message>, RoundOutcome), ProtocolError> {
        let mut by_station: BTreeMap<usize, &ActivationPayload> = BTreeMap::new();
        for msg in smashed {
            let (TierNodeId::SpaceStation(id), Payload::SmashedData(data)) = (msg.src, &msg.payload)
            else {
                return Err(ProtocolError::Violation(
                    "ground expected smashed data from a space station".into(),
                ));
            };
            if by_station.insert(id, data).is_some() {
                return Err(ProtocolError::Violation(format!(
                    "two smashed-data messages from station {id} in one round"
                )));
            }
        }
        for &id in self.stations.keys() {
            if !by_station.contains_key(&id) {
                return Err(ProtocolError::Violation(format!(
                    "no smashed data from station {id} this round"
                )));
            }
        }

        // Forward per station; training rows are the surviving train
        // nodes, weighted so the loss is the mean over all of them.
        struct PerStation<'a> {
            id: usize,
            data: &'a ActivationPayload,
            logits: Array2<f64>,
            m2: Array2<f64>,
            train_rows: Vec<usize>,
        }
        let mut per_station = Vec::new();
        let mut total_train = 0usize;
        for (&id, view) in &self.stations {
            let data = by_station[&id];
            if data.global_ids != view.global_ids {
                return Err(ProtocolError::Violation(format!(
                    "station {id} smashed ids do not match its registered structure"
                )));
            }
            let (logits, m2) = layer2_forward(&self.part, &view.adjacency, &data.values)?;
            let train_rows: Vec<usize> = (0..view.global_ids.len())
                .filter(|&row| self.train_nodes.contains(&view.global_ids[row]))
                .collect();
            total_train += train_rows.len();
            per_station.push(PerStation { id, data, logits, m2, train_rows });
        }
        if total_train == 0 {
            return Err(ProtocolError::NoTrainingNodes);
        }

        let mut loss = 0.0;
        let mut correct = 0usize;
        let mut grad_msgs = Vec::new();
        let mut update_msgs = Vec::new();
        let mut total_grads: Option<Layer2Grads> = None;

        for ps in &per_station {
            let view = &self.stations[&ps.id];
            let local_labels: Vec<usize> =
                view.global_ids.iter().map(|&g| self.labels[g]).collect();
            let weight = ps.train_rows.len() as f64 / total_train as f64;
            let (station_loss, mut dlogits) =
                if ps.train_rows.is_empty() {
                    (0.0, Array2::zeros(ps.logits.dim()))
                } else {
                    softmax_ce_loss(&ps.logits, &local_labels, &ps.train_rows)?
                };
            loss += station_loss * weight;
            if weight != 1.0 {
                dlogits.mapv_inplace(|x| x * weight);
            }
            for &row in &ps.train_rows {
                let r = ps.logits.row(row);
                let mut best = 0;
                for c in 1..r.len() {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                if best == local_labels[row] {
                    correct += 1;
                }
            }

            let (grads, dh) =
                layer2_backward(&self.part, &view.adjacency, &ps.data.values, &ps.m2, &dlogits);
            total_grads = Some(match total_grads.take() {
                None => grads,
                Some(mut acc) => {
                    acc.w_self += &grads.w_self;
                    acc.w_neigh += &grads.w_neigh;
                    acc.bias += &grads.bias;
                    acc
                }
            });
            grad_msgs.push(Message::gradients_back(
                TierNodeId::Ground,
                TierNodeId::SpaceStation(ps.id),
                ActivationPayload { global_ids: view.global_ids.clone(), values: dh },
            ));
        }

        let outcome = RoundOutcome { loss, train_accuracy: correct as f64 / total_train as f64 };
        for &id in self.stations.keys() {
            update_msgs.push(Message::model_update(
                TierNodeId::Ground,
                TierNodeId::SpaceStation(id),
                UpdatePayload { loss: outcome.loss, train_accuracy: outcome.train_accuracy },
            ));
        }

        let grads = total_grads.expect("at least one station");
        self.adam.step(&mut self.part, &grads, self.learning_rate);
        if matches!(self.precision, Precision::Float32) {
            quantize_layer2(&mut self.part);
        }

        Ok((grad_msgs, update_msgs, outcome))
    }

    pub fn station_ids(&self) -> Vec<usize> {
        self.stations.keys().copied().collect()
    }
}
