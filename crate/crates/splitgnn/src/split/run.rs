//! The round-driven protocol simulator.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::gnn::{
    accuracy, layer1_forward, layer2_forward, GnnModel, Mode, TrainConfig,
};
use crate::graph::Graph;
use crate::privacy::PrivacyParams;
use crate::rng::{self, SplitMix64};

use super::tiers::{GroundStation, Satellite, ShardPruneConfig, SpaceStation};
use super::{Message, Network, ProtocolError, StageBytes, TierNodeId};
use ndarray::Array2;

/// How the global nodes are dealt out to satellites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Sort nodes by (label, index) and cut into contiguous chunks, so
    /// each satellite's shard is as class-pure as the counts allow. Falls
    /// back to index order when the graph has no labels.
    BlockAligned,
    /// Seeded shuffle, then contiguous chunks.
    Random,
}

/// Static description of the three-tier network.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Topology {
    pub satellites: usize,
    pub space_stations: usize,
    /// Bytes per time unit, uniform across links.
    pub bandwidth: f64,
    /// Time units per transfer, uniform across links.
    pub latency: f64,
    pub partition: PartitionStrategy,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            satellites: 3,
            space_stations: 1,
            bandwidth: 1.0e6,
            latency: 0.05,
            partition: PartitionStrategy::BlockAligned,
        }
    }
}

impl Topology {
    fn validate(&self, num_nodes: usize) -> Result<(), ProtocolError> {
        if self.satellites == 0 {
            return Err(ProtocolError::InvalidTopology("need at least one satellite".into()));
        }
        if self.space_stations == 0 {
            return Err(ProtocolError::InvalidTopology("need at least one space station".into()));
        }
        if self.satellites > num_nodes {
            return Err(ProtocolError::InvalidTopology(format!(
                "{} satellites but only {num_nodes} nodes",
                self.satellites
            )));
        }
        if self.satellites < self.space_stations {
            return Err(ProtocolError::InvalidTopology(format!(
                "{} space stations but only {} satellites; every station needs at least one",
                self.space_stations, self.satellites
            )));
        }
        if !(self.bandwidth > 0.0) || self.latency < 0.0 {
            return Err(ProtocolError::InvalidTopology(
                "bandwidth must be positive and latency nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one split-training run needs besides the graph and the
/// topology.
#[derive(Debug, Clone)]
pub struct SplitConfig {
    /// Feature-release privacy; `None` disables the DP step entirely.
    pub privacy: Option<PrivacyParams>,
    pub shard_prune: ShardPruneConfig,
    /// `epochs` is the number of protocol rounds.
    pub train: TrainConfig,
    pub hidden_dim: usize,
}

/// Per-round results and byte counters.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRoundMetrics {
    pub round: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub bytes: StageBytes,
    pub wall_time: f64,
}

/// Outcome of [`run_split_training`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRunMetrics {
    pub rounds: Vec<SplitRoundMetrics>,
    /// Cumulative bytes per directed link, canonical (src, dst) order.
    pub per_link_bytes: BTreeMap<String, u64>,
    pub per_link_time: BTreeMap<String, f64>,
    pub total_bytes: u64,
    pub final_train_accuracy: f64,
    /// Accuracy over the test nodes still present after preprocessing.
    pub final_test_accuracy: f64,
    /// Accuracy over *all* designated test nodes; nodes pruned away by the
    /// satellites receive no prediction and count as incorrect.
    pub final_test_accuracy_population: f64,
    pub total_test_nodes: usize,
    pub present_test_nodes: usize,
}

impl SplitRunMetrics {
    pub fn loss_trajectory(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.loss).collect()
    }

    /// Round metrics as CSV (one row per round, per-link totals appended
    /// by the experiment writer separately).
    pub fn rounds_to_csv(&self) -> String {
        let mut s = String::from(
            "round,loss,train_acc,test_acc,sl_bytes_total,bytes_pruned_graph,bytes_smashed,bytes_gradients,bytes_updates,wall_time\n",
        );
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.round,
                r.loss,
                r.train_accuracy,
                r.test_accuracy,
                r.bytes.total(),
                r.bytes.pruned_graph,
                r.bytes.smashed,
                r.bytes.gradients,
                r.bytes.updates,
                r.wall_time
            );
        }
        s
    }
}

/// Deal nodes to satellites per the strategy; chunks are contiguous and
/// near-equal (first `n % k` chunks get one extra).
pub fn partition_nodes(
    g: &Graph,
    strategy: PartitionStrategy,
    satellites: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    match strategy {
        PartitionStrategy::BlockAligned => {
            if let Some(labels) = g.labels() {
                order.sort_by_key(|&v| (labels[v], v));
            }
        }
        PartitionStrategy::Random => {
            let mut gen = SplitMix64::new(rng::derive_seed(seed, &[rng::stream::PARTITION]));
            for i in (1..n).rev() {
                order.swap(i, (gen.next_u64() as usize) % (i + 1));
            }
        }
    }
    let base = n / satellites;
    let extra = n % satellites;
    let mut chunks = Vec::with_capacity(satellites);
    let mut at = 0;
    for k in 0..satellites {
        let size = base + usize::from(k < extra);
        let mut chunk: Vec<usize> = order[at..at + size].to_vec();
        chunk.sort_unstable();
        chunks.push(chunk);
        at += size;
    }
    chunks
}

/// God-view evaluation: eval-mode logits per station (its layer-1
/// replica, then the ground classifier over its structure), mapped back
/// to global node ids. Nodes pruned away or outside every partition are
/// absent. This is simulator instrumentation, not protocol traffic.
fn eval_predictions(
    stations: &[SpaceStation],
    ground: &GroundStation,
    num_global_nodes: usize,
    num_classes: usize,
) -> Result<(Array2<f64>, Vec<bool>), ProtocolError> {
    let mut logits = Array2::zeros((num_global_nodes, num_classes));
    let mut present = vec![false; num_global_nodes];
    for station in stations {
        let graph = station
            .graph()
            .ok_or_else(|| ProtocolError::Violation("station not assembled".into()))?;
        let adj = graph.adjacency();
        let (h, _) = layer1_forward(
            &station.part,
            &adj,
            graph.features(),
            station.global_ids(),
            Mode::Eval,
            0.0,
            0,
        )?;
        let (station_logits, _) = layer2_forward(&ground.part, &adj, &h)?;
        for (row, &gid) in station.global_ids().iter().enumerate() {
            logits.row_mut(gid).assign(&station_logits.row(row));
            present[gid] = true;
        }
    }
    Ok((logits, present))
}

/// Run the full protocol: satellite releases in round 0, then
/// smashed-data/gradient exchanges with local Adam updates on both sides
/// of the cut, with byte and time accounting throughout.
pub fn run_split_training(
    topology: &Topology,
    g: &Graph,
    split: &crate::gnn::DataSplit,
    cfg: &SplitConfig,
) -> Result<SplitRunMetrics, ProtocolError> {
    topology.validate(g.num_nodes())?;
    let labels = g
        .labels()
        .ok_or(ProtocolError::LabelMismatch { expected: g.num_nodes(), got: 0 })?
        .to_vec();
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);

    // Shared model init, then the blocks part ways.
    let mut model = GnnModel::new(
        g.feature_dim(),
        cfg.hidden_dim,
        num_classes,
        cfg.train.dropout_rate,
        cfg.train.seed,
    );
    if matches!(cfg.train.precision, crate::gnn::Precision::Float32) {
        model.quantize_f32();
    }

    let partitions = partition_nodes(g, topology.partition, topology.satellites, cfg.train.seed);
    let satellites: Vec<Satellite> = partitions
        .into_iter()
        .enumerate()
        .map(|(id, owned)| {
            let shard = g.induced_subgraph(&owned)?;
            Ok(Satellite { id, station: id % topology.space_stations, owned, shard })
        })
        .collect::<Result<_, ProtocolError>>()?;

    let mut stations: Vec<SpaceStation> = (0..topology.space_stations)
        .map(|id| {
            let sats = satellites
                .iter()
                .filter(|s| s.station == id)
                .map(|s| s.id)
                .collect();
            SpaceStation::new(
                id,
                sats,
                model.layer1.clone(),
                cfg.train.dropout_rate,
                cfg.train.seed,
                cfg.train.learning_rate,
                cfg.train.precision,
            )
        })
        .collect();
    let mut ground = GroundStation::new(
        model.layer2.clone(),
        labels.clone(),
        &split.train,
        cfg.train.learning_rate,
        cfg.train.precision,
    );

    let mut network = Network::new(topology.bandwidth, topology.latency);
    let mut rounds = Vec::with_capacity(cfg.train.epochs);

    for round in 0..cfg.train.epochs {
        let mut bytes = StageBytes::default();
        let mut wall_time = 0.0;

        // Stage 1 (round 0 only): satellite releases and the stations'
        // structure handoff to the ground station.
        if round == 0 {
            let mut stage_time: f64 = 0.0;
            let mut per_station: BTreeMap<usize, Vec<Message>> = BTreeMap::new();
            for sat in &satellites {
                let msg = sat.satellite_step(
                    cfg.privacy.as_ref(),
                    &cfg.shard_prune,
                    cfg.train.seed,
                )?;
                stage_time = stage_time.max(network.deliver(&msg)?);
                bytes.add(msg.kind, msg.payload_bytes);
                let TierNodeId::SpaceStation(dst) = msg.dst else { unreachable!() };
                per_station.entry(dst).or_default().push(msg);
            }
            wall_time += stage_time;

            let mut stage_time: f64 = 0.0;
            for station in &mut stations {
                let shards = per_station.remove(&station.id).unwrap_or_default();
                let refs: Vec<&Message> = shards.iter().collect();
                let structure = station.assemble(&refs)?;
                stage_time = stage_time.max(network.deliver(&structure)?);
                bytes.add(structure.kind, structure.payload_bytes);
                ground.register_structure(&structure)?;
            }
            wall_time += stage_time;
        }

        // Stage 2: layer-1 forward, smashed data to the ground station.
        let mut smashed = Vec::new();
        let mut stage_time: f64 = 0.0;
        for station in &mut stations {
            let msg = station.space_station_step(round)?;
            stage_time = stage_time.max(network.deliver(&msg)?);
            bytes.add(msg.kind, msg.payload_bytes);
            smashed.push(msg);
        }
        wall_time += stage_time;

        // Stage 3: server side — loss, gradients, server Adam.
        let refs: Vec<&Message> = smashed.iter().collect();
        let (grad_msgs, update_msgs, outcome) = ground.ground_station_step(&refs)?;

        // Stage 4: gradients and updates back to the stations, which then
        // relay the update notification to their satellites.
        let mut stage_time: f64 = 0.0;
        for msg in &grad_msgs {
            stage_time = stage_time.max(network.deliver(msg)?);
            bytes.add(msg.kind, msg.payload_bytes);
            let TierNodeId::SpaceStation(id) = msg.dst else {
                return Err(ProtocolError::Violation("gradients must target a station".into()));
            };
            stations[id].apply_gradients(msg)?;
        }
        let mut relayed = Vec::new();
        for msg in &update_msgs {
            stage_time = stage_time.max(network.deliver(msg)?);
            bytes.add(msg.kind, msg.payload_bytes);
            let TierNodeId::SpaceStation(id) = msg.dst else {
                return Err(ProtocolError::Violation("updates must target a station".into()));
            };
            if let super::Payload::ModelUpdate(update) = msg.payload {
                for &sat in &stations[id].satellites {
                    relayed.push(Message::model_update(
                        TierNodeId::SpaceStation(id),
                        TierNodeId::Satellite(sat),
                        update,
                    ));
                }
            }
        }
        wall_time += stage_time;
        let mut stage_time: f64 = 0.0;
        for msg in &relayed {
            stage_time = stage_time.max(network.deliver(msg)?);
            bytes.add(msg.kind, msg.payload_bytes);
        }
        wall_time += stage_time;

        // Instrumentation: deterministic eval over the current replicas.
        let (logits, present) =
            eval_predictions(&stations, &ground, g.num_nodes(), num_classes)?;
        let test_present: Vec<usize> =
            split.test.iter().copied().filter(|&v| present[v]).collect();
        rounds.push(SplitRoundMetrics {
            round,
            loss: outcome.loss,
            train_accuracy: outcome.train_accuracy,
            test_accuracy: accuracy(&logits, &labels, &test_present),
            bytes,
            wall_time,
        });
    }

    let (logits, present) = eval_predictions(&stations, &ground, g.num_nodes(), num_classes)?;
    let train_present: Vec<usize> = split.train.iter().copied().filter(|&v| present[v]).collect();
    let test_present: Vec<usize> = split.test.iter().copied().filter(|&v| present[v]).collect();

    let per_link_bytes: BTreeMap<String, u64> = network
        .channels()
        .iter()
        .map(|((s, d), c)| (format!("{s}->{d}"), c.cumulative_bytes))
        .collect();
    let per_link_time: BTreeMap<String, f64> = network
        .channels()
        .iter()
        .map(|((s, d), c)| (format!("{s}->{d}"), c.cumulative_time))
        .collect();
    let total_bytes = network.total_bytes();

    let test_acc_present = accuracy(&logits, &labels, &test_present);
    let population = if split.test.is_empty() {
        0.0
    } else {
        test_acc_present * test_present.len() as f64 / split.test.len() as f64
    };

    Ok(SplitRunMetrics {
        rounds,
        per_link_bytes,
        per_link_time,
        total_bytes,
        final_train_accuracy: accuracy(&logits, &labels, &train_present),
        final_test_accuracy: test_acc_present,
        final_test_accuracy_population: population,
        total_test_nodes: split.test.len(),
        present_test_nodes: test_present.len(),
    })
}
