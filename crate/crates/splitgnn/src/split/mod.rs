//! Deterministic simulation of the three-tier split-learning protocol.
//!
//! Tiers and parameter placement:
//!
//! - **Satellites** hold raw graph shards and the parameter-free
//!   preprocessing: differential privacy on features, then
//!   centrality-based node pruning. Each satellite releases its processed
//!   shard to its space station once, in round 0 (the graph is static).
//! - **Space stations** hold the layer-1 block (weights + batch norm).
//!   Every round they run the layer-1 forward on their cached union shard
//!   and send the activations ("smashed data") to the ground station; on
//!   receiving the activation cotangent back they update layer 1 with
//!   their own Adam state.
//! - **The ground station** holds the layer-2 classifier and the loss. It
//!   needs each station's adjacency for the layer-2 aggregation, so at
//!   setup every space station forwards its shard *structure* (edges and
//!   node ids, no features) as a PrunedGraph message. Per round it
//!   completes the forward pass, computes the loss, steps its own Adam,
//!   and returns one GradientsBack per SmashedData plus small ModelUpdate
//!   notifications, which stations relay to their satellites.
//!
//! Satellites and the ground station never exchange messages directly;
//! the router rejects such links.
//!
//! **Wire accounting.** Payload sizes model an f32 wire format: 4 bytes
//! per real, 4 per node id or label, 8 per edge, and a fixed 16-byte
//! header per message. Simulation arithmetic stays f64; only the byte
//! counters use the wire model. Transfer time over a channel is
//! `latency + payload_bytes / bandwidth`; a round's wall time is the sum
//! over pipeline stages of the slowest link in that stage.

mod fl;
mod run;
mod tiers;

pub use fl::{
    comm_cost_report, comm_rows_to_csv, run_fl_baseline, CommRow, FlBaselineConfig,
    FlBaselineReport, FlRound,
};
pub use run::{
    partition_nodes, run_split_training, PartitionStrategy, SplitConfig, SplitRoundMetrics,
    SplitRunMetrics, Topology,
};
pub use tiers::{GroundStation, RoundOutcome, Satellite, ShardPruneConfig, SpaceStation};

use ndarray::Array2;
use std::collections::BTreeMap;

use crate::centrality::CentralityError;
use crate::gnn::GnnError;
use crate::graph::{Graph, GraphError};
use crate::privacy::PrivacyError;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("satellite {0} received an empty shard")]
    EmptyShard(usize),
    #[error("space station {station} expected one shard from each of its satellites, missing satellite {satellite}")]
    MissingShard { station: usize, satellite: usize },
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error("direct satellite-ground link {src} -> {dst} is not part of the topology")]
    ForbiddenLink { src: TierNodeId, dst: TierNodeId },
    #[error("no training nodes survived preprocessing")]
    NoTrainingNodes,
    #[error("label vector covers {got} nodes, expected {expected}")]
    LabelMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Address of a protocol participant. The derived order (satellites, then
/// space stations, then the ground station, each by index) is the
/// canonical message-delivery order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TierNodeId {
    Satellite(usize),
    SpaceStation(usize),
    Ground,
}

impl std::fmt::Display for TierNodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TierNodeId::Satellite(i) => write!(f, "sat{i}"),
            TierNodeId::SpaceStation(i) => write!(f, "station{i}"),
            TierNodeId::Ground => write!(f, "ground"),
        }
    }
}

pub const HEADER_BYTES: u64 = 16;
pub const BYTES_PER_REAL: u64 = 4;
pub const BYTES_PER_ID: u64 = 4;
pub const BYTES_PER_EDGE: u64 = 8;

/// A graph shard in flight, with the global ids of its nodes.
#[derive(Debug, Clone)]
pub struct ShardPayload {
    pub global_ids: Vec<usize>,
    pub graph: Graph,
}

/// Per-node activations (or their cotangents) in flight.
#[derive(Debug, Clone)]
pub struct ActivationPayload {
    pub global_ids: Vec<usize>,
    pub values: Array2<f64>,
}

/// End-of-round notification.
#[derive(Debug, Clone, Copy)]
pub struct UpdatePayload {
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub enum Payload {
    PrunedGraph(ShardPayload),
    SmashedData(ActivationPayload),
    GradientsBack(ActivationPayload),
    ModelUpdate(UpdatePayload),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    PrunedGraph,
    SmashedData,
    GradientsBack,
    ModelUpdate,
}

/// A typed protocol message with its wire size.
#[derive(Debug, Clone)]
pub struct Message {
    pub kind: MessageKind,
    pub src: TierNodeId,
    pub dst: TierNodeId,
    pub payload: Payload,
    pub payload_bytes: u64,
}

impl Message {
    pub fn pruned_graph(src: TierNodeId, dst: TierNodeId, shard: ShardPayload) -> Self {
        let n = shard.graph.num_nodes() as u64;
        let d = shard.graph.feature_dim() as u64;
        let m = shard.graph.num_active_edges() as u64;
        let label_bytes = if shard.graph.labels().is_some() { n * BYTES_PER_ID } else { 0 };
        let payload_bytes =
            HEADER_BYTES + n * BYTES_PER_ID + n * d * BYTES_PER_REAL + label_bytes + m * BYTES_PER_EDGE;
        Self { kind: MessageKind::PrunedGraph, src, dst, payload: Payload::PrunedGraph(shard), payload_bytes }
    }

    pub fn smashed(src: TierNodeId, dst: TierNodeId, data: ActivationPayload) -> Self {
        let payload_bytes = HEADER_BYTES + data.values.len() as u64 * BYTES_PER_REAL;
        Self { kind: MessageKind::SmashedData, src, dst, payload: Payload::SmashedData(data), payload_bytes }
    }

    pub fn gradients_back(src: TierNodeId, dst: TierNodeId, data: ActivationPayload) -> Self {
        let payload_bytes = HEADER_BYTES + data.values.len() as u64 * BYTES_PER_REAL;
        Self {
            kind: MessageKind::GradientsBack,
            src,
            dst,
            payload: Payload::GradientsBack(data),
            payload_bytes,
        }
    }

    pub fn model_update(src: TierNodeId, dst: TierNodeId, update: UpdatePayload) -> Self {
        Self {
            kind: MessageKind::ModelUpdate,
            src,
            dst,
            payload: Payload::ModelUpdate(update),
            payload_bytes: HEADER_BYTES + 2 * BYTES_PER_REAL,
        }
    }
}

/// One directed link's bandwidth/latency model and its cumulative
/// counters.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    /// Bytes per time unit.
    pub bandwidth: f64,
    /// Time units per transfer.
    pub latency: f64,
    pub cumulative_bytes: u64,
    pub cumulative_time: f64,
}

impl ChannelModel {
    pub fn new(bandwidth: f64, latency: f64) -> Self {
        Self { bandwidth, latency, cumulative_bytes: 0, cumulative_time: 0.0 }
    }

    /// Record a transfer; returns its duration.
    pub fn transfer(&mut self, payload_bytes: u64) -> f64 {
        let t = self.latency + payload_bytes as f64 / self.bandwidth;
        self.cumulative_bytes += payload_bytes;
        self.cumulative_time += t;
        t
    }
}

/// The set of channels; created lazily per directed (src, dst) pair with
/// uniform bandwidth/latency. Rejects direct satellite-ground links.
#[derive(Debug)]
pub struct Network {
    bandwidth: f64,
    latency: f64,
    channels: BTreeMap<(TierNodeId, TierNodeId), ChannelModel>,
}

impl Network {
    pub fn new(bandwidth: f64, latency: f64) -> Self {
        Self { bandwidth, latency, channels: BTreeMap::new() }
    }

    /// Deliver a message: account its bytes and return the transfer time.
    pub fn deliver(&mut self, msg: &Message) -> Result<f64, ProtocolError> {
        if matches!(
            (msg.src, msg.dst),
            (TierNodeId::Satellite(_), TierNodeId::Ground)
                | (TierNodeId::Ground, TierNodeId::Satellite(_))
        ) {
            return Err(ProtocolError::ForbiddenLink { src: msg.src, dst: msg.dst });
        }
        let channel = self
            .channels
            .entry((msg.src, msg.dst))
            .or_insert_with(|| ChannelModel::new(self.bandwidth, self.latency));
        Ok(channel.transfer(msg.payload_bytes))
    }

    pub fn channels(&self) -> &BTreeMap<(TierNodeId, TierNodeId), ChannelModel> {
        &self.channels
    }

    pub fn total_bytes(&self) -> u64 {
        self.channels.values().map(|c| c.cumulative_bytes).sum()
    }
}

/// Per-round bytes by message kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageBytes {
    pub pruned_graph: u64,
    pub smashed: u64,
    pub gradients: u64,
    pub updates: u64,
}

impl StageBytes {
    pub fn total(&self) -> u64 {
        self.pruned_graph + self.smashed + self.gradients + self.updates
    }

    pub fn add(&mut self, kind: MessageKind, bytes: u64) {
        match kind {
            MessageKind::PrunedGraph => self.pruned_graph += bytes,
            MessageKind::SmashedData => self.smashed += bytes,
            MessageKind::GradientsBack => self.gradients += bytes,
            MessageKind::ModelUpdate => self.updates += bytes,
        }
    }
}

#[cfg(test)]
mod tests;
