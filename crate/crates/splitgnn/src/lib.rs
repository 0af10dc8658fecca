//! Split learning for graph neural networks across a three-tier network
//! (satellites, space stations, one ground station), with differential
//! privacy on node features, centrality-guided graph pruning, and
//! FLOPs-constrained weight pruning.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`graph`]: sparse undirected graphs with an edge mask, structural
//!   queries (bridges, components), a stochastic-block-model generator and
//!   an edge-list loader.
//! - [`centrality`]: eigenvector and betweenness centrality, combined
//!   node-importance scores, and node-level pruning.
//! - [`privacy`]: (ε, δ)-differential privacy via the Gaussian mechanism —
//!   calibration, sensitivity, perturbation, and feature-matrix release.
//! - [`gnn`]: a two-layer mean-aggregating SAGE network with exact
//!   reverse-mode gradients, Adam, per-weight masks and FLOP accounting.
//! - [`prune`]: the joint graph-sparsification + retraining loop
//!   (negative-edge removal with a non-bridge fallback).
//! - [`split`]: the deterministic three-tier protocol simulator with typed
//!   messages, byte accounting, and a federated-learning cost baseline.
//! - [`experiment`]: seeded experiment runners (noise sweep, dropping-ratio
//!   sweep, FLOPs pruning, communication comparison) with CSV/JSON output.
//!
//! Everything is deterministic given a seed; see [`rng`] for the documented
//! generator. The `splitgnn` CLI (in the companion crate) exposes the
//! experiment runners as subcommands. A narrative guide lives in `book/` and
//! its code snippets are compiled as doc-tests via [`book`].

pub mod book;
pub mod centrality;
pub mod experiment;
pub mod gnn;
pub mod graph;
pub mod privacy;
pub mod prune;
pub mod rng;
pub mod split;

pub use graph::Graph;
