//! Seeded experiment runners with CSV and JSON-manifest output.
//!
//! Four studies mirror the evaluation protocol, each at desk scale on the
//! default stochastic-block-model dataset (three blocks of 100,
//! `p_in = 0.3`, `p_out = 0.02`, 16 features):
//!
//! - **noise sweep**: privacy budgets `ε(λ) = λ·ε_base` over the budget
//!   scales, split training per (λ, seed), accuracy vs noise.
//! - **dropping sweep**: satellite node-pruning ratios at a fixed budget
//!   scale. Two accuracies are reported: over surviving test nodes, and
//!   over the whole designated test set with pruned-away nodes counted as
//!   unserved (the headline number).
//! - **flops prune**: dense training vs the sparsification loop plus
//!   magnitude pruning to a FLOPs target, then retraining.
//! - **comm compare**: split-protocol byte totals vs the federated
//!   baseline across client counts.
//!
//! Every runner is a pure function of its config; the writers put CSVs
//! and a reproduction manifest under the output directory. The defaults
//! (ε_base = 8, δ = 1e-5, clip bound 1.0, hidden 32, 200 epochs,
//! 10 train nodes per class) are desk-scale choices documented here.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::centrality::CombinedMode;
use crate::gnn::{self, count_flops, AdamState, DataSplit, GnnModel, Precision, TrainConfig};
use crate::graph::{self, Graph, GraphError};
use crate::privacy::{self, PrivacyParams};
use crate::prune::{self, PruneRoundConfig, QuotaBase};
use crate::rng;
use crate::split::{
    self, comm_cost_report, run_fl_baseline, run_split_training, CommRow, FlBaselineConfig,
    PartitionStrategy, ShardPruneConfig, SplitConfig, SplitRunMetrics, Topology,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Privacy(#[from] privacy::PrivacyError),
    #[error(transparent)]
    Gnn(#[from] gnn::GnnError),
    #[error(transparent)]
    Prune(#[from] prune::PruneError),
    #[error(transparent)]
    Protocol(#[from] split::ProtocolError),
}

/// Where the graph comes from.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Sbm { blocks: Vec<usize>, p_in: f64, p_out: f64, feature_dim: usize },
    EdgeList { path: String, features: Option<String>, labels: Option<String> },
}

impl DatasetConfig {
    pub fn load(&self, seed: u64) -> Result<Graph, ExperimentError> {
        match self {
            DatasetConfig::Sbm { blocks, p_in, p_out, feature_dim } => {
                Ok(graph::sbm_generate(blocks, *p_in, *p_out, *feature_dim, seed)?)
            }
            DatasetConfig::EdgeList { path, features, labels } => Ok(graph::load_edge_list(
                Path::new(path),
                features.as_deref().map(Path::new),
                labels.as_deref().map(Path::new),
            )?),
        }
    }
}

/// Topology settings as they appear in config files.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    pub satellites: usize,
    pub space_stations: usize,
    pub bandwidth: f64,
    pub latency: f64,
    pub partition: PartitionStrategy,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        let t = Topology::default();
        Self {
            satellites: t.satellites,
            space_stations: t.space_stations,
            bandwidth: t.bandwidth,
            latency: t.latency,
            partition: t.partition,
        }
    }
}

impl From<TopologyConfig> for Topology {
    fn from(c: TopologyConfig) -> Self {
        Topology {
            satellites: c.satellites,
            space_stations: c.space_stations,
            bandwidth: c.bandwidth,
            latency: c.latency,
            partition: c.partition,
        }
    }
}

/// The sparsification schedule as it appears in config files.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PruneScheduleConfig {
    pub p_g: f64,
    pub rounds: usize,
    pub retrain_epochs: usize,
    pub quota_base: QuotaBase,
}

impl Default for PruneScheduleConfig {
    fn default() -> Self {
        Self { p_g: 0.05, rounds: 2, retrain_epochs: 60, quota_base: QuotaBase::OriginalEdges }
    }
}

/// One config drives every experiment; runners ignore the fields they do
/// not need.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub seeds: Vec<u64>,
    /// λ values of the noise sweep; ε(λ) = λ·epsilon_base.
    pub budget_scales: Vec<f64>,
    pub dropping_ratios: Vec<f64>,
    pub client_counts: Vec<usize>,
    pub epsilon_base: f64,
    pub delta: f64,
    pub clip_bound: f64,
    /// Fixed budget scale applied during the dropping sweep.
    pub dropping_sweep_budget_scale: f64,
    pub flops_target: f64,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub train_per_class: usize,
    pub combined_mode: CombinedMode,
    pub topology: TopologyConfig,
    pub prune: PruneScheduleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::Sbm {
                blocks: vec![100, 100, 100],
                p_in: 0.3,
                p_out: 0.02,
                feature_dim: 16,
            },
            seeds: vec![1, 2, 3, 4, 5],
            budget_scales: vec![1.0, 0.8, 0.4, 0.2, 0.1],
            dropping_ratios: vec![0.05, 0.10, 0.20, 0.30],
            client_counts: vec![2, 4, 8, 16],
            epsilon_base: 8.0,
            delta: 1e-5,
            clip_bound: 1.0,
            dropping_sweep_budget_scale: 1.0,
            flops_target: 0.5,
            hidden_dim: 32,
            epochs: 200,
            learning_rate: 0.01,
            dropout_rate: 0.3,
            train_per_class: 10,
            combined_mode: CombinedMode::StandardHarmonic,
            topology: TopologyConfig::default(),
            prune: PruneScheduleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("need at least one seed".into()));
        }
        if self.epsilon_base <= 0.0 {
            return Err(ExperimentError::Config("epsilon_base must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ExperimentError::Config("delta must be in (0,1)".into()));
        }
        Ok(())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            dropout_rate: self.dropout_rate,
            seed,
            precision: Precision::Float64,
        }
    }

    fn privacy_params(&self, budget_scale: f64) -> Result<PrivacyParams, ExperimentError> {
        // The released query is the clipped feature matrix, so the
        // sensitivity equals the clip bound.
        Ok(PrivacyParams::calibrate(
            budget_scale * self.epsilon_base,
            self.delta,
            self.clip_bound,
            self.clip_bound,
        )?)
    }

    fn split_config(
        &self,
        privacy: Option<PrivacyParams>,
        dropping_ratio: f64,
        seed: u64,
    ) -> SplitConfig {
        SplitConfig {
            privacy,
            shard_prune: ShardPruneConfig { dropping_ratio, mode: self.combined_mode },
            train: self.train_config(seed),
            hidden_dim: self.hidden_dim,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| ExperimentError::Io { path: dir.display().to_string(), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

#[derive(serde::Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    seeds: &'a [u64],
    outputs: &'a [String],
    config: &'a ExperimentConfig,
}

/// Write `manifest.json` next to the experiment outputs.
pub fn write_manifest(
    dir: &Path,
    experiment: &str,
    cfg: &ExperimentConfig,
    outputs: &[String],
) -> Result<PathBuf, ExperimentError> {
    let manifest = Manifest {
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        seeds: &cfg.seeds,
        outputs,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    write_file(dir, "manifest.json", &json)
}

// ---------------------------------------------------------------------
// Noise sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepRow {
    pub budget_scale: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummaryRow {
    pub value: f64,
    pub mean_test_accuracy: f64,
    pub num_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepResult {
    pub rows: Vec<NoiseSweepRow>,
    pub summary: Vec<SweepSummaryRow>,
}

/// Split training per (budget scale, seed) with the configured privacy
/// calibration. Rows follow the configured scale order, then seed order.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<NoiseSweepResult, ExperimentError> {
    cfg.validate()?;
    if cfg.budget_scales.is_empty() {
        return Err(ExperimentError::Config("budget_scales must be nonempty".into()));
    }
    let topology: Topology = cfg.topology.into();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &scale in &cfg.budget_scales {
        let params = cfg.privacy_params(scale)?;
        let mut acc_sum = 0.0;
        for &seed in &cfg.seeds {
            let g = cfg.dataset.load(seed)?;
            let split = DataSplit::stratified(&g, cfg.train_per_class, seed)?;
            let metrics = run_split_training(
                &topology,
                &g,
                &split,
                &cfg.split_config(Some(params), 0.0, seed),
            )?;
            acc_sum += metrics.final_test_accuracy_population;
            rows.push(NoiseSweepRow {
                budget_scale: scale,
                epsilon: params.epsilon,
                sigma: params.sigma,
                seed,
                train_accuracy: metrics.final_train_accuracy,
                test_accuracy: metrics.final_test_accuracy_population,
            });
        }
        summary.push(SweepSummaryRow {
            value: scale,
            mean_test_accuracy: acc_sum / cfg.seeds.len() as f64,
            num_seeds: cfg.seeds.len(),
        });
    }
    Ok(NoiseSweepResult { rows, summary })
}

impl NoiseSweepResult {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("budget_scale,epsilon,sigma,seed,train_acc,test_acc\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.budget_scale, r.epsilon, r.sigma, r.seed, r.train_accuracy, r.test_accuracy
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("budget_scale,mean_test_acc,num_seeds\n");
        for r in &self.summary {
            let _ = writeln!(s, "{},{},{}", r.value, r.mean_test_accuracy, r.num_seeds);
        }
        s
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<String>, ExperimentError> {
        let mut outputs = Vec::new();
        for (name, contents) in
            [("noise_sweep.csv", self.rows_csv()), ("noise_sweep_summary.csv", self.summary_csv())]
        {
            outputs.push(write_file(dir, name, &contents)?.display().to_string());
        }
        write_manifest(dir, "noise_sweep", cfg, &outputs)?;
        Ok(outputs)
    }
}

// ---------------------------------------------------------------------
// Dropping-ratio sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DroppingSweepRow {
    pub dropping_ratio: f64,
    pub seed: u64,
    pub train_accuracy: f64,
    /// Over all designated test nodes (pruned-away nodes count wrong).
    pub test_accuracy: f64,
    /// Over the test nodes still present after pruning.
    pub test_accuracy_survivors: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppingSweepResult {
    pub rows: Vec<DroppingSweepRow>,
    pub summary: Vec<SweepSummaryRow>,
}

/// Split training per (dropping ratio, seed), with the fixed-budget
/// privacy of the config applied first, mirroring the satellite pipeline.
pub fn run_dropping_sweep(cfg: &ExperimentConfig) -> Result<DroppingSweepResult, ExperimentError> {
    cfg.validate()?;
    if cfg.dropping_ratios.is_empty() {
        return Err(ExperimentError::Config("dropping_ratios must be nonempty".into()));
    }
    let topology: Topology = cfg.topology.into();
    let params = cfg.privacy_params(cfg.dropping_sweep_budget_scale)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &dr in &cfg.dropping_ratios {
        let mut acc_sum = 0.0;
        for &seed in &cfg.seeds {
            let g = cfg.dataset.load(seed)?;
            let split = DataSplit::stratified(&g, cfg.train_per_class, seed)?;
            let metrics = run_split_training(
                &topology,
                &g,
                &split,
                &cfg.split_config(Some(params), dr, seed),
            )?;
            acc_sum += metrics.final_test_accuracy_population;
            rows.push(DroppingSweepRow {
                dropping_ratio: dr,
                seed,
                train_accuracy: metrics.final_train_accuracy,
                test_accuracy: metrics.final_test_accuracy_population,
                test_accuracy_survivors: metrics.final_test_accuracy,
            });
        }
        summary.push(SweepSummaryRow {
            value: dr,
            mean_test_accuracy: acc_sum / cfg.seeds.len() as f64,
            num_seeds: cfg.seeds.len(),
        });
    }
    Ok(DroppingSweepResult { rows, summary })
}

impl DroppingSweepResult {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("dropping_ratio,seed,train_acc,test_acc,test_acc_survivors\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.dropping_ratio,
                r.seed,
                r.train_accuracy,
                r.test_accuracy,
                r.test_accuracy_survivors
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("dropping_ratio,mean_test_acc,num_seeds\n");
        for r in &self.summary {
            let _ = writeln!(s, "{},{},{}", r.value, r.mean_test_accuracy, r.num_seeds);
        }
        s
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<String>, ExperimentError> {
        let mut outputs = Vec::new();
        for (name, contents) in [
            ("dropping_sweep.csv", self.rows_csv()),
            ("dropping_sweep_summary.csv", self.summary_csv()),
        ] {
            outputs.push(write_file(dir, name, &contents)?.display().to_string());
        }
        write_manifest(dir, "dropping_sweep", cfg, &outputs)?;
        Ok(outputs)
    }
}

// ---------------------------------------------------------------------
// FLOPs-constrained pruning
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FlopsPruneRow {
    pub seed: u64,
    pub accuracy_dense: f64,
    pub accuracy_pruned: f64,
    pub flops_dense: u64,
    pub flops_pruned: u64,
    pub flops_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopsPruneResult {
    pub rows: Vec<FlopsPruneRow>,
    pub mean_accuracy_dense: f64,
    pub mean_accuracy_pruned: f64,
    /// Per-seed round-by-round sparsification evidence.
    pub reports: Vec<(u64, prune::PruneReport)>,
}

/// Dense baseline vs sparsification loop + magnitude pruning + retrain,
/// per seed. Runs on the logical global graph (no protocol traffic).
pub fn run_flops_prune(cfg: &ExperimentConfig) -> Result<FlopsPruneResult, ExperimentError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let (mut dense_sum, mut pruned_sum) = (0.0, 0.0);
    for &seed in &cfg.seeds {
        let g = cfg.dataset.load(seed)?;
        let num_classes = g
            .num_classes()
            .ok_or_else(|| ExperimentError::Config("flops_prune needs a labeled dataset".into()))?;
        let split = DataSplit::stratified(&g, cfg.train_per_class, seed)?;
        let tcfg = cfg.train_config(seed);

        // Dense baseline.
        let mut dense =
            GnnModel::new(g.feature_dim(), cfg.hidden_dim, num_classes, cfg.dropout_rate, seed);
        let mut adam = AdamState::new(&dense);
        let dense_trace = gnn::train_monolithic(&mut dense, &mut adam, &g, &split, &tcfg)?;
        let flops_dense = count_flops(&dense, &g);

        // Sparsified path: fresh model, same seed.
        let model =
            GnnModel::new(g.feature_dim(), cfg.hidden_dim, num_classes, cfg.dropout_rate, seed);
        let mut schedule =
            PruneRoundConfig::new(cfg.prune.p_g, cfg.prune.rounds, cfg.prune.retrain_epochs)?
                .with_flops_target(cfg.flops_target);
        schedule.quota_base = cfg.prune.quota_base;
        let (mut pruned, g_pruned, report) =
            prune::iterative_prune_train(g.clone(), model, &schedule, &tcfg, &split)?;
        reports.push((seed, report));

        // Post-pruning retrain.
        let retrain_cfg = TrainConfig {
            seed: rng::derive_seed(tcfg.seed, &[rng::stream::RETRAIN, u64::MAX]),
            ..tcfg
        };
        let mut adam = AdamState::new(&pruned);
        let pruned_trace =
            gnn::train_monolithic(&mut pruned, &mut adam, &g_pruned, &split, &retrain_cfg)?;
        let flops_pruned = count_flops(&pruned, &g_pruned);

        dense_sum += dense_trace.test_accuracy;
        pruned_sum += pruned_trace.test_accuracy;
        rows.push(FlopsPruneRow {
            seed,
            accuracy_dense: dense_trace.test_accuracy,
            accuracy_pruned: pruned_trace.test_accuracy,
            flops_dense,
            flops_pruned,
            flops_ratio: flops_pruned as f64 / flops_dense as f64,
        });
    }
    let n = cfg.seeds.len() as f64;
    Ok(FlopsPruneResult {
        rows,
        mean_accuracy_dense: dense_sum / n,
        mean_accuracy_pruned: pruned_sum / n,
        reports,
    })
}

impl FlopsPruneResult {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from(
            "seed,accuracy_dense,accuracy_pruned,flops_dense,flops_pruned,flops_ratio\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.seed,
                r.accuracy_dense,
                r.accuracy_pruned,
                r.flops_dense,
                r.flops_pruned,
                r.flops_ratio
            );
        }
        s
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<String>, ExperimentError> {
        let mut outputs =
            vec![write_file(dir, "flops_prune.csv", &self.rows_csv())?.display().to_string()];
        for (seed, report) in &self.reports {
            let name = format!("prune_report_seed{seed}.csv");
            outputs.push(write_file(dir, &name, &report.to_csv())?.display().to_string());
        }
        write_manifest(dir, "flops_prune", cfg, &outputs)?;
        Ok(outputs)
    }
}

// ---------------------------------------------------------------------
// Communication comparison
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CommCompareResult {
    pub rows: Vec<CommRow>,
}

/// Byte accounting of split training vs the FL baseline at each client
/// count (clients = satellites). Uses the first configured seed; byte
/// totals are deterministic. Preprocessing is disabled so the comparison
/// measures the raw protocols.
pub fn run_comm_compare(cfg: &ExperimentConfig) -> Result<CommCompareResult, ExperimentError> {
    cfg.validate()?;
    if cfg.client_counts.is_empty() {
        return Err(ExperimentError::Config("client_counts must be nonempty".into()));
    }
    let seed = cfg.seeds[0];
    let g = cfg.dataset.load(seed)?;
    let num_classes = g
        .num_classes()
        .ok_or_else(|| ExperimentError::Config("comm_compare needs a labeled dataset".into()))?;
    let split = DataSplit::stratified(&g, cfg.train_per_class, seed)?;
    let params_per_model =
        GnnModel::new(g.feature_dim(), cfg.hidden_dim, num_classes, cfg.dropout_rate, seed)
            .num_parameters();

    let mut sl = Vec::new();
    let mut fl = Vec::new();
    for &clients in &cfg.client_counts {
        let topology = Topology {
            satellites: clients,
            space_stations: cfg.topology.space_stations,
            bandwidth: cfg.topology.bandwidth,
            latency: cfg.topology.latency,
            partition: cfg.topology.partition,
        };
        let metrics =
            run_split_training(&topology, &g, &split, &cfg.split_config(None, 0.0, seed))?;
        sl.push((clients, metrics.total_bytes));
        let fl_report =
            run_fl_baseline(&FlBaselineConfig::new(clients, cfg.epochs, params_per_model))?;
        fl.push((clients, fl_report.total_bytes));
    }
    Ok(CommCompareResult { rows: comm_cost_report(&sl, &fl)? })
}

impl CommCompareResult {
    pub fn rows_csv(&self) -> String {
        split::comm_rows_to_csv(&self.rows)
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<String>, ExperimentError> {
        let outputs =
            vec![write_file(dir, "comm_compare.csv", &self.rows_csv())?.display().to_string()];
        write_manifest(dir, "comm_compare", cfg, &outputs)?;
        Ok(outputs)
    }
}

// ---------------------------------------------------------------------
// Single runs: split training, the FL baseline, calibration
// ---------------------------------------------------------------------

/// One split-training run with the configured privacy and the first
/// configured dropping ratio, using the first seed.
pub fn run_split_train(cfg: &ExperimentConfig) -> Result<SplitRunMetrics, ExperimentError> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let g = cfg.dataset.load(seed)?;
    let split = DataSplit::stratified(&g, cfg.train_per_class, seed)?;
    let params = cfg.privacy_params(1.0)?;
    let topology: Topology = cfg.topology.into();
    Ok(run_split_training(
        &topology,
        &g,
        &split,
        &cfg.split_config(Some(params), cfg.dropping_ratios.first().copied().unwrap_or(0.0), seed),
    )?)
}

/// Write the per-round and per-link CSVs for one split run.
pub fn write_split_train(
    metrics: &SplitRunMetrics,
    dir: &Path,
    cfg: &ExperimentConfig,
) -> Result<Vec<String>, ExperimentError> {
    let mut outputs =
        vec![write_file(dir, "split_train.csv", &metrics.rounds_to_csv())?.display().to_string()];
    let mut links = String::from("link,bytes,time\n");
    for (link, bytes) in &metrics.per_link_bytes {
        let _ = writeln!(links, "{},{},{}", link, bytes, metrics.per_link_time[link]);
    }
    outputs.push(write_file(dir, "split_train_links.csv", &links)?.display().to_string());
    write_manifest(dir, "split_train", cfg, &outputs)?;
    Ok(outputs)
}

/// The FL baseline alone, at the first configured client count.
pub fn run_fl_baseline_experiment(
    cfg: &ExperimentConfig,
) -> Result<split::FlBaselineReport, ExperimentError> {
    cfg.validate()?;
    let clients = *cfg
        .client_counts
        .first()
        .ok_or_else(|| ExperimentError::Config("client_counts must be nonempty".into()))?;
    let seed = cfg.seeds[0];
    let g = cfg.dataset.load(seed)?;
    let num_classes = g
        .num_classes()
        .ok_or_else(|| ExperimentError::Config("fl_baseline needs a labeled dataset".into()))?;
    let params_per_model =
        GnnModel::new(g.feature_dim(), cfg.hidden_dim, num_classes, cfg.dropout_rate, seed)
            .num_parameters();
    Ok(run_fl_baseline(&FlBaselineConfig::new(clients, cfg.epochs, params_per_model))?)
}

/// Calibration table CSV for the configured budget scales.
pub fn run_dp_calibrate(cfg: &ExperimentConfig) -> Result<String, ExperimentError> {
    cfg.validate()?;
    let rows = privacy::calibration_table(
        &cfg.budget_scales,
        cfg.epsilon_base,
        cfg.delta,
        cfg.clip_bound,
    )?;
    let mut s = String::from("budget_scale,epsilon,delta,sensitivity,sigma\n");
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.budget_scale, r.epsilon, r.delta, r.sensitivity, r.sigma
        );
    }
    Ok(s)
}
