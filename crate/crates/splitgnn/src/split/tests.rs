use super::*;
use crate::centrality::CombinedMode;
use crate::gnn::{
    layer1_forward, AdamState, DataSplit, GnnModel, Mode, Precision, TrainConfig,
};
use crate::graph::sbm_generate;
use crate::privacy::PrivacyParams;
use crate::split::run::partition_nodes;
use crate::split::tiers::{GroundStation, Satellite, ShardPruneConfig};

fn no_privacy() -> Option<&'static PrivacyParams> {
    None
}

fn infinite_epsilon_params() -> PrivacyParams {
    // sigma = 0 exactly; generous clip bound so clipping is a no-op on
    // the test features.
    PrivacyParams::calibrate(f64::INFINITY, 1e-5, 100.0, 100.0).unwrap()
}

fn shard_for(g: &crate::graph::Graph, owned: Vec<usize>, id: usize) -> Satellite {
    let shard = g.induced_subgraph(&owned).unwrap();
    Satellite { id, station: 0, owned, shard }
}

#[test]
fn satellite_step_identity_without_noise_or_pruning() {
    let g = sbm_generate(&[5, 5], 0.5, 0.1, 3, 7).unwrap();
    let sat = shard_for(&g, (0..10).collect(), 0);
    let msg = sat
        .satellite_step(
            Some(&infinite_epsilon_params()),
            &ShardPruneConfig::default(),
            1,
        )
        .unwrap();
    let Payload::PrunedGraph(shard) = &msg.payload else { panic!("wrong payload") };
    assert_eq!(shard.graph, sat.shard);
    assert_eq!(shard.global_ids, sat.owned);
    assert_eq!(msg.dst, TierNodeId::SpaceStation(0));
}

#[test]
fn satellite_step_prunes_to_floor() {
    let g = sbm_generate(&[5, 5], 0.8, 0.3, 3, 11).unwrap();
    let sat = shard_for(&g, (0..10).collect(), 2);
    let cfg = ShardPruneConfig { dropping_ratio: 0.5, mode: CombinedMode::StandardHarmonic };
    let msg = sat.satellite_step(no_privacy(), &cfg, 1).unwrap();
    let Payload::PrunedGraph(shard) = &msg.payload else { panic!("wrong payload") };
    assert_eq!(shard.graph.num_nodes(), 5);
    assert_eq!(shard.global_ids.len(), 5);
}

#[test]
fn pruned_graph_bytes_decrease_with_dropping_ratio() {
    let g = sbm_generate(&[10, 10], 0.6, 0.2, 4, 3).unwrap();
    let sat = shard_for(&g, (0..20).collect(), 0);
    let mut last = u64::MAX;
    for dr in [0.0, 0.2, 0.5] {
        let cfg = ShardPruneConfig { dropping_ratio: dr, mode: CombinedMode::StandardHarmonic };
        let msg = sat.satellite_step(no_privacy(), &cfg, 1).unwrap();
        assert!(msg.payload_bytes < last, "dr {dr}: {} not < {last}", msg.payload_bytes);
        last = msg.payload_bytes;
    }
}

fn assembled_station(g: &crate::graph::Graph, model: &GnnModel, seed: u64) -> SpaceStation {
    let sat = shard_for(g, (0..g.num_nodes()).collect(), 0);
    let msg = sat.satellite_step(no_privacy(), &ShardPruneConfig::default(), seed).unwrap();
    let mut station = SpaceStation::new(
        0,
        vec![0],
        model.layer1.clone(),
        model.dropout_rate,
        seed,
        0.01,
        Precision::Float64,
    );
    station.assemble(&[&msg]).unwrap();
    station
}

#[test]
fn zero_layer1_weights_smash_to_zero() {
    let g = sbm_generate(&[4, 4], 0.6, 0.2, 3, 5).unwrap();
    let mut model = GnnModel::new(3, 4, 2, 0.0, 1);
    model.layer1.layer.w_self.fill(0.0);
    model.layer1.layer.w_neigh.fill(0.0);
    model.layer1.layer.bias.fill(0.0);
    let mut station = assembled_station(&g, &model, 3);
    let msg = station.space_station_step(0).unwrap();
    let Payload::SmashedData(data) = &msg.payload else { panic!("wrong payload") };
    assert!(data.values.iter().all(|&v| v == 0.0));
}

#[test]
fn single_station_smashed_equals_monolithic_layer1() {
    let g = sbm_generate(&[6, 6], 0.5, 0.1, 4, 9).unwrap();
    let model = GnnModel::new(4, 5, 2, 0.3, 2);
    let mut station = assembled_station(&g, &model, 17);
    let msg = station.space_station_step(4).unwrap();
    let Payload::SmashedData(data) = &msg.payload else { panic!("wrong payload") };

    let ids: Vec<usize> = (0..g.num_nodes()).collect();
    let (expect, _) = layer1_forward(
        &model.layer1,
        &g.adjacency(),
        g.features(),
        &ids,
        Mode::Train,
        model.dropout_rate,
        crate::gnn::dropout_seed_for_epoch(17, 4),
    )
    .unwrap();
    assert_eq!(data.values, expect);
}

#[test]
fn smashed_and_gradient_payload_sizes_match_contract() {
    let g = sbm_generate(&[5, 5], 0.5, 0.1, 3, 13).unwrap();
    let hidden = 6;
    let model = GnnModel::new(3, hidden, 2, 0.0, 4);
    let mut station = assembled_station(&g, &model, 5);
    let smashed = station.space_station_step(0).unwrap();
    let n = g.num_nodes() as u64;
    assert_eq!(smashed.payload_bytes, HEADER_BYTES + n * hidden as u64 * BYTES_PER_REAL);

    let mut ground = GroundStation::new(
        model.layer2.clone(),
        g.labels().unwrap().to_vec(),
        &(0..g.num_nodes()).collect::<Vec<_>>(),
        0.01,
        Precision::Float64,
    );
    // Ground needs the structure before the round.
    let sat = shard_for(&g, (0..g.num_nodes()).collect(), 0);
    let shard_msg = sat.satellite_step(no_privacy(), &ShardPruneConfig::default(), 5).unwrap();
    let mut station2 = SpaceStation::new(
        0,
        vec![0],
        model.layer1.clone(),
        0.0,
        5,
        0.01,
        Precision::Float64,
    );
    let structure = station2.assemble(&[&shard_msg]).unwrap();
    ground.register_structure(&structure).unwrap();
    let (grads, updates, _) = ground.ground_station_step(&[&smashed]).unwrap();
    assert_eq!(grads.len(), 1);
    assert_eq!(grads[0].payload_bytes, smashed.payload_bytes);
    assert_eq!(updates[0].payload_bytes, HEADER_BYTES + 2 * BYTES_PER_REAL);
}

#[test]
fn ground_with_confident_correct_logits_sends_tiny_gradients() {
    // hidden == classes and identity-scaled layer 2: feeding one-hot
    // activations of the true label makes the logits sharply correct.
    let g = sbm_generate(&[4, 4], 0.9, 0.4, 2, 21).unwrap();
    let labels = g.labels().unwrap().to_vec();
    let mut model = GnnModel::new(2, 2, 2, 0.0, 6);
    model.layer2.layer.w_self.fill(0.0);
    model.layer2.layer.w_self[[0, 0]] = 20.0;
    model.layer2.layer.w_self[[1, 1]] = 20.0;
    model.layer2.layer.w_neigh.fill(0.0);
    model.layer2.layer.bias.fill(0.0);

    let sat = shard_for(&g, (0..8).collect(), 0);
    let shard_msg = sat.satellite_step(no_privacy(), &ShardPruneConfig::default(), 0).unwrap();
    let mut station =
        SpaceStation::new(0, vec![0], model.layer1.clone(), 0.0, 0, 0.01, Precision::Float64);
    let structure = station.assemble(&[&shard_msg]).unwrap();
    let mut ground = GroundStation::new(
        model.layer2.clone(),
        labels.clone(),
        &(0..8).collect::<Vec<_>>(),
        0.01,
        Precision::Float64,
    );
    ground.register_structure(&structure).unwrap();

    let onehot = ndarray::Array2::from_shape_fn((8, 2), |(v, c)| {
        if labels[v] == c {
            1.0
        } else {
            0.0
        }
    });
    let smashed = Message::smashed(
        TierNodeId::SpaceStation(0),
        TierNodeId::Ground,
        ActivationPayload { global_ids: (0..8).collect(), values: onehot },
    );
    let (grads, _, outcome) = ground.ground_station_step(&[&smashed]).unwrap();
    assert!(outcome.loss < 1e-6, "loss {}", outcome.loss);
    assert!((outcome.train_accuracy - 1.0).abs() < 1e-12);
    let Payload::GradientsBack(g_back) = &grads[0].payload else { panic!() };
    let norm: f64 = g_back.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm < 1e-4, "gradient norm {norm}");
}

#[test]
fn ground_activation_gradients_match_finite_differences() {
    let g = sbm_generate(&[4, 4], 0.7, 0.3, 2, 33).unwrap();
    let labels = g.labels().unwrap().to_vec();
    let train: Vec<usize> = (0..8).collect();
    let model = GnnModel::new(2, 3, 2, 0.0, 8);

    let sat = shard_for(&g, (0..8).collect(), 0);
    let shard_msg = sat.satellite_step(no_privacy(), &ShardPruneConfig::default(), 0).unwrap();
    let mut station =
        SpaceStation::new(0, vec![0], model.layer1.clone(), 0.0, 0, 0.01, Precision::Float64);
    let structure = station.assemble(&[&shard_msg]).unwrap();

    let mut gen = crate::rng::SplitMix64::new(50);
    let h_matrix = ndarray::Array2::from_shape_fn((8, 3), |_| gen.next_range(-1.0, 1.0));

    // Analytic dL/dH from one ground step (fresh ground per call since the
    // step also advances Adam).
    let fresh_ground = || {
        let mut ground = GroundStation::new(
            model.layer2.clone(),
            labels.clone(),
            &train,
            0.01,
            Precision::Float64,
        );
        ground.register_structure(&structure).unwrap();
        ground
    };
    let loss_for = |h: &ndarray::Array2<f64>| {
        let msg = Message::smashed(
            TierNodeId::SpaceStation(0),
            TierNodeId::Ground,
            ActivationPayload { global_ids: (0..8).collect(), values: h.clone() },
        );
        let (_, _, outcome) = fresh_ground().ground_station_step(&[&msg]).unwrap();
        outcome.loss
    };
    let msg = Message::smashed(
        TierNodeId::SpaceStation(0),
        TierNodeId::Ground,
        ActivationPayload { global_ids: (0..8).collect(), values: h_matrix.clone() },
    );
    let (grad_msgs, _, _) = fresh_ground().ground_station_step(&[&msg]).unwrap();
    let Payload::GradientsBack(analytic) = &grad_msgs[0].payload else { panic!() };

    let eps = 1e-5;
    for (v, c) in [(0, 0), (1, 2), (3, 1), (5, 0), (7, 2)] {
        let mut plus = h_matrix.clone();
        plus[[v, c]] += eps;
        let mut minus = h_matrix.clone();
        minus[[v, c]] -= eps;
        let fd = (loss_for(&plus) - loss_for(&minus)) / (2.0 * eps);
        let an = analytic.values[[v, c]];
        let rel = (an - fd).abs() / fd.abs().max(1.0);
        assert!(rel <= 1e-4, "H[{v},{c}]: analytic {an} vs fd {fd}");
    }
}

#[test]
fn duplicate_smashed_data_aborts() {
    let g = sbm_generate(&[4, 4], 0.7, 0.3, 2, 3).unwrap();
    let model = GnnModel::new(2, 3, 2, 0.0, 8);
    let sat = shard_for(&g, (0..8).collect(), 0);
    let shard_msg = sat.satellite_step(no_privacy(), &ShardPruneConfig::default(), 0).unwrap();
    let mut station =
        SpaceStation::new(0, vec![0], model.layer1.clone(), 0.0, 0, 0.01, Precision::Float64);
    let structure = station.assemble(&[&shard_msg]).unwrap();
    let mut ground = GroundStation::new(
        model.layer2.clone(),
        g.labels().unwrap().to_vec(),
        &(0..8).collect::<Vec<_>>(),
        0.01,
        Precision::Float64,
    );
    ground.register_structure(&structure).unwrap();
    let smashed = station.space_station_step(0).unwrap();
    assert!(matches!(
        ground.ground_station_step(&[&smashed, &smashed]),
        Err(ProtocolError::Violation(_))
    ));
    assert!(matches!(ground.ground_station_step(&[]), Err(ProtocolError::Violation(_))));
}

#[test]
fn network_rejects_direct_satellite_ground_links() {
    let mut net = Network::new(1.0e6, 0.01);
    let msg = Message::model_update(
        TierNodeId::Satellite(0),
        TierNodeId::Ground,
        UpdatePayload { loss: 0.0, train_accuracy: 0.0 },
    );
    assert!(matches!(net.deliver(&msg), Err(ProtocolError::ForbiddenLink { .. })));
    let msg = Message::model_update(
        TierNodeId::Ground,
        TierNodeId::Satellite(1),
        UpdatePayload { loss: 0.0, train_accuracy: 0.0 },
    );
    assert!(matches!(net.deliver(&msg), Err(ProtocolError::ForbiddenLink { .. })));
}

#[test]
fn channel_accounting_is_conserved() {
    let mut net = Network::new(1000.0, 0.5);
    let upd = UpdatePayload { loss: 0.1, train_accuracy: 0.5 };
    let m1 = Message::model_update(TierNodeId::Ground, TierNodeId::SpaceStation(0), upd);
    let m2 = Message::model_update(TierNodeId::SpaceStation(0), TierNodeId::Satellite(0), upd);
    let t1 = net.deliver(&m1).unwrap();
    net.deliver(&m1).unwrap();
    net.deliver(&m2).unwrap();
    assert!((t1 - (0.5 + 24.0 / 1000.0)).abs() < 1e-12);
    assert_eq!(net.total_bytes(), 3 * 24);
    let key = (TierNodeId::Ground, TierNodeId::SpaceStation(0));
    assert_eq!(net.channels()[&key].cumulative_bytes, 48);
}

fn default_run(
    satellites: usize,
    stations: usize,
    rounds: usize,
    seed: u64,
) -> (SplitRunMetrics, crate::graph::Graph, DataSplit) {
    let g = sbm_generate(&[10, 10, 10], 0.4, 0.05, 4, seed).unwrap();
    let split = DataSplit::stratified(&g, 4, seed).unwrap();
    let topology = Topology {
        satellites,
        space_stations: stations,
        ..Topology::default()
    };
    let cfg = SplitConfig {
        privacy: None,
        shard_prune: ShardPruneConfig::default(),
        train: TrainConfig { epochs: rounds, seed, ..Default::default() },
        hidden_dim: 5,
    };
    let metrics = run_split_training(&topology, &g, &split, &cfg).unwrap();
    (metrics, g, split)
}

#[test]
fn split_equals_monolithic_with_one_client_chain() {
    let seed = 4;
    let g = sbm_generate(&[10, 10], 0.4, 0.05, 4, seed).unwrap();
    let split = DataSplit::stratified(&g, 5, seed).unwrap();
    let tcfg = TrainConfig { epochs: 12, seed, ..Default::default() };

    let mut model = GnnModel::new(4, 5, 2, tcfg.dropout_rate, seed);
    let mut adam = AdamState::new(&model);
    let trace =
        crate::gnn::train_monolithic(&mut model, &mut adam, &g, &split, &tcfg).unwrap();

    let topology = Topology { satellites: 1, space_stations: 1, ..Topology::default() };
    let cfg = SplitConfig {
        privacy: None,
        shard_prune: ShardPruneConfig::default(),
        train: tcfg,
        hidden_dim: 5,
    };
    let metrics = run_split_training(&topology, &g, &split, &cfg).unwrap();
    for (r, (a, b)) in trace.per_epoch_loss.iter().zip(metrics.loss_trajectory()).enumerate() {
        assert!((a - b).abs() <= 1e-10, "round {r}: monolithic {a} vs split {b}");
    }
}

#[test]
fn round_bytes_identity_holds() {
    let (metrics, _, _) = default_run(3, 1, 4, 6);
    let from_stages: u64 = metrics.rounds.iter().map(|r| r.bytes.total()).sum();
    assert_eq!(from_stages, metrics.total_bytes);
    let from_links: u64 = metrics.per_link_bytes.values().sum();
    assert_eq!(from_links, metrics.total_bytes);
    // Pruned-graph traffic exists only in round 0.
    assert!(metrics.rounds[0].bytes.pruned_graph > 0);
    for r in &metrics.rounds[1..] {
        assert_eq!(r.bytes.pruned_graph, 0);
        assert!(r.bytes.smashed > 0);
        assert_eq!(r.bytes.smashed, r.bytes.gradients);
    }
}

#[test]
fn doubling_satellites_keeps_smashed_bytes_fixed() {
    let (m2, ..) = default_run(2, 1, 3, 8);
    let (m4, ..) = default_run(4, 1, 3, 8);
    for (a, b) in m2.rounds.iter().zip(&m4.rounds) {
        assert_eq!(a.bytes.smashed, b.bytes.smashed);
    }
}

#[test]
fn no_direct_satellite_ground_traffic_in_runs() {
    let (metrics, ..) = default_run(3, 2, 3, 10);
    for key in metrics.per_link_bytes.keys() {
        assert!(
            !(key.starts_with("sat") && key.ends_with("->ground")),
            "forbidden link {key}"
        );
        assert!(
            !(key.starts_with("ground->sat")),
            "forbidden link {key}"
        );
    }
}

#[test]
fn split_runs_are_deterministic() {
    let (a, ..) = default_run(3, 2, 5, 12);
    let (b, ..) = default_run(3, 2, 5, 12);
    assert_eq!(a, b);
}

#[test]
fn partitions_are_disjoint_and_cover() {
    let g = sbm_generate(&[10, 10, 10], 0.4, 0.05, 2, 5).unwrap();
    for strategy in [PartitionStrategy::BlockAligned, PartitionStrategy::Random] {
        let parts = partition_nodes(&g, strategy, 4, 9);
        let mut seen = vec![false; 30];
        for p in &parts {
            for &v in p {
                assert!(!seen[v], "{strategy:?}: node {v} in two partitions");
                seen[v] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "{strategy:?}: not a cover");
    }
    // Block-aligned with 3 satellites on 3 equal blocks is exact.
    let parts = partition_nodes(&g, PartitionStrategy::BlockAligned, 3, 0);
    let labels = g.labels().unwrap();
    for (k, p) in parts.iter().enumerate() {
        assert!(p.iter().all(|&v| labels[v] == k));
    }
}

#[test]
fn fl_baseline_worked_example_and_linearity() {
    let report = run_fl_baseline(&FlBaselineConfig::new(2, 1, 10)).unwrap();
    assert_eq!(report.total_bytes, 160);

    let r2 = run_fl_baseline(&FlBaselineConfig::new(2, 5, 1000)).unwrap();
    let r16 = run_fl_baseline(&FlBaselineConfig::new(16, 5, 1000)).unwrap();
    assert_eq!(r16.total_bytes, 8 * r2.total_bytes);

    // Strictly increasing in client count.
    let mut last = 0;
    for clients in [2, 4, 8, 16] {
        let total = run_fl_baseline(&FlBaselineConfig::new(clients, 5, 1000)).unwrap().total_bytes;
        assert!(total > last);
        last = total;
    }

    assert!(run_fl_baseline(&FlBaselineConfig::new(0, 1, 1)).is_err());
}

#[test]
fn comm_report_ratios() {
    let rows = comm_cost_report(&[(2, 100), (4, 100)], &[(2, 100), (4, 200)]).unwrap();
    assert_eq!(rows[0].ratio, Some(1.0));
    assert_eq!(rows[1].ratio, Some(2.0));

    let rows = comm_cost_report(&[(2, 0)], &[(2, 500)]).unwrap();
    assert_eq!(rows[0].ratio, None);
    let csv = comm_rows_to_csv(&rows);
    assert!(csv.contains("zero_sl_bytes"));

    assert!(comm_cost_report(&[(2, 1)], &[(4, 1)]).is_err());
}
