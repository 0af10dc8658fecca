//! Experiment runner CLI.
//!
//! Subcommands map one-to-one onto the library's experiment runners; data
//! goes to CSV/JSON files under `--out`, logs go to stderr. Exit codes:
//! 0 success, 2 configuration error, 3 experiment failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use splitgnn::experiment::{
    self, ExperimentConfig, ExperimentError,
};

#[derive(Parser)]
#[command(
    name = "splitgnn",
    version,
    about = "Split learning for GNNs: privacy, pruning, and communication experiments"
)]
struct Cli {
    /// TOML config file; omitted fields take the documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Replace the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSVs and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy vs privacy-budget scale (split training per λ and seed).
    NoiseSweep,
    /// Accuracy vs satellite dropping ratio.
    DroppingSweep,
    /// Dense training vs sparsification + magnitude pruning to the FLOPs target.
    FlopsPrune,
    /// FL vs SL communication bytes across client counts.
    CommCompare,
    /// One split-training run with per-round and per-link CSVs.
    SplitTrain,
    /// The federated-learning byte baseline alone.
    FlBaseline,
    /// Gaussian-mechanism calibration table for the budget scales.
    DpCalibrate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_toml_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<Vec<String>, ExperimentError> {
    let out = cli.out.as_path();
    match cli.command {
        Command::NoiseSweep => {
            let result = experiment::run_noise_sweep(cfg)?;
            for row in &result.summary {
                eprintln!(
                    "noise-sweep: lambda {} -> mean test accuracy {:.4} over {} seeds",
                    row.value, row.mean_test_accuracy, row.num_seeds
                );
            }
            result.write(out, cfg)
        }
        Command::DroppingSweep => {
            let result = experiment::run_dropping_sweep(cfg)?;
            for row in &result.summary {
                eprintln!(
                    "dropping-sweep: dr {} -> mean test accuracy {:.4} over {} seeds",
                    row.value, row.mean_test_accuracy, row.num_seeds
                );
            }
            result.write(out, cfg)
        }
        Command::FlopsPrune => {
            let result = experiment::run_flops_prune(cfg)?;
            eprintln!(
                "flops-prune: mean accuracy dense {:.4}, pruned {:.4}",
                result.mean_accuracy_dense, result.mean_accuracy_pruned
            );
            result.write(out, cfg)
        }
        Command::CommCompare => {
            let result = experiment::run_comm_compare(cfg)?;
            for row in &result.rows {
                eprintln!(
                    "comm-compare: {} clients -> FL {} B, SL {} B, ratio {}",
                    row.clients,
                    row.fl_bytes,
                    row.sl_bytes,
                    row.ratio.map_or_else(|| "undefined".into(), |r| format!("{r:.4}"))
                );
            }
            result.write(out, cfg)
        }
        Command::SplitTrain => {
            let metrics = experiment::run_split_train(cfg)?;
            eprintln!(
                "split-train: {} rounds, final test accuracy {:.4}, total {} B",
                metrics.rounds.len(),
                metrics.final_test_accuracy_population,
                metrics.total_bytes
            );
            experiment::write_split_train(&metrics, out, cfg)
        }
        Command::FlBaseline => {
            let report = experiment::run_fl_baseline_experiment(cfg)?;
            eprintln!("fl-baseline: total {} B over {} rounds", report.total_bytes, report.rounds.len());
            let path = out.join("fl_baseline.csv");
            std::fs::create_dir_all(out).and_then(|()| std::fs::write(&path, report.to_csv())).map_err(
                |source| ExperimentError::Io { path: path.display().to_string(), source },
            )?;
            let outputs = vec![path.display().to_string()];
            experiment::write_manifest(out, "fl_baseline", cfg, &outputs)?;
            Ok(outputs)
        }
        Command::DpCalibrate => {
            let csv = experiment::run_dp_calibrate(cfg)?;
            let path = out.join("dp_calibration.csv");
            std::fs::create_dir_all(out).and_then(|()| std::fs::write(&path, &csv)).map_err(
                |source| ExperimentError::Io { path: path.display().to_string(), source },
            )?;
            let outputs = vec![path.display().to_string()];
            experiment::write_manifest(out, "dp_calibrate", cfg, &outputs)?;
            Ok(outputs)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(outputs) => {
            for f in outputs {
                eprintln!("wrote {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e @ ExperimentError::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("experiment failed: {e}");
            ExitCode::from(3)
        }
    }
}
