//! Federated-learning communication baseline and the FL/SL comparison.
//!
//! The baseline trains nothing: per round, every client uploads a full
//! dense model and downloads the aggregated one, so
//!
//! ```text
//! total = rounds · clients · 2 · params_per_model · bytes_per_param
//! ```

use std::fmt::Write as _;

use super::ProtocolError;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct FlBaselineConfig {
    pub num_clients: usize,
    pub rounds: usize,
    pub params_per_model: usize,
    pub bytes_per_param: usize,
}

impl FlBaselineConfig {
    pub fn new(num_clients: usize, rounds: usize, params_per_model: usize) -> Self {
        Self { num_clients, rounds, params_per_model, bytes_per_param: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlRound {
    pub round: usize,
    pub upload_bytes: u64,
    pub download_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlBaselineReport {
    pub rounds: Vec<FlRound>,
    pub total_bytes: u64,
}

impl FlBaselineReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,upload_bytes,download_bytes,total_bytes\n");
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.round,
                r.upload_bytes,
                r.download_bytes,
                r.upload_bytes + r.download_bytes
            );
        }
        s
    }
}

/// Pure byte accounting of the FL baseline.
pub fn run_fl_baseline(cfg: &FlBaselineConfig) -> Result<FlBaselineReport, ProtocolError> {
    if cfg.num_clients == 0 || cfg.rounds == 0 || cfg.params_per_model == 0 || cfg.bytes_per_param == 0
    {
        return Err(ProtocolError::InvalidTopology(
            "fl baseline needs positive clients, rounds, params and bytes per param".into(),
        ));
    }
    let per_direction =
        (cfg.num_clients * cfg.params_per_model * cfg.bytes_per_param) as u64;
    let rounds: Vec<FlRound> = (0..cfg.rounds)
        .map(|round| FlRound { round, upload_bytes: per_direction, download_bytes: per_direction })
        .collect();
    let total_bytes = 2 * per_direction * cfg.rounds as u64;
    Ok(FlBaselineReport { rounds, total_bytes })
}

/// One row of the FL-vs-SL comparison. `ratio` is `None` when the SL
/// byte count is zero (flagged in the CSV rather than reported as
/// infinity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommRow {
    pub clients: usize,
    pub fl_bytes: u64,
    pub sl_bytes: u64,
    pub ratio: Option<f64>,
}

/// Pair up FL and SL totals measured at the same client counts.
pub fn comm_cost_report(
    sl: &[(usize, u64)],
    fl: &[(usize, u64)],
) -> Result<Vec<CommRow>, ProtocolError> {
    if sl.len() != fl.len() {
        return Err(ProtocolError::Violation(format!(
            "mismatched comparison lengths: {} SL rows vs {} FL rows",
            sl.len(),
            fl.len()
        )));
    }
    sl.iter()
        .zip(fl)
        .map(|(&(sc, sl_bytes), &(fc, fl_bytes))| {
            if sc != fc {
                return Err(ProtocolError::Violation(format!(
                    "client counts out of order: SL row {sc} vs FL row {fc}"
                )));
            }
            let ratio = (sl_bytes > 0).then(|| fl_bytes as f64 / sl_bytes as f64);
            Ok(CommRow { clients: sc, fl_bytes, sl_bytes, ratio })
        })
        .collect()
}

/// CSV for the comparison; undefined ratios render an empty field and a
/// flag.
pub fn comm_rows_to_csv(rows: &[CommRow]) -> String {
    let mut s = String::from("clients,fl_bytes,sl_bytes,ratio,flag\n");
    for r in rows {
        match r.ratio {
            Some(ratio) => {
                let _ = writeln!(s, "{},{},{},{},", r.clients, r.fl_bytes, r.sl_bytes, ratio);
            }
            None => {
                let _ = writeln!(s, "{},{},{},,zero_sl_bytes", r.clients, r.fl_bytes, r.sl_bytes);
            }
        }
    }
    s
}
