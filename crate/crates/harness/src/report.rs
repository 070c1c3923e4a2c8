//! CSV schemas and the statistics derived from trial records.
//!
//! Floats are written in shortest round-trip form. Every file has a header
//! row and a fixed column order.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::wilcoxon::{wilcoxon_one_sided, Method};

pub const UNIFORM: u8 = 1;
pub const CHERNOFF: u8 = 2;

/// One run of one algorithm. `runtime_ms` goes to a separate timings file
/// so the trial file stays byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub p1: f64,
    pub algorithm: u8,
    pub seed: u64,
    pub p0: f64,
    pub ari: f64,
    pub k_hat: usize,
    pub d_hat: usize,
    pub e1: usize,
    pub e11: usize,
    /// `;`-separated markers such as `fallback=single-cluster` or `shortfall=12`.
    pub flags: String,
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub trial: usize,
    pub p1: f64,
    pub algorithm: u8,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: u8,
    pub p1: f64,
    pub trials: usize,
    pub mean_ari: f64,
    /// Sample standard deviation over `sqrt(trials)`; NaN for a single trial.
    pub stderr_ari: f64,
}

/// Paired comparison at one `p1`: `delta = ARI(Chernoff) - ARI(uniform)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRow {
    pub p1: f64,
    pub trials: usize,
    pub mean_delta: f64,
    pub stderr_delta: f64,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Wilcoxon signed-rank `W+`; empty when the test is not applicable.
    pub wilcoxon_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub method: String,
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Distinct `p1` values in first-seen order.
fn p1_values(records: &[TrialRecord]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for r in records {
        if !out.iter().any(|&p| p.to_bits() == r.p1.to_bits()) {
            out.push(r.p1);
        }
    }
    out
}

pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for algorithm in [UNIFORM, CHERNOFF] {
        for p1 in p1_values(records) {
            let aris: Vec<f64> = records
                .iter()
                .filter(|r| r.algorithm == algorithm && r.p1.to_bits() == p1.to_bits())
                .map(|r| r.ari)
                .collect();
            if aris.is_empty() {
                continue;
            }
            let (mean_ari, stderr_ari) = mean_stderr(&aris);
            rows.push(SummaryRow { algorithm, p1, trials: aris.len(), mean_ari, stderr_ari });
        }
    }
    rows
}

/// Per-trial deltas at each `p1`, in trial order.
pub fn paired_deltas(records: &[TrialRecord]) -> Vec<(f64, Vec<f64>)> {
    p1_values(records)
        .into_iter()
        .map(|p1| {
            let at: Vec<&TrialRecord> = records.iter().filter(|r| r.p1.to_bits() == p1.to_bits()).collect();
            let mut trials: Vec<usize> = at.iter().map(|r| r.trial).collect();
            trials.sort_unstable();
            trials.dedup();
            let pick = |t: usize, a: u8| at.iter().find(|r| r.trial == t && r.algorithm == a).map(|r| r.ari);
            let deltas = trials.into_iter().filter_map(|t| Some(pick(t, CHERNOFF)? - pick(t, UNIFORM)?)).collect();
            (p1, deltas)
        })
        .collect()
}

pub fn paired(records: &[TrialRecord]) -> Vec<PairedRow> {
    paired_deltas(records)
        .into_iter()
        .filter(|(_, d)| !d.is_empty())
        .map(|(p1, deltas)| {
            let (mean_delta, stderr_delta) = mean_stderr(&deltas);
            let (stat, p, method) = match wilcoxon_one_sided(&deltas) {
                Ok(w) => {
                    let m = match w.method {
                        Method::Exact => "exact",
                        Method::Normal => "normal",
                    };
                    (Some(w.statistic), Some(w.p_value), m.to_string())
                }
                Err(e) => (None, None, format!("not applicable: {e}")),
            };
            PairedRow {
                p1,
                trials: deltas.len(),
                mean_delta,
                stderr_delta,
                wins: deltas.iter().filter(|&&d| d > 0.0).count(),
                losses: deltas.iter().filter(|&&d| d < 0.0).count(),
                ties: deltas.iter().filter(|&&d| d == 0.0).count(),
                wilcoxon_statistic: stat,
                p_value: p,
                method,
            }
        })
        .collect()
}

pub fn timings(records: &[TrialRecord]) -> Vec<TimingRow> {
    records
        .iter()
        .map(|r| TimingRow { trial: r.trial, p1: r.p1, algorithm: r.algorithm, runtime_ms: r.runtime_ms })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| HarnessError::Format { path: path.to_path_buf(), line: i + 2, message: e.to_string() })
        })
        .collect()
}
