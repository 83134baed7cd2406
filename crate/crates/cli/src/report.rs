//! Report files: per-sample records, per-method summary, error by shift.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use shiftkit::eval::{EstimateRecord, Metric};

use crate::config::{ExperimentConfig, ShiftKind, Task};
use crate::error::CliError;
use crate::pipeline::Experiment;
use crate::run::Failure;

pub const RESULT_COLUMNS: [&str; 6] = ["method", "dataset", "sample_id", "shift_intensity", "metric", "value"];
const SHIFT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    /// Average rank among methods on the same sample (1 = best, ties share
    /// the mean of their ranks).
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub task: Task,
    pub shift: ShiftKind,
    pub dataset: String,
    pub classifier: String,
    pub seed: u64,
    pub n_samples: usize,
    pub sample_size: usize,
    pub train_prevalence: f64,
    pub samples_with_replacement: usize,
    pub methods: BTreeMap<String, BTreeMap<Metric, MetricSummary>>,
    pub failures: Vec<Failure>,
}

/// Ranks of `values` (ascending, 1-based) with ties averaged.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn summarize(cfg: &ExperimentConfig, exp: &Experiment, records: &[EstimateRecord], failures: &[Failure]) -> Summary {
    let mut by_cell: BTreeMap<(usize, Metric), Vec<&EstimateRecord>> = BTreeMap::new();
    for r in records {
        by_cell.entry((r.sample_id, r.metric)).or_default().push(r);
    }
    // (sum, rank sum, count)
    let mut acc: BTreeMap<(String, Metric), (f64, f64, usize)> = BTreeMap::new();
    for ((_, metric), cell) in &by_cell {
        let values: Vec<f64> = cell.iter().map(|r| r.value).collect();
        for (r, rank) in cell.iter().zip(average_ranks(&values)) {
            let e = acc.entry((r.method.clone(), *metric)).or_insert((0.0, 0.0, 0));
            e.0 += r.value;
            e.1 += rank;
            e.2 += 1;
        }
    }
    let mut methods: BTreeMap<String, BTreeMap<Metric, MetricSummary>> = BTreeMap::new();
    for ((method, metric), (sum, rank_sum, n)) in acc {
        let n_f = n as f64;
        methods.entry(method).or_default().insert(metric, MetricSummary { count: n, mean: sum / n_f, mean_rank: rank_sum / n_f });
    }
    Summary {
        task: cfg.task,
        shift: cfg.shift,
        dataset: cfg.dataset_name(),
        classifier: cfg.classifier.kind.to_string(),
        seed: cfg.seed,
        n_samples: cfg.protocol.n_samples,
        sample_size: cfg.protocol.size,
        train_prevalence: exp.prepared.train_prevalence,
        samples_with_replacement: exp.prepared.samples.iter().filter(|s| s.with_replacement).count(),
        methods,
        failures: failures.to_vec(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

pub fn write_results(path: &Path, records: &[EstimateRecord]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| CliError::io(path, e);
    w.write_record(RESULT_COLUMNS).map_err(io)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.dataset.clone(),
            r.sample_id.to_string(),
            r.shift_intensity.to_string(),
            r.metric.to_string(),
            r.value.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Decile of shift intensity; 1.0 falls in the last decile.
pub fn shift_bin(s: f64) -> usize {
    ((s * SHIFT_BINS as f64).floor() as usize).min(SHIFT_BINS - 1)
}

pub fn write_by_shift(path: &Path, records: &[EstimateRecord]) -> Result<(), CliError> {
    let mut cells: BTreeMap<(&str, Metric, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = cells.entry((&r.method, r.metric, shift_bin(r.shift_intensity))).or_insert((0.0, 0));
        e.0 += r.value;
        e.1 += 1;
    }
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| CliError::io(path, e);
    w.write_record(["method", "metric", "shift_lo", "shift_hi", "count", "mean"]).map_err(io)?;
    for ((method, metric, bin), (sum, n)) in cells {
        w.write_record([
            method.to_owned(),
            metric.to_string(),
            (bin as f64 / SHIFT_BINS as f64).to_string(),
            ((bin + 1) as f64 / SHIFT_BINS as f64).to_string(),
            n.to_string(),
            (sum / n as f64).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3, 0.2]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks(&[1.0]), vec![1.0]);
    }

    #[test]
    fn shift_deciles() {
        assert_eq!(shift_bin(0.0), 0);
        assert_eq!(shift_bin(0.099), 0);
        assert_eq!(shift_bin(0.1), 1);
        assert_eq!(shift_bin(1.0), 9);
    }
}
