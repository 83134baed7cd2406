//! Experiment execution: every configured method on every generated sample.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use shiftkit::cap::accuracy;
use shiftkit::data::prevalence;
use shiftkit::eval::{ae, brier, ece_l2, EstimateRecord, Metric, ECE_BINS};
use shiftkit::method::{AccuracyPredictor, CalibratorFactory, Quantifier, TestView};
use shiftkit::models::DEFAULT_THRESHOLD;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::pipeline::{prepare, Experiment, TestSample};
use crate::registry::{Method, Registry};
use crate::report::{summarize, write_by_shift, write_results, Summary};
use std::sync::Arc;

enum Fitted {
    Quant(Box<dyn Quantifier>),
    Cal(Arc<dyn CalibratorFactory>),
    Acc(Box<dyn AccuracyPredictor>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub method: String,
    /// `None` when the method could not be fitted at all.
    pub sample_id: Option<usize>,
    pub error: String,
}

pub struct RunOutput {
    pub records: Vec<EstimateRecord>,
    pub failures: Vec<Failure>,
    pub summary: Summary,
}

fn record(cfg: &ExperimentConfig, method: &str, id: usize, sample: &TestSample, metric: Metric, value: f64) -> EstimateRecord {
    EstimateRecord {
        method: method.to_owned(),
        dataset: cfg.dataset_name(),
        sample_id: id,
        shift_intensity: sample.shift_intensity,
        metric,
        value,
    }
}

fn evaluate_one(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    name: &str,
    fitted: &Fitted,
    id: usize,
    sample: &TestSample,
) -> shiftkit::Result<Vec<EstimateRecord>> {
    let view = TestView::subset(&exp.pool_scores, &sample.rows);
    let labels: Vec<u8> = sample.rows.iter().map(|&i| exp.prepared.pool_labels[i]).collect();
    let checked = |v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(shiftkit::Error::InvalidInput(format!("{name} produced a non-finite value")))
        }
    };
    Ok(match fitted {
        Fitted::Quant(q) => {
            let p = checked(q.quantify(view)?)?;
            vec![record(cfg, name, id, sample, Metric::AeQuant, ae(prevalence(&labels), p))]
        }
        Fitted::Cal(factory) => {
            let cal = factory.fit(&exp.val, view)?;
            let calibrated = cal.calibrate_all(&view.posteriors());
            if let Some(&bad) = calibrated.iter().find(|v| !v.is_finite()) {
                checked(bad)?;
            }
            vec![
                record(cfg, name, id, sample, Metric::Ece, 100.0 * ece_l2(&calibrated, &labels, ECE_BINS)?),
                record(cfg, name, id, sample, Metric::Brier, brier(&calibrated, &labels)?),
            ]
        }
        Fitted::Acc(a) => {
            let estimate = checked(a.predict(view)?)?;
            let truth = accuracy(&view.posteriors(), &labels, DEFAULT_THRESHOLD)?;
            vec![record(cfg, name, id, sample, Metric::AeAcc, ae(truth, estimate))]
        }
    })
}

/// Runs the experiment in memory. `jobs == 0` uses every available core.
pub fn evaluate(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let exp = prepare(cfg)?;
    let registry = Registry::new(cfg.shift, cfg.seed);
    let mut failures = Vec::new();
    let mut methods: Vec<(&str, Fitted)> = Vec::new();
    for name in &cfg.methods {
        let fitted = match registry.method(cfg.task, name).expect("validated") {
            Method::Quant(f) => f.fit(&exp.val).map(Fitted::Quant),
            Method::Cal(f) => Ok(Fitted::Cal(f)),
            Method::Acc(f) => f.fit(&exp.val).map(Fitted::Acc),
        };
        match fitted {
            Ok(f) => methods.push((name, f)),
            Err(e) => failures.push(Failure { method: name.clone(), sample_id: None, error: e.to_string() }),
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let per_sample: Vec<(Vec<EstimateRecord>, Vec<Failure>)> = pool.install(|| {
        exp.prepared
            .samples
            .par_iter()
            .enumerate()
            .map(|(id, sample)| {
                let mut recs = Vec::new();
                let mut fails = Vec::new();
                for (name, fitted) in &methods {
                    match evaluate_one(cfg, &exp, name, fitted, id, sample) {
                        Ok(r) => recs.extend(r),
                        Err(e) => fails.push(Failure { method: name.to_string(), sample_id: Some(id), error: e.to_string() }),
                    }
                }
                (recs, fails)
            })
            .collect()
    });

    let mut records = Vec::new();
    for (r, f) in per_sample {
        records.extend(r);
        failures.extend(f);
    }
    records.sort_by(|a, b| (&a.method, a.sample_id, a.metric).cmp(&(&b.method, b.sample_id, b.metric)));
    failures.sort_by(|a, b| (&a.method, a.sample_id).cmp(&(&b.method, b.sample_id)));
    let summary = summarize(cfg, &exp, &records, &failures);
    Ok(RunOutput { records, failures, summary })
}

/// Runs the experiment and writes `results.csv`, `summary.json` and
/// `by_shift.csv` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput, CliError> {
    let out = evaluate(cfg, jobs)?;
    let dir: &Path = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_results(&dir.join("results.csv"), &out.records)?;
    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(|e| CliError::io(&summary_path, e))?;
    write_by_shift(&dir.join("by_shift.csv"), &out.records)?;
    Ok(out)
}
