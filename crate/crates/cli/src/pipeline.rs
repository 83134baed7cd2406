//! Data preparation shared by `run` and `protocols preview`: split, fit the
//! classifier, score, and generate the test samples.

use std::path::Path;

use shiftkit::data::{split_stratified, LabeledSet, ScoredSet, SplitSpec};
use shiftkit::eval::{app_indices, cs_mixture_indices, shift_intensity, ProtocolKind, SampleProtocol, Shift};
use shiftkit::models::{fit, ProbModel};

use crate::config::{ExperimentConfig, ShiftKind};
use crate::error::CliError;

const TRAIN_FRACTION: f64 = 0.35;
const VAL_FRACTION: f64 = 0.35;
const TEST_FRACTION: f64 = 0.30;
const TARGET_SPLIT_SEED_OFFSET: u64 = 3;
const PROTOCOL_SEED_OFFSET: u64 = 1;

pub fn load_dataset(path: &Path) -> Result<LabeledSet, CliError> {
    LabeledSet::from_csv_path(path).map_err(|e| CliError::io(path, e))
}

fn split(data: &LabeledSet, seed: u64) -> Result<(LabeledSet, LabeledSet, LabeledSet), CliError> {
    let spec = SplitSpec::new(TRAIN_FRACTION, VAL_FRACTION, TEST_FRACTION, seed)?;
    Ok(split_stratified(data, &spec)?)
}

/// A generated test sample: rows of the test pool plus its shift intensity.
#[derive(Debug, Clone)]
pub struct TestSample {
    pub rows: Vec<usize>,
    /// Drawn prevalence (LS) or target fraction (CS).
    pub target: f64,
    pub shift_intensity: f64,
    pub with_replacement: bool,
}

/// Labeled pool every test sample draws from, with the samples themselves.
pub struct Prepared {
    pub train_prevalence: f64,
    pub pool_labels: Vec<u8>,
    pub samples: Vec<TestSample>,
}

/// Splits the data and generates the samples without fitting anything.
pub fn prepare_samples(cfg: &ExperimentConfig) -> Result<(Prepared, LabeledSet, LabeledSet, LabeledSet), CliError> {
    let proto = |kind| SampleProtocol {
        kind,
        n_samples: cfg.protocol.n_samples,
        size: cfg.protocol.size,
        seed: cfg.seed.wrapping_add(PROTOCOL_SEED_OFFSET),
    };
    match cfg.shift {
        ShiftKind::Label => {
            let data = load_dataset(cfg.dataset.as_deref().expect("validated"))?;
            let (train, val, pool) = split(&data, cfg.seed)?;
            let train_prev = train.prevalence();
            let samples = app_indices(pool.labels(), &proto(ProtocolKind::App))?
                .into_iter()
                .map(|s| {
                    let pos = s.indices.iter().filter(|&&i| pool.labels()[i] == 1).count();
                    let prev = pos as f64 / s.indices.len() as f64;
                    TestSample {
                        shift_intensity: shift_intensity(Shift::Label { train_prev, sample_prev: prev }),
                        target: s.target,
                        with_replacement: s.with_replacement,
                        rows: s.indices,
                    }
                })
                .collect();
            let prepared = Prepared { train_prevalence: train_prev, pool_labels: pool.labels().to_vec(), samples };
            Ok((prepared, train, val, pool))
        }
        ShiftKind::Covariate => {
            let source = load_dataset(cfg.source.as_deref().expect("validated"))?;
            let target = load_dataset(cfg.target.as_deref().expect("validated"))?;
            if source.dim() != target.dim() {
                return Err(CliError::Data(format!(
                    "source has {} features but target has {}",
                    source.dim(),
                    target.dim()
                )));
            }
            let (train, val, test_a) = split(&source, cfg.seed)?;
            let (_, _, test_b) = split(&target, cfg.seed.wrapping_add(TARGET_SPLIT_SEED_OFFSET))?;
            let offset = test_a.len();
            let samples = cs_mixture_indices(test_a.len(), test_b.len(), &proto(ProtocolKind::CsMixture))?
                .into_iter()
                .map(|s| TestSample {
                    rows: s.from_a.iter().copied().chain(s.from_b.iter().map(|&i| offset + i)).collect(),
                    target: s.target_fraction,
                    shift_intensity: shift_intensity(Shift::Covariate { target_fraction: s.target_fraction }),
                    with_replacement: s.with_replacement,
                })
                .collect();
            let pool = test_a.concat(&test_b)?;
            let prepared = Prepared { train_prevalence: train.prevalence(), pool_labels: pool.labels().to_vec(), samples };
            Ok((prepared, train, val, pool))
        }
    }
}

/// Everything a method needs: validation scores and the scored test pool.
pub struct Experiment {
    pub prepared: Prepared,
    pub model: ProbModel,
    pub val: ScoredSet,
    pub pool_scores: Vec<f64>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let (prepared, train, val, pool) = prepare_samples(cfg)?;
    let model = fit(cfg.classifier.kind, &train, &cfg.classifier.params)?;
    Ok(Experiment { val: model.score(&val)?, pool_scores: model.predict_all(&pool)?, model, prepared })
}
