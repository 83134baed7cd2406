//! Post-hoc calibrators: Platt scaling, PacCal, DMCal and EMQ posteriors.

use serde::{Deserialize, Serialize};

use crate::calmap::{postprocess_to_map, CalibrationMap};
use crate::data::{LabeledSet, ScoredSet};
use crate::error::{Error, Result};
use crate::histogram::{bin_center, build_histogram, Histogram};
use crate::method::{Calibrate, CalibratorFactory, TestView};
use crate::models::{sigmoid, ProbModel};
use crate::quantify::{class_histograms, emq, hdy_from_histograms, rates_from_scores, ADJUST_EPS, EMQ_MAX_ITER, EMQ_TOL};

const PLATT_CLAMP: f64 = 1e-6;
const PLATT_GRAD_TOL: f64 = 1e-8;
const PLATT_MAX_ITER: usize = 5000;
pub const DMCAL_BINS: usize = 8;

/// Fitted parameters of a calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum CalibratorForm {
    Identity,
    /// `σ(a·logit(y) + b)`.
    Sigmoid { a: f64, b: f64 },
    /// `y·beta + gamma`, passed through `σ` when `sigmoid` is set and
    /// clipped to `[0,1]` otherwise.
    Affine { beta: f64, gamma: f64, sigmoid: bool },
    Map { knots: CalibrationMap },
    /// Posteriors rescaled from `train_prior` to `prior`.
    Emq { prior: f64, train_prior: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub method: String,
    #[serde(flatten)]
    pub form: CalibratorForm,
}

pub(crate) fn logit(y: f64) -> f64 {
    let y = y.clamp(PLATT_CLAMP, 1.0 - PLATT_CLAMP);
    (y / (1.0 - y)).ln()
}

impl Calibrator {
    pub fn new(method: &str, form: CalibratorForm) -> Self {
        Self { method: method.to_owned(), form }
    }

    pub fn identity() -> Self {
        Self::new("Uncalibrated", CalibratorForm::Identity)
    }

    pub fn apply(&self, y: f64) -> f64 {
        match &self.form {
            CalibratorForm::Identity => y.clamp(0.0, 1.0),
            CalibratorForm::Sigmoid { a, b } => sigmoid(a * logit(y) + b),
            CalibratorForm::Affine { beta, gamma, sigmoid: squash } => {
                let v = y * beta + gamma;
                if *squash {
                    sigmoid(v)
                } else {
                    v.clamp(0.0, 1.0)
                }
            }
            CalibratorForm::Map { knots } => knots.interpolate(y),
            CalibratorForm::Emq { prior, train_prior } => crate::quantify::emq_rescale(y, *prior, *train_prior),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibrator serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("calibrator JSON: {e}")))
    }
}

impl Calibrate for Calibrator {
    fn calibrate(&self, y: f64) -> f64 {
        self.apply(y)
    }
}

/// Platt scaling on the logit of the posterior, fitted by gradient descent
/// from the identity `a = 1, b = 0`.
pub fn platt_fit(val: &ScoredSet) -> Result<Calibrator> {
    let labels = val.require_both_classes("Platt validation set")?;
    let z: Vec<f64> = val.posteriors().iter().map(|&y| logit(y)).collect();
    let n = z.len() as f64;
    let szz = z.iter().map(|v| v * v).sum::<f64>() / n;
    let sz = z.iter().sum::<f64>() / n;
    // largest eigenvalue of [[szz, sz], [sz, 1]]
    let half_trace = 0.5 * (szz + 1.0);
    let det = szz - sz * sz;
    let lmax = half_trace + (half_trace * half_trace - det).max(0.0).sqrt();
    let step = 1.0 / (0.25 * lmax).max(f64::MIN_POSITIVE);
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..PLATT_MAX_ITER {
        let (mut ga, mut gb) = (0.0, 0.0);
        for (&zi, &li) in z.iter().zip(labels) {
            let r = sigmoid(a * zi + b) - li as f64;
            ga += r * zi;
            gb += r;
        }
        ga /= n;
        gb /= n;
        if (ga * ga + gb * gb).sqrt() < PLATT_GRAD_TOL {
            break;
        }
        a -= step * ga;
        b -= step * gb;
    }
    Ok(Calibrator::new("Platt", CalibratorForm::Sigmoid { a, b }))
}

/// PacCal from labeled validation posteriors.
pub fn paccal_from_scores(val: &ScoredSet, test: &[f64]) -> Result<Calibrator> {
    let rates = rates_from_scores(val, true, 0.5)?;
    let gap = rates.tpr - rates.fpr;
    if gap.abs() < ADJUST_EPS {
        return Err(Error::Unadjustable { gap });
    }
    let beta = 1.0 / gap;
    let gamma = -rates.fpr / gap;
    let sigmoid = test.iter().any(|&y| !(0.0..=1.0).contains(&(y * beta + gamma)));
    Ok(Calibrator::new("PacCal", CalibratorForm::Affine { beta, gamma, sigmoid }))
}

pub fn paccal_fit(model: &ProbModel, val: &LabeledSet, test: &[f64]) -> Result<Calibrator> {
    paccal_from_scores(&model.score(val)?, test)
}

/// Per-bin positive fraction implied by the HDy mixture, before
/// post-processing.
pub fn dmcal_raw(val: &ScoredSet, test: &[f64], bins: usize) -> Result<Vec<f64>> {
    let (pos, neg) = class_histograms(val, bins)?;
    let p = hdy_from_histograms(&pos, &neg, &build_histogram(test, bins)?)?;
    Ok(mixture_bin_values(p, &pos, &neg))
}

fn mixture_bin_values(p: f64, pos: &Histogram, neg: &Histogram) -> Vec<f64> {
    let b = pos.bin_count();
    (0..b)
        .map(|i| {
            let num = p * pos.densities()[i];
            let den = num + (1.0 - p) * neg.densities()[i];
            if den > 0.0 {
                num / den
            } else {
                bin_center(i, b)
            }
        })
        .collect()
}

pub fn dmcal_fit(val: &ScoredSet, test: &[f64], bins: usize) -> Result<Calibrator> {
    let raw = dmcal_raw(val, test, bins)?;
    Ok(Calibrator::new("DMCal", CalibratorForm::Map { knots: postprocess_to_map(&raw)? }))
}

/// EMQ-adjusted test posteriors.
pub fn emq_calibrate(test: &[f64], train_prior: f64) -> Result<Vec<f64>> {
    Ok(emq(test, train_prior, EMQ_TOL, EMQ_MAX_ITER)?.posteriors)
}

/// Calibrator that reproduces [`emq_calibrate`] on `test` and extends it to
/// any other input.
pub fn emq_calibrator(test: &[f64], train_prior: f64) -> Result<Calibrator> {
    let out = emq(test, train_prior, EMQ_TOL, EMQ_MAX_ITER)?;
    Ok(Calibrator::new("EMQ", CalibratorForm::Emq { prior: out.last_prior, train_prior }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CalMethod {
    Uncalibrated,
    Platt,
    PacCal,
    DmCal { bins: usize },
    /// `train_prior: None` uses the validation prevalence.
    Emq { train_prior: Option<f64> },
}

impl CalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uncalibrated => "Uncalibrated",
            Self::Platt => "Platt",
            Self::PacCal => "PacCal",
            Self::DmCal { .. } => "DMCal",
            Self::Emq { .. } => "EMQ",
        }
    }

    pub fn fit_on(&self, val: &ScoredSet, test: &[f64]) -> Result<Calibrator> {
        match *self {
            Self::Uncalibrated => Ok(Calibrator::identity()),
            Self::Platt => platt_fit(val),
            Self::PacCal => paccal_from_scores(val, test),
            Self::DmCal { bins } => dmcal_fit(val, test, bins),
            Self::Emq { train_prior } => {
                let prior = match train_prior {
                    Some(p) => p,
                    None => crate::data::prevalence(val.require_labels()?),
                };
                emq_calibrator(test, prior)
            }
        }
    }
}

impl CalibratorFactory for CalMethod {
    fn fit(&self, val: &ScoredSet, test: TestView<'_>) -> Result<Box<dyn Calibrate>> {
        Ok(Box::new(self.fit_on(val, &test.posteriors())?))
    }
}
