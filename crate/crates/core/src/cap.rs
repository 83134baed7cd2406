//! Classifier accuracy prediction: Naive, ATC and DoC.

use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, ScoredSet};
use crate::error::{Error, Result};
use crate::eval::{app_indices, uniform_indices, ProtocolKind, Sample, SampleProtocol};
use crate::method::{AccuracyPredictor, AccuracyPredictorFactory, TestView};
use crate::models::{crisp, ProbModel};
use crate::quantify::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    pub acc: f64,
    pub method: String,
}

impl AccuracyEstimate {
    fn new(acc: f64, method: &str) -> Self {
        Self { acc: acc.clamp(0.0, 1.0), method: method.to_owned() }
    }
}

/// Fraction of rows whose thresholded posterior equals the label.
pub fn accuracy(posteriors: &[f64], labels: &[u8], t: f64) -> Result<f64> {
    if posteriors.len() != labels.len() {
        return Err(Error::LengthMismatch { left: posteriors.len(), right: labels.len() });
    }
    if posteriors.is_empty() {
        return Err(Error::Empty("accuracy sample"));
    }
    let correct = posteriors.iter().zip(labels).filter(|(&y, &l)| crisp(y, t) == l).count();
    Ok(correct as f64 / posteriors.len() as f64)
}

pub fn naive_acc(model: &ProbModel, val: &LabeledSet, t: f64) -> Result<AccuracyEstimate> {
    Ok(AccuracyEstimate::new(accuracy(&model.predict_all(val)?, val.labels(), t)?, "Naive"))
}

pub fn max_confidence(y: f64) -> f64 {
    y.max(1.0 - y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtcScore {
    MaxConfidence,
    /// `y·ln y + (1−y)·ln(1−y)`, with `0·ln 0 = 0`.
    NegativeEntropy,
}

impl AtcScore {
    pub fn score(self, y: f64) -> f64 {
        match self {
            Self::MaxConfidence => max_confidence(y),
            Self::NegativeEntropy => {
                let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
                xlnx(y) + xlnx(1.0 - y)
            }
        }
    }
}

/// Threshold on validation scores whose exceedance rate is closest to the
/// validation accuracy; ties go to the lower threshold.
pub fn atc_threshold(val: &ScoredSet, score: AtcScore, t: f64) -> Result<f64> {
    let labels = val.require_labels()?;
    let target = accuracy(val.posteriors(), labels, t)? * val.len() as f64;
    let mut scores: Vec<f64> = val.posteriors().iter().map(|&y| score.score(y)).collect();
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let mut best = (n as f64 - target).abs();
    let mut tau = f64::NEG_INFINITY;
    let mut i = 0;
    while i < n {
        let v = scores[i];
        while i < n && scores[i] == v {
            i += 1;
        }
        // `n - i` scores lie strictly above `v`
        let gap = ((n - i) as f64 - target).abs();
        if gap < best {
            best = gap;
            tau = v;
        }
    }
    Ok(tau)
}

pub fn atc_predict(tau: f64, score: AtcScore, test: &[f64]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test posteriors"));
    }
    Ok(test.iter().filter(|&&y| score.score(y) > tau).count() as f64 / test.len() as f64)
}

pub fn atc(val: &ScoredSet, test: &[f64], score: AtcScore, t: f64) -> Result<AccuracyEstimate> {
    let tau = atc_threshold(val, score, t)?;
    let name = match score {
        AtcScore::MaxConfidence => "ATC",
        AtcScore::NegativeEntropy => "ATC-NE",
    };
    Ok(AccuracyEstimate::new(atc_predict(tau, score, test)?, name))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocRegressor {
    pub slope: f64,
    pub intercept: f64,
    pub val_reference_confidence: f64,
    pub val_reference_accuracy: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateRegression);
    }
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// DoC regression over explicit validation samples.
pub fn doc_fit_samples(val: &ScoredSet, samples: &[Vec<usize>], t: f64) -> Result<DocRegressor> {
    let labels = val.require_labels()?;
    let ys = val.posteriors();
    let conf = |idx: &mut dyn Iterator<Item = usize>| {
        let (sum, n) = idx.fold((0.0, 0usize), |(s, n), i| (s + max_confidence(ys[i]), n + 1));
        sum / n as f64
    };
    let ref_conf = conf(&mut (0..ys.len()));
    let ref_acc = accuracy(ys, labels, t)?;
    let mut xs = Vec::with_capacity(samples.len());
    let mut gaps = Vec::with_capacity(samples.len());
    for s in samples {
        if s.is_empty() {
            return Err(Error::Empty("DoC validation sample"));
        }
        let sub_y: Vec<f64> = s.iter().map(|&i| ys[i]).collect();
        let sub_l: Vec<u8> = s.iter().map(|&i| labels[i]).collect();
        xs.push(conf(&mut s.iter().copied()) - ref_conf);
        gaps.push(accuracy(&sub_y, &sub_l, t)? - ref_acc);
    }
    let (slope, intercept) = least_squares(&xs, &gaps)?;
    Ok(DocRegressor { slope, intercept, val_reference_confidence: ref_conf, val_reference_accuracy: ref_acc })
}

/// DoC regression over samples drawn from `val` by `protocol`: APP for
/// label shift, uniform subsamples otherwise. APP falls back to uniform
/// subsamples when `val` holds a single class.
pub fn doc_fit(val: &ScoredSet, protocol: &SampleProtocol, t: f64) -> Result<DocRegressor> {
    let labels = val.require_labels()?;
    let single_class = labels.iter().all(|&l| l == labels[0]);
    let samples: Vec<Sample> = match protocol.kind {
        ProtocolKind::App if !single_class => app_indices(labels, protocol)?,
        _ => uniform_indices(labels, protocol)?,
    };
    let indices: Vec<Vec<usize>> = samples.into_iter().map(|s| s.indices).collect();
    doc_fit_samples(val, &indices, t)
}

pub fn doc_fit_model(model: &ProbModel, val: &LabeledSet, protocol: &SampleProtocol, t: f64) -> Result<DocRegressor> {
    doc_fit(&model.score(val)?, protocol, t)
}

pub fn doc_predict(reg: &DocRegressor, test: &[f64]) -> Result<AccuracyEstimate> {
    if test.is_empty() {
        return Err(Error::Empty("test posteriors"));
    }
    let gap = test.iter().map(|&y| max_confidence(y)).sum::<f64>() / test.len() as f64 - reg.val_reference_confidence;
    Ok(AccuracyEstimate::new(reg.val_reference_accuracy + reg.slope * gap + reg.intercept, "DoC"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CapMethod {
    Naive { t: f64 },
    Atc { score: AtcScore, t: f64 },
    Doc { protocol: SampleProtocol, t: f64 },
}

impl CapMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Naive { .. } => "Naive",
            Self::Atc { score: AtcScore::MaxConfidence, .. } => "ATC",
            Self::Atc { score: AtcScore::NegativeEntropy, .. } => "ATC-NE",
            Self::Doc { .. } => "DoC",
        }
    }

    pub fn fit_on(&self, val: &ScoredSet) -> Result<FittedCap> {
        Ok(match *self {
            Self::Naive { t } => FittedCap::Constant(accuracy(val.posteriors(), val.require_labels()?, t)?),
            Self::Atc { score, t } => FittedCap::Atc { tau: atc_threshold(val, score, t)?, score },
            Self::Doc { protocol, t } => FittedCap::Doc(doc_fit(val, &protocol, t)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedCap {
    Constant(f64),
    Atc { tau: f64, score: AtcScore },
    Doc(DocRegressor),
}

impl FittedCap {
    pub fn estimate(&self, test: &[f64]) -> Result<f64> {
        match self {
            Self::Constant(a) => {
                if test.is_empty() {
                    return Err(Error::Empty("test posteriors"));
                }
                Ok(*a)
            }
            Self::Atc { tau, score } => atc_predict(*tau, *score, test),
            Self::Doc(reg) => Ok(doc_predict(reg, test)?.acc),
        }
    }
}

impl AccuracyPredictor for FittedCap {
    fn predict(&self, test: TestView<'_>) -> Result<f64> {
        self.estimate(&test.posteriors())
    }
}

impl AccuracyPredictorFactory for CapMethod {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn AccuracyPredictor>> {
        Ok(Box::new(self.fit_on(val)?))
    }
}
