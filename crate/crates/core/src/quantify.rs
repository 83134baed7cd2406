//! Class-prevalence estimators (quantifiers) over test posteriors.
//!
//! Aggregative methods only: each consumes the posteriors a fixed classifier
//! assigns to the test rows, plus labeled validation posteriors where the
//! method needs them.
//!
//! | method | estimate |
//! |--------|----------|
//! | CC     | fraction of posteriors above the threshold |
//! | PCC    | mean posterior |
//! | ACC    | CC corrected with crisp validation tpr/fpr |
//! | PACC   | PCC corrected with soft validation tpr/fpr |
//! | EMQ    | EM re-estimation of the prior and posteriors |
//! | HDy    | histogram mixture closest in Hellinger distance |
//! | KDEy   | Gaussian-KDE mixture with maximal test log-likelihood |

use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, ScoredSet};
use crate::error::{Error, Result};
use crate::histogram::{build_histogram, Histogram};
use crate::method::{Quantifier, QuantifierFactory, TestView};
use crate::models::{crisp, ProbModel};

pub const ADJUST_EPS: f64 = 1e-8;
pub const EMQ_CLAMP: f64 = 1e-6;
pub const EMQ_TOL: f64 = 1e-6;
pub const EMQ_MAX_ITER: usize = 1000;
pub const HDY_BINS: usize = 8;
pub const HDY_GRID_STEPS: usize = 100;
pub const KDEY_BANDWIDTH: f64 = 0.1;
pub const KDEY_TOL: f64 = 1e-4;
const KDEY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimates {
    pub tpr: f64,
    pub fpr: f64,
    /// Expected soft counts rather than thresholded counts.
    pub soft: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: Option<usize>,
    /// Value before clipping to `[0,1]`.
    pub raw: Option<f64>,
    /// Set when `|tpr - fpr|` was too small to adjust.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub p: f64,
    pub method: String,
    pub diagnostics: Diagnostics,
}

impl PrevalenceEstimate {
    pub fn new(p: f64, method: &str) -> Self {
        Self { p, method: method.to_owned(), diagnostics: Diagnostics::default() }
    }

    fn with(mut self, diagnostics: Diagnostics) -> Self {
        self.diagnostics = diagnostics;
        self
    }
}

fn non_empty(posteriors: &[f64]) -> Result<()> {
    if posteriors.is_empty() {
        return Err(Error::Empty("test posteriors"));
    }
    if let Some(i) = posteriors.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(())
}

/// Classify and count.
pub fn cc(test: &[f64], t: f64) -> Result<PrevalenceEstimate> {
    non_empty(test)?;
    let positives = test.iter().filter(|&&y| crisp(y, t) == 1).count();
    Ok(PrevalenceEstimate::new(positives as f64 / test.len() as f64, "CC"))
}

/// Probabilistic classify and count.
pub fn pcc(test: &[f64]) -> Result<PrevalenceEstimate> {
    non_empty(test)?;
    Ok(PrevalenceEstimate::new(mean(test), "PCC"))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// tpr/fpr of the classifier on labeled validation posteriors.
pub fn rates_from_scores(val: &ScoredSet, soft: bool, t: f64) -> Result<RateEstimates> {
    let labels = val.require_both_classes("validation set")?;
    let value = |y: f64| if soft { y } else { crisp(y, t) as f64 };
    let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0.0, 0usize, 0.0, 0usize);
    for (&y, &label) in val.posteriors().iter().zip(labels) {
        if label == 1 {
            pos_sum += value(y);
            pos_n += 1;
        } else {
            neg_sum += value(y);
            neg_n += 1;
        }
    }
    Ok(RateEstimates { tpr: pos_sum / pos_n as f64, fpr: neg_sum / neg_n as f64, soft })
}

pub fn estimate_rates(model: &ProbModel, val: &LabeledSet, soft: bool, t: f64) -> Result<RateEstimates> {
    rates_from_scores(&model.score(val)?, soft, t)
}

/// `(p_raw - fpr) / (tpr - fpr)` clipped to `[0,1]`; falls back to `p_raw`
/// (flagged) when the rates are indistinguishable.
pub fn adjust(p_raw: f64, rates: &RateEstimates) -> PrevalenceEstimate {
    let gap = rates.tpr - rates.fpr;
    if gap.abs() < ADJUST_EPS {
        let diagnostics = Diagnostics { raw: Some(p_raw), degenerate: true, ..Default::default() };
        return PrevalenceEstimate::new(p_raw.clamp(0.0, 1.0), "adjusted").with(diagnostics);
    }
    let raw = (p_raw - rates.fpr) / gap;
    PrevalenceEstimate::new(raw.clamp(0.0, 1.0), "adjusted").with(Diagnostics { raw: Some(raw), ..Default::default() })
}

/// Adjusted classify and count.
pub fn acc(val: &ScoredSet, test: &[f64], t: f64) -> Result<PrevalenceEstimate> {
    let rates = rates_from_scores(val, false, t)?;
    let mut est = adjust(cc(test, t)?.p, &rates);
    est.method = "ACC".into();
    Ok(est)
}

/// Probabilistic adjusted classify and count on validation posteriors.
pub fn pacc_scored(val: &ScoredSet, test: &[f64]) -> Result<PrevalenceEstimate> {
    let rates = rates_from_scores(val, true, 0.5)?;
    let mut est = adjust(pcc(test)?.p, &rates);
    est.method = "PACC".into();
    Ok(est)
}

pub fn pacc(model: &ProbModel, val: &LabeledSet, test: &[f64]) -> Result<PrevalenceEstimate> {
    pacc_scored(&model.score(val)?, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmqOutcome {
    pub estimate: PrevalenceEstimate,
    /// Test posteriors after the last E step; their mean is `estimate.p`.
    pub posteriors: Vec<f64>,
    /// Prior that produced `posteriors`.
    pub last_prior: f64,
}

/// One E step: posteriors rescaled from `train_prior` to `prior`.
#[inline]
pub fn emq_rescale(y: f64, prior: f64, train_prior: f64) -> f64 {
    let y = y.clamp(EMQ_CLAMP, 1.0 - EMQ_CLAMP);
    let pos = prior / train_prior * y;
    let neg = (1.0 - prior) / (1.0 - train_prior) * (1.0 - y);
    pos / (pos + neg)
}

/// Expectation maximization for prior adjustment.
pub fn emq(test: &[f64], train_prior: f64, tol: f64, max_iter: usize) -> Result<EmqOutcome> {
    non_empty(test)?;
    if !(train_prior > 0.0 && train_prior < 1.0) {
        return Err(Error::InvalidInput(format!("training prior {train_prior} must lie in (0,1)")));
    }
    let mut prior = train_prior;
    let mut posteriors: Vec<f64> = Vec::with_capacity(test.len());
    let mut iterations = 0;
    loop {
        iterations += 1;
        posteriors.clear();
        posteriors.extend(test.iter().map(|&y| emq_rescale(y, prior, train_prior)));
        let next = mean(&posteriors);
        let converged = (next - prior).abs() < tol;
        if converged || iterations >= max_iter {
            let estimate = PrevalenceEstimate::new(next, "EMQ")
                .with(Diagnostics { iterations: Some(iterations), ..Default::default() });
            return Ok(EmqOutcome { estimate, posteriors, last_prior: prior });
        }
        prior = next;
    }
}

pub fn hellinger(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.bin_count() != b.bin_count() {
        return Err(Error::BinMismatch(a.bin_count(), b.bin_count()));
    }
    let bc: f64 = a.densities().iter().zip(b.densities()).map(|(x, y)| (x * y).sqrt()).sum();
    Ok((1.0 - bc).max(0.0).sqrt())
}

/// Grid search for the mixture weight; ties go to the smaller weight.
pub fn hdy_from_histograms(positive: &Histogram, negative: &Histogram, test: &Histogram) -> Result<f64> {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=HDY_GRID_STEPS {
        let p = k as f64 / HDY_GRID_STEPS as f64;
        let d = hellinger(&Histogram::mixture(p, positive, negative)?, test)?;
        if d < best.0 {
            best = (d, p);
        }
    }
    Ok(best.1)
}

/// Validation class histograms `(positive, negative)`.
pub fn class_histograms(val: &ScoredSet, bins: usize) -> Result<(Histogram, Histogram)> {
    val.require_both_classes("validation set")?;
    Ok((build_histogram(&val.class_posteriors(1)?, bins)?, build_histogram(&val.class_posteriors(0)?, bins)?))
}

pub fn hdy(val: &ScoredSet, test: &[f64], bins: usize) -> Result<PrevalenceEstimate> {
    let (pos, neg) = class_histograms(val, bins)?;
    let p = hdy_from_histograms(&pos, &neg, &build_histogram(test, bins)?)?;
    Ok(PrevalenceEstimate::new(p, "HDy"))
}

/// Class-conditional Gaussian KDEs evaluated at the test posteriors.
#[derive(Debug, Clone)]
pub struct KdeMixture {
    pos_density: Vec<f64>,
    neg_density: Vec<f64>,
}

fn gaussian_kde(sample: &[f64], bandwidth: f64, y: f64) -> f64 {
    let norm = 1.0 / (sample.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    norm * sample.iter().map(|&s| (-0.5 * ((y - s) / bandwidth).powi(2)).exp()).sum::<f64>()
}

impl KdeMixture {
    pub fn new(val: &ScoredSet, test: &[f64], bandwidth: f64) -> Result<Self> {
        val.require_both_classes("validation set")?;
        non_empty(test)?;
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidInput("bandwidth must be > 0".into()));
        }
        let pos = val.class_posteriors(1)?;
        let neg = val.class_posteriors(0)?;
        Ok(Self {
            pos_density: test.iter().map(|&y| gaussian_kde(&pos, bandwidth, y)).collect(),
            neg_density: test.iter().map(|&y| gaussian_kde(&neg, bandwidth, y)).collect(),
        })
    }

    /// Mean test log-likelihood of the mixture with weight `p`.
    pub fn log_likelihood(&self, p: f64) -> f64 {
        let total: f64 = self
            .pos_density
            .iter()
            .zip(&self.neg_density)
            .map(|(fp, fn_)| (p * fp + (1.0 - p) * fn_ + KDEY_FLOOR).ln())
            .sum();
        total / self.pos_density.len() as f64
    }

    /// True when both class densities agree at every test point.
    pub fn is_unidentifiable(&self) -> bool {
        self.pos_density
            .iter()
            .zip(&self.neg_density)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(KDEY_FLOOR))
    }

    /// Golden-section maximization of the log-likelihood over `[0,1]`.
    pub fn maximize(&self, tol: f64) -> (f64, usize) {
        if self.is_unidentifiable() {
            return (0.5, 0);
        }
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (self.log_likelihood(c), self.log_likelihood(d));
        let mut iterations = 0;
        while b - a > tol {
            iterations += 1;
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.log_likelihood(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.log_likelihood(d);
            }
        }
        let mid = 0.5 * (a + b);
        // the objective is concave, so a boundary optimum shows up at an endpoint
        let best = [mid, 0.0, 1.0]
            .into_iter()
            .map(|p| (self.log_likelihood(p), p))
            .fold((f64::NEG_INFINITY, mid), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
        (best.1, iterations)
    }
}

pub fn kdey(val: &ScoredSet, test: &[f64], bandwidth: f64) -> Result<PrevalenceEstimate> {
    let (p, iterations) = KdeMixture::new(val, test, bandwidth)?.maximize(KDEY_TOL);
    Ok(PrevalenceEstimate::new(p, "KDEy").with(Diagnostics { iterations: Some(iterations), ..Default::default() }))
}

/// A quantification method, fitted on validation posteriors through
/// [`QuantifierFactory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuantMethod {
    Cc { t: f64 },
    Pcc,
    Acc { t: f64 },
    Pacc,
    /// `train_prior: None` uses the validation prevalence.
    Emq { train_prior: Option<f64> },
    Hdy { bins: usize },
    Kdey { bandwidth: f64 },
}

impl QuantMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cc { .. } => "CC",
            Self::Pcc => "PCC",
            Self::Acc { .. } => "ACC",
            Self::Pacc => "PACC",
            Self::Emq { .. } => "EMQ",
            Self::Hdy { .. } => "HDy",
            Self::Kdey { .. } => "KDEy",
        }
    }
}

/// A quantifier carrying whatever it learned from validation data.
#[derive(Debug, Clone)]
pub enum FittedQuantifier {
    Cc { t: f64 },
    Pcc,
    Acc { t: f64, rates: RateEstimates },
    Pacc { rates: RateEstimates },
    Emq { train_prior: f64 },
    Hdy { positive: Histogram, negative: Histogram },
    Kdey { val: ScoredSet, bandwidth: f64 },
}

impl QuantMethod {
    pub fn fit_on(&self, val: &ScoredSet) -> Result<FittedQuantifier> {
        Ok(match *self {
            Self::Cc { t } => FittedQuantifier::Cc { t },
            Self::Pcc => FittedQuantifier::Pcc,
            Self::Acc { t } => FittedQuantifier::Acc { t, rates: rates_from_scores(val, false, t)? },
            Self::Pacc => FittedQuantifier::Pacc { rates: rates_from_scores(val, true, 0.5)? },
            Self::Emq { train_prior } => {
                let prior = match train_prior {
                    Some(p) => p,
                    None => crate::data::prevalence(val.require_labels()?),
                };
                FittedQuantifier::Emq { train_prior: prior }
            }
            Self::Hdy { bins } => {
                let (positive, negative) = class_histograms(val, bins)?;
                FittedQuantifier::Hdy { positive, negative }
            }
            Self::Kdey { bandwidth } => {
                val.require_both_classes("validation set")?;
                FittedQuantifier::Kdey { val: val.clone(), bandwidth }
            }
        })
    }
}

impl FittedQuantifier {
    pub fn estimate(&self, test: &[f64]) -> Result<PrevalenceEstimate> {
        match self {
            Self::Cc { t } => cc(test, *t),
            Self::Pcc => pcc(test),
            Self::Acc { t, rates } => {
                let mut e = adjust(cc(test, *t)?.p, rates);
                e.method = "ACC".into();
                Ok(e)
            }
            Self::Pacc { rates } => {
                let mut e = adjust(pcc(test)?.p, rates);
                e.method = "PACC".into();
                Ok(e)
            }
            Self::Emq { train_prior } => Ok(emq(test, *train_prior, EMQ_TOL, EMQ_MAX_ITER)?.estimate),
            Self::Hdy { positive, negative } => {
                let p = hdy_from_histograms(positive, negative, &build_histogram(test, positive.bin_count())?)?;
                Ok(PrevalenceEstimate::new(p, "HDy"))
            }
            Self::Kdey { val, bandwidth } => kdey(val, test, *bandwidth),
        }
    }
}

impl Quantifier for FittedQuantifier {
    fn quantify(&self, test: TestView<'_>) -> Result<f64> {
        Ok(self.estimate(&test.posteriors())?.p)
    }
}

impl QuantifierFactory for QuantMethod {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn Quantifier>> {
        Ok(Box::new(self.fit_on(val)?))
    }
}
