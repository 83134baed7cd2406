//! Adaptations turning a method for one task into a method for another.
//!
//! | from \ to   | quantification | accuracy | calibration |
//! |-------------|----------------|----------|-------------|
//! | calibration | [`cal_to_quant`] | [`cal_to_acc`] | |
//! | quantification | | [`quant_to_acc`] | [`quant_to_cal`] |
//! | accuracy    | [`acc_to_quant`] | | [`acc_to_cal`] |
//!
//! Each adaptation is also available as a factory wrapper so that it plugs
//! into code written against the task traits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calibrate::{Calibrator, CalibratorForm};
use crate::calmap::postprocess_to_map;
use crate::cap::AccuracyEstimate;
use crate::data::ScoredSet;
use crate::error::{Error, Result};
use crate::histogram::{bin_center, bin_index};
use crate::method::{
    AccuracyPredictor, AccuracyPredictorFactory, Calibrate, CalibratorFactory, Quantifier, QuantifierFactory, TestView,
};
use crate::models::crisp;
use crate::quantify::PrevalenceEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub bins_quant_to_cal: usize,
    pub bins_acc_to_cal: usize,
    pub t: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { bins_quant_to_cal: 5, bins_acc_to_cal: 6, t: 0.5 }
    }
}

impl BridgeConfig {
    pub fn validate(&self) -> Result<()> {
        check_quant_bins(self.bins_quant_to_cal)?;
        check_acc_bins(self.bins_acc_to_cal)
    }
}

fn check_quant_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidBins { bins, reason: "need at least two bins" });
    }
    Ok(())
}

fn check_acc_bins(bins: usize) -> Result<()> {
    if bins < 2 || !bins.is_multiple_of(2) {
        return Err(Error::InvalidBins { bins, reason: "need an even number of bins, at least two" });
    }
    Ok(())
}

/// Mean of the calibrated test posteriors.
pub fn cal_to_quant(cal: &dyn Calibrate, test: &[f64]) -> Result<PrevalenceEstimate> {
    if test.is_empty() {
        return Err(Error::Empty("test posteriors"));
    }
    let p = cal.calibrate_all(test).iter().sum::<f64>() / test.len() as f64;
    Ok(PrevalenceEstimate::new(p, "cal2quant"))
}

/// Validation and test split by the crisp prediction at `t`.
struct Partitions {
    val_pos: ScoredSet,
    val_neg: ScoredSet,
    test_pos: Vec<usize>,
    test_neg: Vec<usize>,
}

fn partitions(val: &ScoredSet, test: TestView<'_>, t: f64) -> Partitions {
    let (vp, vn) = val.crisp_partition(t);
    let (test_pos, test_neg) = test.partition(|y| crisp(y, t) == 1);
    Partitions { val_pos: val.subset(&vp), val_neg: val.subset(&vn), test_pos, test_neg }
}

/// One calibrator per predicted class; accuracy is the expected number of
/// correct predictions under the calibrated posteriors.
pub fn cal_to_acc(factory: &dyn CalibratorFactory, val: &ScoredSet, test: TestView<'_>, t: f64) -> Result<AccuracyEstimate> {
    let parts = partitions(val, test, t);
    for (side, empty) in [
        ("validation positive", parts.val_pos.is_empty()),
        ("validation negative", parts.val_neg.is_empty()),
        ("test positive", parts.test_pos.is_empty()),
        ("test negative", parts.test_neg.is_empty()),
    ] {
        if empty {
            return Err(Error::EmptyPartition { side });
        }
    }
    let scores = test.parent();
    let cal_pos = factory.fit(&parts.val_pos, TestView::subset(scores, &parts.test_pos))?;
    let cal_neg = factory.fit(&parts.val_neg, TestView::subset(scores, &parts.test_neg))?;
    let correct_pos: f64 = parts.test_pos.iter().map(|&i| cal_pos.calibrate(scores[i])).sum();
    let correct_neg: f64 = parts.test_neg.iter().map(|&i| 1.0 - cal_neg.calibrate(scores[i])).sum();
    Ok(AccuracyEstimate { acc: (correct_pos + correct_neg) / test.len() as f64, method: "cal2acc".into() })
}

/// Test rows grouped into `bins` equal-width posterior bins.
fn bin_rows(test: TestView<'_>, bins: usize, assign: impl Fn(f64) -> usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); bins];
    for i in test.rows() {
        out[assign(test.parent()[i])].push(i);
    }
    out
}

/// Per-bin prevalence estimates before post-processing; empty bins get the
/// bin center.
pub fn quant_to_cal_raw(factory: &dyn QuantifierFactory, val: &ScoredSet, test: TestView<'_>, bins: usize) -> Result<Vec<f64>> {
    check_quant_bins(bins)?;
    let quantifier = factory.fit(val)?;
    bin_rows(test, bins, |y| bin_index(y, bins))
        .iter()
        .enumerate()
        .map(|(b, rows)| {
            if rows.is_empty() {
                return Ok(bin_center(b, bins));
            }
            quantifier
                .quantify(TestView::subset(test.parent(), rows))
                .map_err(|e| Error::InBin { bin: b, source: Box::new(e) })
        })
        .collect()
}

pub fn quant_to_cal(factory: &dyn QuantifierFactory, val: &ScoredSet, test: TestView<'_>, bins: usize) -> Result<Calibrator> {
    let raw = quant_to_cal_raw(factory, val, test, bins)?;
    Ok(Calibrator::new("quant2cal", CalibratorForm::Map { knots: postprocess_to_map(&raw)? }))
}

/// Per-side estimates from side-specific sub-methods, combined as
/// `(s⊕·|D⊕| + (1−s⊖)·|D⊖|) / |D|`. Empty test sides are skipped.
fn combine_sides(
    val: &ScoredSet,
    test: TestView<'_>,
    t: f64,
    mut estimate: impl FnMut(&ScoredSet, TestView<'_>) -> Result<f64>,
) -> Result<f64> {
    let parts = partitions(val, test, t);
    if parts.test_pos.is_empty() && parts.test_neg.is_empty() {
        return Err(Error::EmptyPartition { side: "both test" });
    }
    let scores = test.parent();
    let mut total = 0.0;
    if !parts.test_pos.is_empty() {
        if parts.val_pos.is_empty() {
            return Err(Error::EmptyPartition { side: "validation positive" });
        }
        total += estimate(&parts.val_pos, TestView::subset(scores, &parts.test_pos))? * parts.test_pos.len() as f64;
    }
    if !parts.test_neg.is_empty() {
        if parts.val_neg.is_empty() {
            return Err(Error::EmptyPartition { side: "validation negative" });
        }
        total += (1.0 - estimate(&parts.val_neg, TestView::subset(scores, &parts.test_neg))?) * parts.test_neg.len() as f64;
    }
    Ok((total / test.len() as f64).clamp(0.0, 1.0))
}

/// Accuracy from the prevalence of positives among predicted positives and
/// predicted negatives.
pub fn quant_to_acc(factory: &dyn QuantifierFactory, val: &ScoredSet, test: TestView<'_>, t: f64) -> Result<AccuracyEstimate> {
    let acc = combine_sides(val, test, t, |v, side| factory.fit(v)?.quantify(side))?;
    Ok(AccuracyEstimate { acc, method: "quant2acc".into() })
}

/// Prevalence from the accuracy on predicted positives and predicted
/// negatives.
pub fn acc_to_quant(factory: &dyn AccuracyPredictorFactory, val: &ScoredSet, test: TestView<'_>, t: f64) -> Result<PrevalenceEstimate> {
    let p = combine_sides(val, test, t, |v, side| factory.fit(v)?.predict(side))?;
    Ok(PrevalenceEstimate::new(p, "acc2quant"))
}

/// Bin for the accuracy-based calibration map. Posteriors of exactly 0.5
/// are predicted negative, so they go to the last lower-half bin.
fn acc_bin(y: f64, bins: usize) -> usize {
    let b = bin_index(y, bins);
    if y <= 0.5 && b >= bins / 2 {
        bins / 2 - 1
    } else {
        b
    }
}

/// Per-bin positive fraction implied by predicted accuracy: `a_i` in the
/// upper half, `1 − a_i` in the lower half; empty bins get the bin center.
pub fn acc_to_cal_raw(factory: &dyn AccuracyPredictorFactory, val: &ScoredSet, test: TestView<'_>, bins: usize) -> Result<Vec<f64>> {
    check_acc_bins(bins)?;
    let predictor = factory.fit(val)?;
    bin_rows(test, bins, |y| acc_bin(y, bins))
        .iter()
        .enumerate()
        .map(|(b, rows)| {
            if rows.is_empty() {
                return Ok(bin_center(b, bins));
            }
            let a = predictor
                .predict(TestView::subset(test.parent(), rows))
                .map_err(|e| Error::InBin { bin: b, source: Box::new(e) })?;
            Ok(if b >= bins / 2 { a } else { 1.0 - a })
        })
        .collect()
}

pub fn acc_to_cal(factory: &dyn AccuracyPredictorFactory, val: &ScoredSet, test: TestView<'_>, bins: usize) -> Result<Calibrator> {
    let raw = acc_to_cal_raw(factory, val, test, bins)?;
    Ok(Calibrator::new("acc2cal", CalibratorForm::Map { knots: postprocess_to_map(&raw)? }))
}

/// Quantifier that averages calibrated test posteriors.
pub struct CalToQuant(pub Arc<dyn CalibratorFactory>);

struct FittedCalToQuant {
    cal: Arc<dyn CalibratorFactory>,
    val: ScoredSet,
}

impl QuantifierFactory for CalToQuant {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn Quantifier>> {
        Ok(Box::new(FittedCalToQuant { cal: Arc::clone(&self.0), val: val.clone() }))
    }
}

impl Quantifier for FittedCalToQuant {
    fn quantify(&self, test: TestView<'_>) -> Result<f64> {
        let cal = self.cal.fit(&self.val, test)?;
        Ok(cal_to_quant(cal.as_ref(), &test.posteriors())?.p)
    }
}

pub struct CalToAcc {
    pub cal: Arc<dyn CalibratorFactory>,
    pub t: f64,
}

struct FittedCalToAcc {
    cal: Arc<dyn CalibratorFactory>,
    val: ScoredSet,
    t: f64,
}

impl AccuracyPredictorFactory for CalToAcc {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn AccuracyPredictor>> {
        Ok(Box::new(FittedCalToAcc { cal: Arc::clone(&self.cal), val: val.clone(), t: self.t }))
    }
}

impl AccuracyPredictor for FittedCalToAcc {
    fn predict(&self, test: TestView<'_>) -> Result<f64> {
        Ok(cal_to_acc(self.cal.as_ref(), &self.val, test, self.t)?.acc)
    }
}

pub struct QuantToCal {
    pub quant: Arc<dyn QuantifierFactory>,
    pub bins: usize,
}

impl CalibratorFactory for QuantToCal {
    fn fit(&self, val: &ScoredSet, test: TestView<'_>) -> Result<Box<dyn Calibrate>> {
        Ok(Box::new(quant_to_cal(self.quant.as_ref(), val, test, self.bins)?))
    }
}

pub struct QuantToAcc {
    pub quant: Arc<dyn QuantifierFactory>,
    pub t: f64,
}

struct FittedQuantToAcc {
    quant: Arc<dyn QuantifierFactory>,
    val: ScoredSet,
    t: f64,
}

impl AccuracyPredictorFactory for QuantToAcc {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn AccuracyPredictor>> {
        Ok(Box::new(FittedQuantToAcc { quant: Arc::clone(&self.quant), val: val.clone(), t: self.t }))
    }
}

impl AccuracyPredictor for FittedQuantToAcc {
    fn predict(&self, test: TestView<'_>) -> Result<f64> {
        Ok(quant_to_acc(self.quant.as_ref(), &self.val, test, self.t)?.acc)
    }
}

pub struct AccToQuant {
    pub acc: Arc<dyn AccuracyPredictorFactory>,
    pub t: f64,
}

struct FittedAccToQuant {
    acc: Arc<dyn AccuracyPredictorFactory>,
    val: ScoredSet,
    t: f64,
}

impl QuantifierFactory for AccToQuant {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn Quantifier>> {
        Ok(Box::new(FittedAccToQuant { acc: Arc::clone(&self.acc), val: val.clone(), t: self.t }))
    }
}

impl Quantifier for FittedAccToQuant {
    fn quantify(&self, test: TestView<'_>) -> Result<f64> {
        Ok(acc_to_quant(self.acc.as_ref(), &self.val, test, self.t)?.p)
    }
}

pub struct AccToCal {
    pub acc: Arc<dyn AccuracyPredictorFactory>,
    pub bins: usize,
}

impl CalibratorFactory for AccToCal {
    fn fit(&self, val: &ScoredSet, test: TestView<'_>) -> Result<Box<dyn Calibrate>> {
        Ok(Box::new(acc_to_cal(self.acc.as_ref(), val, test, self.bins)?))
    }
}
