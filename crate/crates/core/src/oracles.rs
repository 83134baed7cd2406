//! Label-peeking calibrator, quantifier and accuracy predictor, and the
//! check that the task adaptations turn each of them into the others
//! exactly.
//!
//! Oracles see the hidden labels through an [`OracleContext`]; the
//! [`TestView`]s they receive must index into the context's scores.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bridges::{acc_to_quant, cal_to_acc, cal_to_quant, quant_to_acc, AccToQuant};
use crate::data::{LabeledSet, ScoredSet};
use crate::error::{Error, Result};
use crate::method::{
    AccuracyPredictor, AccuracyPredictorFactory, Calibrate, CalibratorFactory, Quantifier, QuantifierFactory, TestView,
};
use crate::models::{crisp, ProbModel};

pub const LEMMA_TOLERANCE: f64 = 1e-12;

/// Exact-equality key for a score; `-0.0` and `0.0` share a group.
fn score_key(y: f64) -> u64 {
    if y == 0.0 {
        0.0f64.to_bits()
    } else {
        y.to_bits()
    }
}

/// Test scores together with their hidden labels.
#[derive(Debug, Clone)]
pub struct OracleContext {
    scores: Vec<f64>,
    labels: Vec<u8>,
    t: f64,
}

impl OracleContext {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, t: f64) -> Result<Self> {
        ScoredSet::labeled(scores.clone(), labels.clone())?;
        Ok(Self { scores, labels, t })
    }

    pub fn from_model(model: &ProbModel, test: &LabeledSet, t: f64) -> Result<Self> {
        Self::new(model.predict_all(test)?, test.labels().to_vec(), t)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.t
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    pub fn view(&self) -> TestView<'_> {
        TestView::whole(&self.scores)
    }

    /// True positive fraction of `rows`.
    pub fn oracle_quant(&self, rows: &[usize]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::Empty("oracle subset"));
        }
        Ok(rows.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / rows.len() as f64)
    }

    /// True accuracy of the thresholded scores on `rows`.
    pub fn oracle_acc(&self, rows: &[usize]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::Empty("oracle subset"));
        }
        let correct = rows.iter().filter(|&&i| crisp(self.scores[i], self.t) == self.labels[i]).count();
        Ok(correct as f64 / rows.len() as f64)
    }

    fn check_view(&self, view: TestView<'_>) -> Result<()> {
        if view.parent().len() != self.len() {
            return Err(Error::InvalidInput("oracle queried on a sample of a different test set".into()));
        }
        Ok(())
    }

    /// Labeled copy of the context's scores.
    fn scored(&self) -> ScoredSet {
        ScoredSet::labeled(self.scores.clone(), self.labels.clone()).expect("validated at construction")
    }
}

/// Positive fraction among the rows that share each exact score.
pub fn oracle_calibrate(labels: &[u8], raw: &[f64]) -> Result<Vec<f64>> {
    if labels.len() != raw.len() {
        return Err(Error::LengthMismatch { left: raw.len(), right: labels.len() });
    }
    let groups = group_fractions(raw.iter().copied().zip(labels.iter().map(|&l| l as f64)));
    Ok(raw.iter().map(|&y| groups[&score_key(y)]).collect())
}

/// Mean of `values` per exact key.
fn group_fractions(pairs: impl Iterator<Item = (f64, f64)>) -> BTreeMap<u64, f64> {
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (k, v) in pairs {
        let e = sums.entry(score_key(k)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Largest gap between a calibrated value and the positive fraction among
/// the rows sharing that value.
pub fn calibration_residual(calibrated: &[f64], labels: &[u8]) -> f64 {
    let groups = group_fractions(calibrated.iter().copied().zip(labels.iter().map(|&l| l as f64)));
    calibrated
        .iter()
        .map(|&v| (v - groups[&score_key(v)]).abs())
        .fold(0.0, f64::max)
}

/// Calibrator mapping each score to a precomputed per-score value;
/// unseen scores pass through.
#[derive(Debug, Clone)]
pub struct LookupCalibrator(BTreeMap<u64, f64>);

impl Calibrate for LookupCalibrator {
    fn calibrate(&self, y: f64) -> f64 {
        self.0.get(&score_key(y)).copied().unwrap_or(y)
    }
}

pub struct OracleCalibrator(pub Arc<OracleContext>);

impl CalibratorFactory for OracleCalibrator {
    fn fit(&self, _val: &ScoredSet, test: TestView<'_>) -> Result<Box<dyn Calibrate>> {
        self.0.check_view(test)?;
        let ctx = &self.0;
        let groups = group_fractions(test.rows().into_iter().map(|i| (ctx.scores[i], ctx.labels[i] as f64)));
        Ok(Box::new(LookupCalibrator(groups)))
    }
}

pub struct OracleQuantifier(pub Arc<OracleContext>);

impl QuantifierFactory for OracleQuantifier {
    fn fit(&self, _val: &ScoredSet) -> Result<Box<dyn Quantifier>> {
        Ok(Box::new(OracleQuantifier(Arc::clone(&self.0))))
    }
}

impl Quantifier for OracleQuantifier {
    fn quantify(&self, test: TestView<'_>) -> Result<f64> {
        self.0.check_view(test)?;
        self.0.oracle_quant(&test.rows())
    }
}

pub struct OracleAccuracy(pub Arc<OracleContext>);

impl AccuracyPredictorFactory for OracleAccuracy {
    fn fit(&self, _val: &ScoredSet) -> Result<Box<dyn AccuracyPredictor>> {
        Ok(Box::new(OracleAccuracy(Arc::clone(&self.0))))
    }
}

impl AccuracyPredictor for OracleAccuracy {
    fn predict(&self, test: TestView<'_>) -> Result<f64> {
        self.0.check_view(test)?;
        self.0.oracle_acc(&test.rows())
    }
}

/// Calibrator that queries a quantifier on each group of equal scores.
pub struct GroupedQuantToCal(pub Arc<dyn QuantifierFactory>);

impl CalibratorFactory for GroupedQuantToCal {
    fn fit(&self, val: &ScoredSet, test: TestView<'_>) -> Result<Box<dyn Calibrate>> {
        let quantifier = self.0.fit(val)?;
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for i in test.rows() {
            groups.entry(score_key(test.parent()[i])).or_default().push(i);
        }
        let mut values = BTreeMap::new();
        for (k, rows) in groups {
            values.insert(k, quantifier.quantify(TestView::subset(test.parent(), &rows))?);
        }
        Ok(Box::new(LookupCalibrator(values)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub description: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub n: usize,
    pub distinct_scores: usize,
    pub true_prevalence: f64,
    pub true_accuracy: f64,
    pub tolerance: f64,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "n={} distinct scores={} prevalence={:.6} accuracy={:.6}",
            self.n, self.distinct_scores, self.true_prevalence, self.true_accuracy
        )?;
        writeln!(f, "{:<32} {:>12}  status", "check", "residual")?;
        for c in &self.checks {
            writeln!(f, "{:<32} {:>12.3e}  {}", c.name, c.residual, if c.passed { "ok" } else { "FAIL" })?;
        }
        Ok(())
    }
}

/// Runs every oracle-based adaptation and measures how far each lands from
/// the true quantity.
pub fn verify_reductions(ctx: &OracleContext) -> Result<LemmaReport> {
    let (pos, neg) = ctx.view().partition(|y| crisp(y, ctx.t) == 1);
    if pos.is_empty() {
        return Err(Error::EmptyPartition { side: "test positive" });
    }
    if neg.is_empty() {
        return Err(Error::EmptyPartition { side: "test negative" });
    }
    let shared = Arc::new(ctx.clone());
    let view = ctx.view();
    // oracles ignore validation data; the adaptations only need its partitions
    let val = ctx.scored();
    let rows = ctx.all_rows();
    let rho = ctx.oracle_quant(&rows)?;
    let alpha = ctx.oracle_acc(&rows)?;

    let oracle_cal = OracleCalibrator(Arc::clone(&shared));
    let oracle_quant: Arc<dyn QuantifierFactory> = Arc::new(OracleQuantifier(Arc::clone(&shared)));
    let oracle_acc: Arc<dyn AccuracyPredictorFactory> = Arc::new(OracleAccuracy(Arc::clone(&shared)));

    let cal = oracle_cal.fit(&val, view)?;
    let r_cal_quant = (cal_to_quant(cal.as_ref(), ctx.scores())?.p - rho).abs();

    let r_cal_acc = (cal_to_acc(&oracle_cal, &val, view, ctx.t)?.acc - alpha).abs();

    let quant_cal = GroupedQuantToCal(Arc::clone(&oracle_quant));
    let calibrated = quant_cal.fit(&val, view)?.calibrate_all(ctx.scores());
    let r_quant_cal = calibration_residual(&calibrated, &ctx.labels);

    let direct = (quant_to_acc(oracle_quant.as_ref(), &val, view, ctx.t)?.acc - alpha).abs();
    let composed = (cal_to_acc(&quant_cal, &val, view, ctx.t)?.acc - alpha).abs();
    let r_quant_acc = direct.max(composed);

    let r_acc_quant = (acc_to_quant(oracle_acc.as_ref(), &val, view, ctx.t)?.p - rho).abs();

    let acc_cal = GroupedQuantToCal(Arc::new(AccToQuant { acc: Arc::clone(&oracle_acc), t: ctx.t }));
    let calibrated = acc_cal.fit(&val, view)?.calibrate_all(ctx.scores());
    let r_acc_cal = calibration_residual(&calibrated, &ctx.labels);

    let check = |name: &str, description: &str, residual: f64| LemmaCheck {
        name: name.to_owned(),
        description: description.to_owned(),
        residual,
        passed: residual < LEMMA_TOLERANCE,
    };
    let distinct = group_fractions(ctx.scores.iter().map(|&y| (y, 0.0))).len();
    Ok(LemmaReport {
        n: ctx.len(),
        distinct_scores: distinct,
        true_prevalence: rho,
        true_accuracy: alpha,
        tolerance: LEMMA_TOLERANCE,
        checks: vec![
            check("calibration-to-quantification", "mean of oracle-calibrated scores vs true prevalence", r_cal_quant),
            check("calibration-to-accuracy", "per-side oracle calibrators vs true accuracy", r_cal_acc),
            check("quantification-to-calibration", "per-score oracle prevalence vs calibration condition", r_quant_cal),
            check("quantification-to-accuracy", "per-side oracle prevalence, direct and via calibration, vs true accuracy", r_quant_acc),
            check("accuracy-to-quantification", "per-side oracle accuracy vs true prevalence", r_acc_quant),
            check("accuracy-to-calibration", "per-score prevalence from oracle accuracy vs calibration condition", r_acc_cal),
        ],
    })
}
