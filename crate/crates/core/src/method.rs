//! Interfaces shared by calibrators, quantifiers and accuracy predictors so
//! that the cross-task adaptations can take any of them, oracles included.

use crate::data::ScoredSet;
use crate::error::Result;

/// A test sample seen through the classifier: posteriors of the parent test
/// set plus the rows that belong to the sample.
///
/// Row identities only matter to label-peeking oracles; every other method
/// reads [`TestView::posteriors`] alone.
#[derive(Debug, Clone, Copy)]
pub struct TestView<'a> {
    scores: &'a [f64],
    rows: Option<&'a [usize]>,
}

impl<'a> TestView<'a> {
    pub fn whole(scores: &'a [f64]) -> Self {
        Self { scores, rows: None }
    }

    pub fn subset(scores: &'a [f64], rows: &'a [usize]) -> Self {
        Self { scores, rows: Some(rows) }
    }

    pub fn len(&self) -> usize {
        self.rows.map_or(self.scores.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row ids in the parent test set.
    pub fn rows(&self) -> Vec<usize> {
        match self.rows {
            Some(r) => r.to_vec(),
            None => (0..self.scores.len()).collect(),
        }
    }

    pub fn posteriors(&self) -> Vec<f64> {
        match self.rows {
            Some(r) => r.iter().map(|&i| self.scores[i]).collect(),
            None => self.scores.to_vec(),
        }
    }

    pub fn parent(&self) -> &'a [f64] {
        self.scores
    }

    /// Splits the sample by `keep(posterior)`; both halves share the parent.
    pub fn partition(&self, keep: impl Fn(f64) -> bool) -> (Vec<usize>, Vec<usize>) {
        self.rows().into_iter().partition(|&i| keep(self.scores[i]))
    }
}

/// A fitted score transformation.
pub trait Calibrate: Send + Sync {
    fn calibrate(&self, y: f64) -> f64;

    fn calibrate_all(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.calibrate(y)).collect()
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> Calibrate for F {
    fn calibrate(&self, y: f64) -> f64 {
        self(y)
    }
}

/// Builds a calibrator for `test` from labeled validation scores.
pub trait CalibratorFactory: Send + Sync {
    fn fit(&self, val: &ScoredSet, test: TestView<'_>) -> Result<Box<dyn Calibrate>>;
}

pub trait Quantifier: Send + Sync {
    fn quantify(&self, test: TestView<'_>) -> Result<f64>;
}

pub trait QuantifierFactory: Send + Sync {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn Quantifier>>;
}

pub trait AccuracyPredictor: Send + Sync {
    fn predict(&self, test: TestView<'_>) -> Result<f64>;
}

pub trait AccuracyPredictorFactory: Send + Sync {
    fn fit(&self, val: &ScoredSet) -> Result<Box<dyn AccuracyPredictor>>;
}
