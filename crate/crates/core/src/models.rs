//! Small binary probabilistic classifiers: logistic regression, Gaussian
//! naive Bayes and uniform-weight k-nearest neighbours.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, ScoredSet};
use crate::error::{Error, Result};

/// Default decision threshold for the crisp classifier.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const NB_VAR_FLOOR: f64 = 1e-9;

/// Crisp prediction: 1 iff the posterior exceeds `t`.
#[inline]
pub fn crisp(posterior: f64, t: f64) -> u8 {
    (posterior > t) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[serde(alias = "lr", alias = "logistic")]
    LogisticRegression,
    #[serde(alias = "nb", alias = "naive-bayes")]
    GaussianNaiveBayes,
    #[serde(alias = "knn")]
    KNearestNeighbor,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" | "logistic-regression" => Ok(Self::LogisticRegression),
            "nb" | "naive-bayes" | "gaussian-naive-bayes" => Ok(Self::GaussianNaiveBayes),
            "knn" | "k-nearest-neighbor" => Ok(Self::KNearestNeighbor),
            other => Err(Error::InvalidInput(format!(
                "unknown classifier `{other}` (expected logistic, naive-bayes or knn)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LogisticRegression => "logistic-regression",
            Self::GaussianNaiveBayes => "gaussian-naive-bayes",
            Self::KNearestNeighbor => "k-nearest-neighbor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Neighbourhood size for kNN.
    pub k: usize,
    /// Gradient-descent iteration cap for logistic regression.
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { k: 10, max_iter: 10_000, grad_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Iterations used by the fit.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    means: [Vec<f64>; 2],
    variances: [Vec<f64>; 2],
    log_priors: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    train: LabeledSet,
    k: usize,
}

/// A fitted binary probabilistic classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbModel {
    Logistic(LogisticModel),
    NaiveBayes(GaussianNb),
    Knn(KnnModel),
}

pub fn fit(kind: ModelKind, train: &LabeledSet, hp: &Hyperparams) -> Result<ProbModel> {
    match kind {
        ModelKind::LogisticRegression => {
            require_both(train)?;
            Ok(ProbModel::Logistic(LogisticModel::fit(train, hp.max_iter, hp.grad_tol)))
        }
        ModelKind::GaussianNaiveBayes => {
            require_both(train)?;
            Ok(ProbModel::NaiveBayes(GaussianNb::fit(train)))
        }
        ModelKind::KNearestNeighbor => {
            if hp.k == 0 {
                return Err(Error::InvalidInput("k must be >= 1".into()));
            }
            Ok(ProbModel::Knn(KnnModel { train: train.clone(), k: hp.k }))
        }
    }
}

fn require_both(train: &LabeledSet) -> Result<()> {
    for class in [0u8, 1] {
        if train.class_count(class) == 0 {
            return Err(Error::MissingClass { class, context: "training set" });
        }
    }
    Ok(())
}

impl ProbModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Logistic(_) => ModelKind::LogisticRegression,
            Self::NaiveBayes(_) => ModelKind::GaussianNaiveBayes,
            Self::Knn(_) => ModelKind::KNearestNeighbor,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Logistic(m) => m.weights.len(),
            Self::NaiveBayes(m) => m.means[0].len(),
            Self::Knn(m) => m.train.dim(),
        }
    }

    pub fn predict_posterior(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let p = match self {
            Self::Logistic(m) => sigmoid(m.score(x)),
            Self::NaiveBayes(m) => m.posterior(x),
            Self::Knn(m) => m.posterior(x),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn predict_all(&self, data: &LabeledSet) -> Result<Vec<f64>> {
        data.rows().map(|row| self.predict_posterior(row)).collect()
    }

    /// Posteriors on `data`, carrying its labels along.
    pub fn score(&self, data: &LabeledSet) -> Result<ScoredSet> {
        ScoredSet::labeled(self.predict_all(data)?, data.labels().to_vec())
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias, iterations: 0 }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Mean log-loss over `data`.
    pub fn loss(&self, data: &LabeledSet) -> f64 {
        let total: f64 = data
            .rows()
            .zip(data.labels())
            .map(|(x, &y)| {
                let z = self.score(x);
                softplus(z) - y as f64 * z
            })
            .sum();
        total / data.len() as f64
    }

    /// Analytic gradient of [`Self::loss`]: `(d/dw, d/db)`.
    pub fn gradient(&self, data: &LabeledSet) -> (Vec<f64>, f64) {
        let n = data.len() as f64;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (x, &y) in data.rows().zip(data.labels()) {
            let r = sigmoid(self.score(x)) - y as f64;
            for (g, v) in gw.iter_mut().zip(x) {
                *g += r * v;
            }
            gb += r;
        }
        gw.iter_mut().for_each(|g| *g /= n);
        (gw, gb / n)
    }

    /// Full-batch gradient descent from zero with step `1/L`, where `L`
    /// bounds the curvature of the mean log-loss.
    pub fn fit(train: &LabeledSet, max_iter: usize, grad_tol: f64) -> Self {
        let d = train.dim();
        let step = 1.0 / lipschitz_bound(train);
        let mut model = Self::new(vec![0.0; d], 0.0);
        for it in 0..max_iter {
            let (gw, gb) = model.gradient(train);
            let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
            model.iterations = it;
            if norm < grad_tol {
                return model;
            }
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= step * g;
            }
            model.bias -= step * gb;
        }
        model.iterations = max_iter;
        model
    }
}

/// `0.25 * λmax(X̃ᵀX̃ / n)` with `X̃` the features augmented by a constant
/// column, via power iteration (inflated slightly for safety).
fn lipschitz_bound(train: &LabeledSet) -> f64 {
    let d = train.dim() + 1;
    let n = train.len() as f64;
    let mut gram = vec![0.0; d * d];
    for x in train.rows() {
        for i in 0..d {
            let xi = if i < d - 1 { x[i] } else { 1.0 };
            for j in 0..d {
                let xj = if j < d - 1 { x[j] } else { 1.0 };
                gram[i * d + j] += xi * xj / n;
            }
        }
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| gram[i * d + j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    (0.25 * lambda * 1.05).max(1e-12)
}

impl GaussianNb {
    fn fit(train: &LabeledSet) -> Self {
        let d = train.dim();
        let mut means = [vec![0.0; d], vec![0.0; d]];
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (x, &y) in train.rows().zip(train.labels()) {
            counts[y as usize] += 1;
            for (m, v) in means[y as usize].iter_mut().zip(x) {
                *m += v;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        for (x, &y) in train.rows().zip(train.labels()) {
            let c = y as usize;
            for j in 0..d {
                let r = x[j] - means[c][j];
                variances[c][j] += r * r;
            }
        }
        for c in 0..2 {
            variances[c].iter_mut().for_each(|v| *v = (*v / counts[c] as f64).max(NB_VAR_FLOOR));
        }
        let n = train.len() as f64;
        let log_priors = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
        Self { means, variances, log_priors }
    }

    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(self.means[c].iter().zip(&self.variances[c]))
            .map(|(v, (m, var))| -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / var))
            .sum();
        self.log_priors[c] + ll
    }

    fn posterior(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, x) - self.log_joint(0, x))
    }
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Fraction of positives among the `k` nearest training rows (Euclidean);
    /// equal distances go to the lower row index.
    fn posterior(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .train
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let labels = self.train.labels();
        let positives = dist[..k].iter().filter(|&&(_, i)| labels[i] == 1).count();
        positives as f64 / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn separable() -> LabeledSet {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 }]).collect();
        let labels = (0..20).map(|i| (i % 2) as u8).collect();
        LabeledSet::new(rows, labels).unwrap()
    }

    fn crisp_accuracy(model: &ProbModel, data: &LabeledSet) -> f64 {
        let p = model.predict_all(data).unwrap();
        p.iter().zip(data.labels()).filter(|(&p, &y)| crisp(p, 0.5) == y).count() as f64 / data.len() as f64
    }

    #[test]
    fn separable_data_is_fit_perfectly() {
        let data = separable();
        for kind in [ModelKind::LogisticRegression, ModelKind::GaussianNaiveBayes, ModelKind::KNearestNeighbor] {
            let model = fit(kind, &data, &Hyperparams { k: 3, ..Default::default() }).unwrap();
            assert_eq!(crisp_accuracy(&model, &data), 1.0, "{kind}");
        }
    }

    #[test]
    fn single_class_training_rejected() {
        let data = LabeledSet::new(vec![vec![0.0], vec![1.0]], vec![1, 1]).unwrap();
        assert!(fit(ModelKind::LogisticRegression, &data, &Hyperparams::default()).is_err());
        assert!(fit(ModelKind::GaussianNaiveBayes, &data, &Hyperparams::default()).is_err());
    }

    #[test]
    fn knn_posteriors_are_tenths() {
        let data = synth::two_gaussians(300, 0.5, 1.0, 2, 4);
        let model = fit(ModelKind::KNearestNeighbor, &data, &Hyperparams::default()).unwrap();
        let probe = synth::two_gaussians(200, 0.5, 1.0, 2, 5);
        let allowed: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for p in model.predict_all(&probe).unwrap() {
            assert!(allowed.contains(&p), "{p}");
        }
    }

    #[test]
    fn knn_unanimous_neighbourhood() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let labels = (0..30).map(|i| (i >= 15) as u8).collect();
        let data = LabeledSet::new(rows, labels).unwrap();
        let model = fit(ModelKind::KNearestNeighbor, &data, &Hyperparams { k: 10, ..Default::default() }).unwrap();
        assert_eq!(model.predict_posterior(&[29.0]).unwrap(), 1.0);
        assert_eq!(model.predict_posterior(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        // rows 0 and 1 are equidistant from the probe; k = 1 picks row 0
        let data = LabeledSet::new(vec![vec![-1.0], vec![1.0]], vec![0, 1]).unwrap();
        let model = fit(ModelKind::KNearestNeighbor, &data, &Hyperparams { k: 1, ..Default::default() }).unwrap();
        assert_eq!(model.predict_posterior(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_logistic_is_half() {
        let m = ProbModel::Logistic(LogisticModel::new(vec![0.0, 0.0], 0.0));
        assert_eq!(m.predict_posterior(&[3.0, -7.0]).unwrap(), 0.5);
        assert!(m.predict_posterior(&[1.0]).is_err());
    }

    #[test]
    fn naive_bayes_symmetric_midpoint() {
        let model = fit(ModelKind::GaussianNaiveBayes, &separable(), &Hyperparams::default()).unwrap();
        assert!((model.predict_posterior(&[0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn naive_bayes_constant_feature() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.1], vec![1.0, 0.9]];
        let data = LabeledSet::new(rows, vec![0, 1, 0, 1]).unwrap();
        let model = fit(ModelKind::GaussianNaiveBayes, &data, &Hyperparams::default()).unwrap();
        let p = model.predict_posterior(&[1.0, 0.95]).unwrap();
        assert!(p.is_finite() && p > 0.5);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let data = synth::two_gaussians(400, 0.4, 1.0, 3, 9);
        let ProbModel::Logistic(model) = fit(ModelKind::LogisticRegression, &data, &Hyperparams::default()).unwrap()
        else {
            unreachable!()
        };
        let (gw, gb) = model.gradient(&data);
        let h = 1e-5;
        let mut max_diff: f64 = 0.0;
        for j in 0..=model.weights.len() {
            let bump = |delta: f64| {
                let mut m = model.clone();
                if j < m.weights.len() {
                    m.weights[j] += delta;
                } else {
                    m.bias += delta;
                }
                m.loss(&data)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let an = if j < gw.len() { gw[j] } else { gb };
            max_diff = max_diff.max((fd - an).abs());
        }
        assert!(max_diff < 1e-4, "{max_diff}");
        // at the optimum the gradient itself is small
        assert!(gw.iter().chain([&gb]).all(|g| g.abs() < 1e-5));
    }

    #[test]
    fn logistic_posterior_monotone_in_score() {
        let m = LogisticModel::new(vec![2.0], -0.5);
        let model = ProbModel::Logistic(m);
        let mut last = -1.0;
        for i in -50..=50 {
            let p = model.predict_posterior(&[i as f64 / 10.0]).unwrap();
            assert!(p >= last);
            last = p;
        }
    }
}
