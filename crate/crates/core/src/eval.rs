//! Sampling protocols, evaluation metrics and shift intensity.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::histogram::bin_index;

pub const ECE_BINS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    App,
    CsMixture,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleProtocol {
    pub kind: ProtocolKind,
    pub n_samples: usize,
    pub size: usize,
    pub seed: u64,
}

impl SampleProtocol {
    pub fn new(kind: ProtocolKind, seed: u64) -> Self {
        Self { kind, n_samples: 100, size: 250, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.size == 0 {
            return Err(Error::InvalidInput("protocol needs n_samples >= 1 and size >= 1".into()));
        }
        Ok(())
    }
}

/// Row indices of one generated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    /// Prevalence drawn (APP), fraction drawn from the second pool (CS
    /// mixture), or the realized prevalence (uniform).
    pub target: f64,
    /// Some class or pool was smaller than required.
    pub with_replacement: bool,
}

fn draw(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> (Vec<usize>, bool) {
    if n <= pool.len() {
        let picked = rand::seq::index::sample(rng, pool.len(), n);
        (picked.into_iter().map(|i| pool[i]).collect(), false)
    } else {
        ((0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect(), true)
    }
}

/// Artificial prevalence protocol over rows labeled `labels`.
pub fn app_indices(labels: &[u8], proto: &SampleProtocol) -> Result<Vec<Sample>> {
    proto.validate()?;
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    for (class, pool) in [(0u8, &neg), (1u8, &pos)] {
        if pool.is_empty() {
            return Err(Error::MissingClass { class, context: "APP pool" });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(proto.seed);
    let mut out = Vec::with_capacity(proto.n_samples);
    for _ in 0..proto.n_samples {
        let p: f64 = rng.random();
        out.push(app_sample(&mut rng, &pos, &neg, p, proto.size));
    }
    Ok(out)
}

fn app_sample(rng: &mut ChaCha8Rng, pos: &[usize], neg: &[usize], p: f64, size: usize) -> Sample {
    let n_pos = ((p * size as f64).ceil() as usize).min(size);
    let (mut indices, rp) = draw(rng, pos, n_pos);
    let (neg_idx, rn) = draw(rng, neg, size - n_pos);
    indices.extend(neg_idx);
    Sample { indices, target: p, with_replacement: rp || rn }
}

pub fn app_samples(pool: &LabeledSet, proto: &SampleProtocol) -> Result<Vec<LabeledSet>> {
    app_indices(pool.labels(), proto)?.iter().map(|s| pool.subset(&s.indices)).collect()
}

/// Rows drawn from the first pool by sample `i` (1-based):
/// `ceil(size·(1 − (i−1)/(N−1)))`.
pub fn cs_first_count(i: usize, n_samples: usize, size: usize) -> usize {
    if n_samples <= 1 {
        return size;
    }
    let num = size * (n_samples - i);
    let den = n_samples - 1;
    num.div_ceil(den)
}

/// A sample of the covariate-shift mixture: indices into each pool.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub from_a: Vec<usize>,
    pub from_b: Vec<usize>,
    /// Fraction drawn from the second pool.
    pub target_fraction: f64,
    pub with_replacement: bool,
}

pub fn cs_mixture_indices(len_a: usize, len_b: usize, proto: &SampleProtocol) -> Result<Vec<MixtureSample>> {
    proto.validate()?;
    if len_a == 0 || len_b == 0 {
        return Err(Error::Empty("mixture pool"));
    }
    let (pool_a, pool_b): (Vec<usize>, Vec<usize>) = ((0..len_a).collect(), (0..len_b).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(proto.seed);
    Ok((1..=proto.n_samples)
        .map(|i| {
            let n_a = cs_first_count(i, proto.n_samples, proto.size);
            let (from_a, ra) = draw(&mut rng, &pool_a, n_a);
            let (from_b, rb) = draw(&mut rng, &pool_b, proto.size - n_a);
            MixtureSample {
                from_a,
                from_b,
                target_fraction: (proto.size - n_a) as f64 / proto.size as f64,
                with_replacement: ra || rb,
            }
        })
        .collect())
}

pub fn cs_mixture_samples(a: &LabeledSet, b: &LabeledSet, proto: &SampleProtocol) -> Result<Vec<LabeledSet>> {
    cs_mixture_indices(a.len(), b.len(), proto)?
        .iter()
        .map(|s| a.subset(&s.from_a)?.concat(&b.subset(&s.from_b)?))
        .collect()
}

/// Uniform subsamples of `len` rows; `labels` only fill in the realized
/// prevalence.
pub fn uniform_indices(labels: &[u8], proto: &SampleProtocol) -> Result<Vec<Sample>> {
    proto.validate()?;
    if labels.is_empty() {
        return Err(Error::Empty("sampling pool"));
    }
    let pool: Vec<usize> = (0..labels.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(proto.seed);
    Ok((0..proto.n_samples)
        .map(|_| {
            let (indices, with_replacement) = draw(&mut rng, &pool, proto.size);
            let pos = indices.iter().filter(|&&i| labels[i] == 1).count();
            Sample { target: pos as f64 / indices.len() as f64, indices, with_replacement }
        })
        .collect())
}

fn aligned(posteriors: &[f64], labels: &[u8]) -> Result<()> {
    if posteriors.len() != labels.len() {
        return Err(Error::LengthMismatch { left: posteriors.len(), right: labels.len() });
    }
    if posteriors.is_empty() {
        return Err(Error::Empty("posteriors"));
    }
    Ok(())
}

/// L2 expected calibration error over `bins` equal-width bins.
pub fn ece_l2(posteriors: &[f64], labels: &[u8], bins: usize) -> Result<f64> {
    aligned(posteriors, labels)?;
    if bins == 0 {
        return Err(Error::InvalidBins { bins, reason: "need at least one bin" });
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut pos = vec![0.0; bins];
    for (&y, &l) in posteriors.iter().zip(labels) {
        let i = bin_index(y, bins);
        count[i] += 1;
        conf[i] += y;
        pos[i] += l as f64;
    }
    let n = posteriors.len() as f64;
    Ok((0..bins)
        .filter(|&i| count[i] > 0)
        .map(|i| {
            let c = count[i] as f64;
            c / n * (pos[i] / c - conf[i] / c).powi(2)
        })
        .sum())
}

pub fn brier(posteriors: &[f64], labels: &[u8]) -> Result<f64> {
    aligned(posteriors, labels)?;
    Ok(posteriors.iter().zip(labels).map(|(&y, &l)| (l as f64 - y).powi(2)).sum::<f64>() / posteriors.len() as f64)
}

pub fn ae(truth: f64, estimate: f64) -> f64 {
    (truth - estimate).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    Label { train_prev: f64, sample_prev: f64 },
    Covariate { target_fraction: f64 },
}

pub fn shift_intensity(shift: Shift) -> f64 {
    match shift {
        Shift::Label { train_prev, sample_prev } => (sample_prev - train_prev).abs(),
        Shift::Covariate { target_fraction } => target_fraction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "AE-acc")]
    AeAcc,
    #[serde(rename = "AE-quant")]
    AeQuant,
    Brier,
    #[serde(rename = "ECE")]
    Ece,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AeAcc => "AE-acc",
            Self::AeQuant => "AE-quant",
            Self::Brier => "Brier",
            Self::Ece => "ECE",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub method: String,
    pub dataset: String,
    pub sample_id: usize,
    pub shift_intensity: f64,
    pub metric: Metric,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(pos: usize, neg: usize) -> Vec<u8> {
        let mut l = vec![1u8; pos];
        l.extend(vec![0u8; neg]);
        l
    }

    #[test]
    fn app_boundary_and_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pos: Vec<usize> = (0..300).collect();
        let neg: Vec<usize> = (300..600).collect();
        let all_pos = app_sample(&mut rng, &pos, &neg, 1.0, 250);
        assert!(all_pos.indices.iter().all(|&i| i < 300));
        let half = app_sample(&mut rng, &pos, &neg, 0.5, 250);
        assert_eq!(half.indices.iter().filter(|&&i| i < 300).count(), 125);
        assert_eq!(half.indices.len(), 250);
        assert!(!half.with_replacement);
    }

    #[test]
    fn app_counts_follow_ceiling() {
        let l = labels(400, 400);
        let proto = SampleProtocol { kind: ProtocolKind::App, n_samples: 50, size: 250, seed: 3 };
        for s in app_indices(&l, &proto).unwrap() {
            let n_pos = s.indices.iter().filter(|&&i| l[i] == 1).count();
            assert_eq!(n_pos, (s.target * 250.0).ceil() as usize);
            let mut sorted = s.indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 250, "no duplicates without replacement");
        }
    }

    #[test]
    fn app_deterministic_and_flags_small_pools() {
        let l = labels(20, 500);
        let proto = SampleProtocol { kind: ProtocolKind::App, n_samples: 30, size: 250, seed: 9 };
        let a = app_indices(&l, &proto).unwrap();
        assert_eq!(a, app_indices(&l, &proto).unwrap());
        assert!(a.iter().any(|s| s.with_replacement));
        assert!(app_indices(&labels(0, 10), &proto).is_err());
    }

    #[test]
    fn app_prevalences_uniform_on_grid() {
        let l = labels(300, 300);
        let proto = SampleProtocol { kind: ProtocolKind::App, n_samples: 10_000, size: 250, seed: 5 };
        let mut counts: Vec<usize> = app_indices(&l, &proto)
            .unwrap()
            .iter()
            .map(|s| s.indices.iter().filter(|&&i| l[i] == 1).count())
            .collect();
        counts.sort_unstable();
        // U(0,1) with ceil gives positives uniform on 1..=250
        let n = counts.len() as f64;
        let mut d: f64 = 0.0;
        let mut j = 0;
        for k in 1..=250usize {
            while j < counts.len() && counts[j] <= k {
                j += 1;
            }
            d = d.max((j as f64 / n - k as f64 / 250.0).abs());
        }
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn cs_mixture_counts() {
        assert_eq!(cs_first_count(1, 100, 250), 250);
        assert_eq!(cs_first_count(100, 100, 250), 0);
        assert_eq!(cs_first_count(50, 100, 250), 127);
        assert_eq!(cs_first_count(50, 100, 250), (250.0 * (1.0 - 49.0 / 99.0f64)).ceil() as usize);
        let proto = SampleProtocol { kind: ProtocolKind::CsMixture, n_samples: 100, size: 250, seed: 1 };
        let s = cs_mixture_indices(300, 300, &proto).unwrap();
        assert_eq!((s[0].from_a.len(), s[0].from_b.len()), (250, 0));
        assert_eq!((s[99].from_a.len(), s[99].from_b.len()), (0, 250));
        assert!((shift_intensity(Shift::Covariate { target_fraction: s[49].target_fraction }) - 0.492).abs() < 1e-12);
        assert!(cs_mixture_indices(0, 3, &proto).is_err());
    }

    #[test]
    fn ece_cases() {
        let ys = [0.8; 5];
        assert!((ece_l2(&ys, &[1, 1, 1, 0, 0], 15).unwrap() - 0.04).abs() < 1e-12);
        assert_eq!(ece_l2(&[0.5, 0.5, 0.0, 1.0], &[1, 0, 0, 1], 15).unwrap(), 0.0);
        assert!(ece_l2(&[0.5], &[1, 0], 15).is_err());
    }

    fn naive_ece(ys: &[f64], ls: &[u8], bins: usize) -> f64 {
        let mut total = 0.0;
        for b in 0..bins {
            let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
            let members: Vec<usize> = (0..ys.len())
                .filter(|&i| ys[i] >= lo && (ys[i] < hi || (b == bins - 1 && ys[i] <= 1.0)))
                .collect();
            if members.is_empty() {
                continue;
            }
            let m = members.len() as f64;
            let conf: f64 = members.iter().map(|&i| ys[i]).sum::<f64>() / m;
            let frac: f64 = members.iter().map(|&i| ls[i] as f64).sum::<f64>() / m;
            total += m / ys.len() as f64 * (frac - conf) * (frac - conf);
        }
        total
    }

    #[test]
    fn brier_cases() {
        assert_eq!(brier(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
        assert!((brier(&[0.5; 4], &[1, 0, 1, 1]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ae_cases() {
        assert_eq!(ae(0.5, 0.5), 0.0);
        assert!((ae(0.2, 0.8) - 0.6).abs() < 1e-15);
        assert_eq!(shift_intensity(Shift::Label { train_prev: 0.5, sample_prev: 0.5 }), 0.0);
        assert!((shift_intensity(Shift::Label { train_prev: 0.1, sample_prev: 0.9 }) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn metric_names() {
        assert_eq!(serde_json::to_string(&Metric::AeQuant).unwrap(), "\"AE-quant\"");
        assert_eq!(Metric::Ece.to_string(), "ECE");
    }

    proptest! {
        #[test]
        fn ece_matches_double_loop(pairs in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 1..120)) {
            let (ys, ls): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
            prop_assert!((ece_l2(&ys, &ls, 15).unwrap() - naive_ece(&ys, &ls, 15)).abs() < 1e-12);
        }

        #[test]
        fn brier_matches_summation(pairs in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 1..120)) {
            let (ys, ls): (Vec<f64>, Vec<u8>) = pairs.iter().copied().unzip();
            let mut acc = 0.0;
            for (y, l) in &pairs {
                let r = if *l == 1 { 1.0 - y } else { *y };
                acc += r * r;
            }
            let b = brier(&ys, &ls).unwrap();
            prop_assert!((b - acc / pairs.len() as f64).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&b));
        }

        #[test]
        fn metrics_permutation_invariant(pairs in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 2..60)) {
            let (ys, ls): (Vec<f64>, Vec<u8>) = pairs.iter().copied().unzip();
            let (ry, rl): (Vec<f64>, Vec<u8>) = pairs.iter().rev().copied().unzip();
            prop_assert!((ece_l2(&ys, &ls, 15).unwrap() - ece_l2(&ry, &rl, 15).unwrap()).abs() < 1e-12);
            prop_assert!((brier(&ys, &ls).unwrap() - brier(&ry, &rl).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ae_symmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assert_eq!(ae(a, b), ae(b, a));
        }
    }
}
