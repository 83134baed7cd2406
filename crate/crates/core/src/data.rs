//! Labeled feature sets, scored sets and stratified splitting.
//!
//! CSV layout: a header row, feature columns `f0..f{d-1}` holding decimal
//! reals, and a final `label` column with values in `{0,1}`.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature rows (row-major) with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("labeled set"))?;
        if dim == 0 {
            return Err(Error::InvalidInput("feature dimension must be >= 1".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(features, dim, labels)
    }

    pub fn from_flat(features: Vec<f64>, dim: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("labeled set"));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("feature dimension must be >= 1".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::LengthMismatch { left: features.len() / dim, right: labels.len() });
        }
        check_labels(&labels)?;
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: index / dim });
        }
        Ok(Self { features, dim, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn prevalence(&self) -> f64 {
        prevalence(&self.labels)
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&y| y == class).count()
    }

    /// Rows at `indices`, in the given order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidInput(format!("row index {i} out of range")));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::from_flat(features, self.dim, labels)
    }

    /// Concatenates two sets with the same dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::from_flat(features, self.dim, labels)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let n_cols = headers.len();
        if n_cols < 2 || &headers[n_cols - 1] != "label" {
            return Err(Error::InvalidInput("expected feature columns followed by a final `label` column".into()));
        }
        let dim = n_cols - 1;
        for (j, name) in headers.iter().take(dim).enumerate() {
            if name != format!("f{j}") {
                return Err(Error::InvalidInput(format!("column {j} should be named f{j}, found `{name}`")));
            }
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            for field in record.iter().take(dim) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("row {}: cannot parse `{field}` as a real", line + 1)))?;
                features.push(v);
            }
            let label = match &record[dim] {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::InvalidInput(format!("row {}: label `{other}` is not 0 or 1", line + 1))),
            };
            labels.push(label);
        }
        Self::from_flat(features, dim, labels)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        wtr.write_record(&header)?;
        for (row, &y) in self.rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Posteriors for the positive class, optionally aligned with true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    posteriors: Vec<f64>,
    labels: Option<Vec<u8>>,
}

impl ScoredSet {
    pub fn new(posteriors: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        for (i, &p) in posteriors.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("posterior {p} at position {i} is outside [0,1]")));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != posteriors.len() {
                return Err(Error::LengthMismatch { left: posteriors.len(), right: labels.len() });
            }
            check_labels(labels)?;
        }
        Ok(Self { posteriors, labels })
    }

    pub fn labeled(posteriors: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        Self::new(posteriors, Some(labels))
    }

    pub fn unlabeled(posteriors: Vec<f64>) -> Result<Self> {
        Self::new(posteriors, None)
    }

    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }

    pub fn posteriors(&self) -> &[f64] {
        &self.posteriors
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Labels, or an error when the set carries none.
    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels().ok_or_else(|| Error::InvalidInput("scored set has no labels".into()))
    }

    /// Fails unless the set is labeled and contains both classes.
    pub fn require_both_classes(&self, context: &'static str) -> Result<&[u8]> {
        let labels = self.require_labels()?;
        for class in [0u8, 1] {
            if !labels.contains(&class) {
                return Err(Error::MissingClass { class, context });
            }
        }
        Ok(labels)
    }

    /// Posteriors of the rows whose label equals `class`.
    pub fn class_posteriors(&self, class: u8) -> Result<Vec<f64>> {
        let labels = self.require_labels()?;
        Ok(self.posteriors.iter().zip(labels).filter(|(_, &y)| y == class).map(|(&p, _)| p).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            posteriors: indices.iter().map(|&i| self.posteriors[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Indices predicted positive (`posterior > t`) and negative.
    pub fn crisp_partition(&self, t: f64) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&i| self.posteriors[i] > t)
    }
}

/// Fractions for a train/validation/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self> {
        let spec = Self { train_fraction, val_fraction, test_fraction, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("split fractions must all be > 0".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }
}

/// Splits `total` items into parts proportional to `fractions` by largest
/// remainder; ties go to the earlier part.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let sum: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| total as f64 * f / sum).collect();
    let mut parts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - parts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        parts[i] += 1;
        left -= 1;
    }
    parts
}

/// Stratified train/validation/test partition of row indices.
///
/// Each class is shuffled with its own ChaCha stream derived from the seed.
/// The returned index lists are sorted ascending.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    spec.validate()?;
    check_labels(labels)?;
    let sizes = apportion(labels.len(), &spec.fractions());

    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y as usize].push(i);
    }

    // Positives are apportioned across splits by largest remainder; negatives
    // fill the rest, so both classes stay within one row of proportional.
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let pos = apportion(by_class[1].len(), &weights);
    let mut alloc = [[0usize; 3]; 2];
    for s in 0..3 {
        alloc[1][s] = pos[s];
        alloc[0][s] = sizes[s] - pos[s];
    }

    for (c, row) in alloc.iter().enumerate() {
        if row.contains(&0) {
            return Err(Error::CannotStratify { class: c as u8 });
        }
    }

    let mut out: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (c, idx) in by_class.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(c as u64 + 1);
        idx.shuffle(&mut rng);
        let mut start = 0;
        for (s, part) in out.iter_mut().enumerate() {
            part.extend_from_slice(&idx[start..start + alloc[c][s]]);
            start += alloc[c][s];
        }
    }
    for part in &mut out {
        part.sort_unstable();
    }
    Ok(out)
}

/// Stratified (train, validation, test) split of a labeled set.
pub fn split_stratified(data: &LabeledSet, spec: &SplitSpec) -> Result<(LabeledSet, LabeledSet, LabeledSet)> {
    let [tr, va, te] = split_indices(data.labels(), spec)?;
    Ok((data.subset(&tr)?, data.subset(&va)?, data.subset(&te)?))
}

pub fn prevalence(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|&&y| y == 1).count() as f64 / labels.len() as f64
}

pub(crate) fn check_labels(labels: &[u8]) -> Result<()> {
    match labels.iter().position(|&y| y > 1) {
        Some(i) => Err(Error::InvalidInput(format!("label {} at row {i} is not 0 or 1", labels[i]))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced(n: usize) -> LabeledSet {
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        LabeledSet::new(rows, labels).unwrap()
    }

    #[test]
    fn split_sizes_follow_fractions() {
        let data = balanced(100);
        let spec = SplitSpec::new(0.5, 0.25, 0.25, 3).unwrap();
        let (tr, va, te) = split_stratified(&data, &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (50, 25, 25));
        assert_eq!(tr.class_count(1), 25);
        for part in [&va, &te] {
            let pos = part.class_count(1) as f64;
            assert!((pos - 12.5).abs() <= 1.0, "positives {pos}");
        }
    }

    #[test]
    fn split_rejects_single_class() {
        let data = LabeledSet::new(vec![vec![0.0]; 4], vec![1; 4]).unwrap();
        let spec = SplitSpec::new(0.5, 0.25, 0.25, 0).unwrap();
        let err = split_stratified(&data, &spec).unwrap_err();
        assert!(matches!(err, Error::CannotStratify { class: 0 }), "{err}");
    }

    #[test]
    fn split_is_deterministic() {
        let labels: Vec<u8> = (0..1000).map(|i| ((i * 7919) % 3 == 0) as u8).collect();
        let spec = SplitSpec::new(0.35, 0.35, 0.3, 7).unwrap();
        let a = split_indices(&labels, &spec).unwrap();
        let b = split_indices(&labels, &spec).unwrap();
        assert_eq!(format!("{a:?}").into_bytes(), format!("{b:?}").into_bytes());
    }

    #[test]
    fn bad_fractions_rejected() {
        assert!(SplitSpec::new(0.5, 0.5, 0.0, 0).is_err());
        assert!(SplitSpec::new(0.5, 0.3, 0.3, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = LabeledSet::new(vec![vec![0.5, -1.25], vec![3.0, 1e-3]], vec![1, 0]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,label\n"));
        assert_eq!(LabeledSet::read_csv(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn csv_rejects_bad_label() {
        let text = "f0,label\n0.1,2\n";
        assert!(LabeledSet::read_csv(text.as_bytes()).is_err());
        let text = "x,label\n0.1,1\n";
        assert!(LabeledSet::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn scored_set_validates_range() {
        assert!(ScoredSet::unlabeled(vec![0.2, 1.2]).is_err());
        assert!(ScoredSet::labeled(vec![0.2], vec![0, 1]).is_err());
        assert!(ScoredSet::labeled(vec![0.2, 0.9], vec![0, 1]).is_ok());
    }

    proptest! {
        #[test]
        fn split_partitions_exactly(labels in prop::collection::vec(0u8..2, 12..300), seed in any::<u64>()) {
            let spec = SplitSpec::new(0.4, 0.3, 0.3, seed).unwrap();
            if let Ok(parts) = split_indices(&labels, &spec) {
                let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                for part in &parts {
                    let pos = part.iter().filter(|&&i| labels[i] == 1).count() as f64;
                    let expected = prevalence(&labels) * part.len() as f64;
                    prop_assert!((pos - expected).abs() <= 1.0 + 1e-9);
                }
            }
        }
    }
}
