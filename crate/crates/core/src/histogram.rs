//! Equal-width histograms of posteriors over `[0,1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    densities: Vec<f64>,
    /// Set when the source set was empty and every density is zero.
    empty_source: bool,
}

/// Bin of `y` among `bins` equal-width bins; `1.0` lands in the last bin.
pub fn bin_index(y: f64, bins: usize) -> usize {
    ((y * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Center of bin `i` (0-based).
pub fn bin_center(i: usize, bins: usize) -> f64 {
    (i as f64 + 0.5) / bins as f64
}

pub fn build_histogram(posteriors: &[f64], bins: usize) -> Result<Histogram> {
    check_bins(bins)?;
    if posteriors.is_empty() {
        return Err(Error::Empty("posteriors"));
    }
    let mut counts = vec![0usize; bins];
    for (i, &y) in posteriors.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        counts[bin_index(y, bins)] += 1;
    }
    let n = posteriors.len() as f64;
    Ok(Histogram { densities: counts.into_iter().map(|c| c as f64 / n).collect(), empty_source: false })
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidBins { bins, reason: "need at least 2 bins" });
    }
    Ok(())
}

impl Histogram {
    /// All-zero histogram standing in for an empty source set.
    pub fn empty(bins: usize) -> Result<Self> {
        check_bins(bins)?;
        Ok(Self { densities: vec![0.0; bins], empty_source: true })
    }

    pub fn bin_count(&self) -> usize {
        self.densities.len()
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn is_empty_source(&self) -> bool {
        self.empty_source
    }

    /// `p * positive + (1 - p) * negative`, bin by bin.
    pub fn mixture(p: f64, positive: &Self, negative: &Self) -> Result<Self> {
        if positive.bin_count() != negative.bin_count() {
            return Err(Error::BinMismatch(positive.bin_count(), negative.bin_count()));
        }
        let densities = positive.densities.iter().zip(&negative.densities).map(|(a, b)| p * a + (1.0 - p) * b).collect();
        Ok(Self { densities, empty_source: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_points_two_bins() {
        let h = build_histogram(&[0.1, 0.9], 2).unwrap();
        assert_eq!(h.densities(), &[0.5, 0.5]);
    }

    #[test]
    fn one_goes_to_last_bin() {
        let h = build_histogram(&[1.0], 4).unwrap();
        assert_eq!(h.densities(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_empty_and_single_bin() {
        assert!(build_histogram(&[], 4).is_err());
        assert!(build_histogram(&[0.3], 1).is_err());
        assert!(Histogram::empty(3).unwrap().is_empty_source());
    }

    #[test]
    fn uniform_draws_fill_bins_evenly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let ys: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let h = build_histogram(&ys, 10).unwrap();
        // direct count per decile
        for (i, &d) in h.densities().iter().enumerate() {
            let lo = i as f64 / 10.0;
            let hi = (i + 1) as f64 / 10.0;
            let count = ys.iter().filter(|&&y| y >= lo && y < hi).count() as f64 / 1000.0;
            assert!((d - count).abs() < 1e-12);
            assert!((d - 0.1).abs() < 0.05, "bin {i}: {d}");
        }
    }

    proptest! {
        #[test]
        fn densities_sum_to_one(ys in prop::collection::vec(0.0f64..=1.0, 1..200), bins in 2usize..20) {
            let h = build_histogram(&ys, bins).unwrap();
            prop_assert!((h.densities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
