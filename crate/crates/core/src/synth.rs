//! Synthetic label-shift fixtures.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::LabeledSet;

/// `n` rows in `dim` dimensions: negatives centered at -1, positives at +1
/// on every axis, isotropic noise with standard deviation `sigma`.
/// The positive count is `round(n * prior)`; row order is shuffled.
pub fn two_gaussians(n: usize, prior: f64, sigma: f64, dim: usize, seed: u64) -> LabeledSet {
    assert!(n > 0 && dim > 0, "need at least one row and one dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let n_pos = ((n as f64) * prior.clamp(0.0, 1.0)).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| (i < n_pos) as u8).collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * dim);
    for &y in &labels {
        let mean = if y == 1 { 1.0 } else { -1.0 };
        features.extend((0..dim).map(|_| mean + noise.sample(&mut rng)));
    }
    LabeledSet::from_flat(features, dim, labels).expect("generator produces valid rows")
}
