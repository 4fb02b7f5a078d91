//! Gaussian-blob generator with a known set of informative features.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub samples: usize,
    pub clusters: usize,
    pub informative: usize,
    pub noise: usize,
    /// Spread of the cluster means along each informative feature, in units
    /// of the unit noise standard deviation.
    pub separation: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            samples: 150,
            clusters: 3,
            informative: 10,
            noise: 40,
            separation: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Blobs {
    /// Features-by-samples data.
    pub x: DenseMatrix,
    pub labels: Vec<usize>,
    /// Indices of the informative features, ascending.
    pub informative: Vec<usize>,
}

/// Draws `spec.samples` points split round-robin over the clusters.
///
/// On every informative feature the cluster means are a random permutation
/// of evenly spaced levels spanning `[-separation/2, separation/2]`; noise
/// features are pure standard normal. Feature positions are shuffled.
pub fn make_blobs(spec: &BlobSpec, seed: u64) -> Blobs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.informative + spec.noise;
    let n = spec.samples;
    let k = spec.clusters.max(1);

    let mut positions: Vec<usize> = (0..d).collect();
    positions.shuffle(&mut rng);
    let mut informative: Vec<usize> = positions[..spec.informative].to_vec();

    let levels: Vec<f64> = (0..k)
        .map(|c| {
            if k == 1 {
                0.0
            } else {
                spec.separation * (c as f64 / (k - 1) as f64 - 0.5)
            }
        })
        .collect();
    let means: Vec<Vec<f64>> = (0..spec.informative)
        .map(|_| {
            let mut l = levels.clone();
            l.shuffle(&mut rng);
            l
        })
        .collect();

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut x = DenseMatrix::zeros(d, n);
    for (j, &label) in labels.iter().enumerate() {
        for f in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            x[(positions[f], j)] = noise + if f < spec.informative { means[f][label] } else { 0.0 };
        }
    }
    informative.sort_unstable();
    Blobs { x, labels, informative }
}
