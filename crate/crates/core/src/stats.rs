//! Seed derivation and small Monte Carlo summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG type used everywhere in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a base seed and a tuple of coordinates into a cell seed.
///
/// The result depends only on the values, never on evaluation order, so
/// parallel grids reproduce the same streams as sequential ones.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Sample mean with its standard error (sample sd / sqrt(count)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn from_samples(samples: &[f64]) -> Self {
        let count = samples.len();
        if count == 0 {
            return MeanSe { mean: f64::NAN, se: f64::NAN, count };
        }
        let mean = samples.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se, count }
    }

    /// `[mean - z*se, mean + z*se]`
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.se, self.mean + z * self.se)
    }
}

/// Root-sum-square of standard errors.
pub fn combined_se(ses: &[f64]) -> f64 {
    ses.iter().map(|s| s * s).sum::<f64>().sqrt()
}

/// Checks that `values` is non-decreasing, tolerating at most one inversion
/// whose drop is within `z` combined standard errors of its neighbour.
pub fn monotone_with_tolerance(values: &[MeanSe], increasing: bool, z: f64) -> bool {
    let mut inversions = 0;
    for pair in values.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let drop = if increasing { a.mean - b.mean } else { b.mean - a.mean };
        if drop > 0.0 {
            if drop > z * combined_se(&[a.se, b.se]) {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}
