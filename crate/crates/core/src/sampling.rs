//! Latin hypercube designs for the initial sampling phase.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed of a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent sub-stream, e.g. one per iteration or per purpose.
    pub fn derive(self, stream: u64) -> RngSeed {
        // splitmix64 finalizer over the pair
        let mut z = self.0 ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// `n_points` stratified samples of `[0, 1)^n_dims`: each dimension has exactly
/// one sample in every bin `[k/n, (k+1)/n)`.
pub fn latin_hypercube(n_points: usize, n_dims: usize, seed: RngSeed) -> Result<Vec<Vec<f64>>> {
    if n_points == 0 {
        return Err(Error::Empty("latin hypercube needs at least one point"));
    }
    let mut rng = seed.rng();
    let mut points = vec![vec![0.0; n_dims]; n_points];
    let n = n_points as f64;
    let mut bins: Vec<usize> = (0..n_points).collect();
    for k in 0..n_dims {
        bins.shuffle(&mut rng);
        for (p, &bin) in points.iter_mut().zip(&bins) {
            let lo = bin as f64 / n;
            let hi = (bin + 1) as f64 / n;
            let v = (bin as f64 + rng.random::<f64>()) / n;
            // rounding must not push a sample into the neighbouring bin
            p[k] = if v >= hi {
                lo.max(hi - f64::EPSILON)
            } else {
                v.max(lo)
            };
        }
    }
    Ok(points)
}

/// Default initial design size: a quarter of the evaluation budget, rounded.
pub fn default_n_init(n_max: usize) -> usize {
    (n_max as f64 / 4.0).round() as usize
}
