//! Seed derivation for reproducible per-tile random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::DenseTile;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stream seed from a base seed and a list of integer labels.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(base), |acc, &l| mix(acc ^ mix(l)))
}

/// A ChaCha generator for the stream identified by `labels`.
pub fn stream(base: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, labels))
}

/// Fills a `rows × cols` tile with standard normal entries.
pub fn gaussian_tile(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseTile {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseTile::from_col_major(rows, cols, data).expect("shape matches data length")
}
