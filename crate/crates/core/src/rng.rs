//! Seeded random streams.
//!
//! Every stochastic routine draws from ChaCha20 seeded through
//! `SeedableRng::seed_from_u64`, so a `u64` seed fully determines the output on
//! any platform. Normals use the ziggurat sampler from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

pub type SeededRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derive an independent sub-seed, e.g. per epoch or per purpose.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

/// `n` rows of `d` iid standard normals, drawn row by row.
pub fn standard_normal_rows<T: Scalar>(seed: u64, n: usize, d: usize) -> Vec<Vec<T>> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| (0..d).map(|_| standard_normal(&mut rng)).collect())
        .collect()
}

/// Fisher-Yates permutation of `0..n`.
pub fn permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
