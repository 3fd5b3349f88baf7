//! Seeded Gaussian noise and per-example L2 clipping.
//!
//! Randomness is drawn from ChaCha20 streams keyed by `(seed, purpose,
//! index)`: the same key always yields the same draws, and distinct keys
//! never share a stream, so runs replay bit-for-bit regardless of the
//! order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::vector::norm2;

/// What a random stream is used for. Part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamTag {
    BatchSample = 1,
    GradientNoise = 2,
    PerturbX = 3,
    PerturbZ = 4,
    PerturbY = 5,
    Shuffle = 6,
    Synthetic = 7,
}

const INDEX_BITS: u32 = 56;

/// A reproducible source of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The generator for stream `(tag, index)`. `index` is typically the
    /// iteration or epoch counter and must fit in 56 bits.
    pub fn stream(&self, tag: StreamTag, index: u64) -> ChaCha20Rng {
        debug_assert!(index < (1u64 << INDEX_BITS));
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(((tag as u64) << INDEX_BITS) | index);
        rng
    }

    /// A child source for an independent sub-run (fold, repetition, ...).
    pub fn derive(&self, salt: &[u64]) -> NoiseSource {
        let mut h = splitmix64(self.seed);
        for &s in salt {
            h = splitmix64(h ^ splitmix64(s.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        }
        NoiseSource::new(h)
    }

    /// `dim` i.i.d. `N(0, sigma^2)` draws from stream `(tag, index)`.
    pub fn gaussian_vector(&self, tag: StreamTag, index: u64, dim: usize, sigma: f64) -> Result<Vec<f64>> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidMechanism(format!("noise scale {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(vec![0.0; dim]);
        }
        let mut rng = self.stream(tag, index);
        Ok((0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Rescales `v` onto the L2 ball of radius `c` if it lies outside.
pub fn clip_l2(v: &[f64], c: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    clip_l2_in_place(&mut out, c);
    out
}

pub fn clip_l2_in_place(v: &mut [f64], c: f64) {
    debug_assert!(c > 0.0);
    let norm = norm2(v);
    if norm > c {
        let factor = c / norm;
        for x in v.iter_mut() {
            *x *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_sigma_gives_zero_vector() {
        let src = NoiseSource::new(7);
        let v = src.gaussian_vector(StreamTag::GradientNoise, 0, 3, 0.0).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_vector_rejected() {
        let src = NoiseSource::new(7);
        assert_eq!(
            src.gaussian_vector(StreamTag::GradientNoise, 0, 0, 1.0),
            Err(Error::EmptyVector)
        );
    }

    #[test]
    fn same_key_same_draws() {
        let src = NoiseSource::new(42);
        let a = src.gaussian_vector(StreamTag::PerturbX, 5, 16, 1.5).unwrap();
        let b = src.gaussian_vector(StreamTag::PerturbX, 5, 16, 1.5).unwrap();
        assert_eq!(a, b);
        let c = src.gaussian_vector(StreamTag::PerturbX, 6, 16, 1.5).unwrap();
        let d = src.gaussian_vector(StreamTag::PerturbY, 5, 16, 1.5).unwrap();
        let e = NoiseSource::new(43)
            .gaussian_vector(StreamTag::PerturbX, 5, 16, 1.5)
            .unwrap();
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }

    #[test]
    fn derived_sources_differ() {
        let src = NoiseSource::new(1);
        assert_ne!(src.derive(&[0, 1]), src.derive(&[1, 0]));
        assert_eq!(src.derive(&[3, 4]), src.derive(&[3, 4]));
    }

    #[test]
    fn sample_variance() {
        let src = NoiseSource::new(2024);
        let v = src.gaussian_vector(StreamTag::GradientNoise, 0, 100_000, 2.0).unwrap();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 4.0).abs() < 0.05 * 4.0, "variance {var}");
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_l2(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let c = clip_l2(&[3.0, 4.0], 1.0);
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip_l2(&[0.0, 0.0], 0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn clip_bound_on_many_vectors() {
        let src = NoiseSource::new(99);
        for i in 0..10_000u64 {
            let dim = 1 + (i % 17) as usize;
            let scale = [0.01, 1.0, 100.0][(i % 3) as usize];
            let v = src.gaussian_vector(StreamTag::Synthetic, i, dim, scale).unwrap();
            let c = 0.5 + (i % 5) as f64;
            assert!(norm2(&clip_l2(&v, c)) <= c * (1.0 + 1e-15));
        }
    }

    proptest! {
        #[test]
        fn clip_is_idempotent_and_preserves_direction(
            v in prop::collection::vec(-1e3f64..1e3, 1..20),
            c in 1e-3f64..10.0,
        ) {
            let once = clip_l2(&v, c);
            let twice = clip_l2(&once, c);
            prop_assert!(norm2(&once) <= c * (1.0 + 1e-12));
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
            for (a, b) in once.iter().zip(&v) {
                prop_assert!(a * b >= 0.0);
            }
        }
    }
}
