use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{lit, Scalar};

/// Name of the pseudo-random generator behind [`NoiseDraw::generate`].
pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64(master_seed), stream = rep_index";

/// Name of the Gaussian sampling algorithm.
pub const NORMAL_SAMPLER: &str = "ziggurat (rand_distr 0.5 StandardNormal)";

/// One vector of standard Gaussian errors.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw<T = f64> {
    pub epsilon: Vec<T>,
    pub seed: u64,
    pub rep_index: u64,
}

impl<T: Scalar> NoiseDraw<T> {
    /// Draw `rep_index` of the experiment keyed by `seed`.
    ///
    /// Every repetition reads its own ChaCha20 stream, so the values do not
    /// depend on which thread or in which order repetitions are generated.
    pub fn generate(n: usize, seed: u64, rep_index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(rep_index);
        let epsilon = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                lit::<T>(z)
            })
            .collect();
        Self {
            epsilon,
            seed,
            rep_index,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_values(vec![T::zero(); n])
    }

    pub fn from_values(epsilon: Vec<T>) -> Self {
        Self {
            epsilon,
            seed: 0,
            rep_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.epsilon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilon.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon.iter().all(|&e| e == T::zero())
    }
}
