use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::NumError;

/// Seeded, splittable random stream.
///
/// Backed by ChaCha8; [`Rng::split`] selects an independent ChaCha stream
/// derived from the seed, so parallel tasks get reproducible streams that do
/// not depend on scheduling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream `stream` of this generator's seed. Does not
    /// advance `self`.
    pub fn split(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Rng {
            seed: self.seed,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random::<f64>() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Index drawn from unnormalized non-negative weights.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let total: f64 = probs.iter().sum();
        let mut u = self.uniform(0.0, total);
        for (i, &p) in probs.iter().enumerate() {
            if u < p {
                return i;
            }
            u -= p;
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// `k` distinct indices from `0..n`, in draw order (partial Fisher–Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `len` i.i.d. draws from N(0, 2/fan_in).
pub fn kaiming_normal(rng: &mut Rng, fan_in: usize, len: usize) -> Result<Vec<f64>, NumError> {
    if fan_in == 0 {
        return Err(NumError::ZeroFanIn);
    }
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite positive std");
    Ok((0..len).map(|_| dist.sample(&mut rng.inner)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_matches_fan_in() {
        let mut rng = Rng::new(3);
        let xs = kaiming_normal(&mut rng, 2, 100_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "var {var}");

        let xs = kaiming_normal(&mut rng, 8, 100_000).unwrap();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - 0.25).abs() < 0.25 * 0.05, "var {var}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = kaiming_normal(&mut Rng::new(11), 4, 32).unwrap();
        let b = kaiming_normal(&mut Rng::new(11), 4, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_fan_in() {
        assert!(matches!(
            kaiming_normal(&mut Rng::new(0), 0, 3),
            Err(NumError::ZeroFanIn)
        ));
    }

    #[test]
    fn split_streams_differ_and_repeat() {
        let root = Rng::new(5);
        let mut a = root.split(0);
        let mut b = root.split(1);
        let mut a2 = root.split(0);
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let xa2: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        assert_ne!(xa, xb);
        assert_eq!(xa, xa2);
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut rng = Rng::new(1);
        let mut s = rng.sample_without_replacement(256, 64);
        assert_eq!(s.len(), 64);
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 64);
    }
}
