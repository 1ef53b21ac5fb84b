//! Seeded random streams.
//!
//! Every stochastic term in the models draws from an [`RngStream`]. A stream is
//! identified by `(seed, stream_id)`; ChaCha8 supports 2^64 independent streams
//! per seed, so sweep point `i` simply uses `stream_id = i`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id.
    pub fn sibling(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn uniform_int(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Number of successes in `n` Bernoulli(`p`) trials. `p` is clamped to [0, 1].
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        let p = p.clamp(0.0, 1.0);
        if n == 0 || p == 0.0 {
            return 0;
        }
        if p == 1.0 {
            return n;
        }
        Binomial::new(n, p)
            .expect("probability already clamped to [0, 1]")
            .sample(&mut self.inner)
    }

    /// Random sign, +1 or -1 with equal probability.
    pub fn sign(&mut self) -> i8 {
        if self.inner.random::<bool>() {
            1
        } else {
            -1
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
