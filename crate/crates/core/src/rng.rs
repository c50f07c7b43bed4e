//! Deterministic random-number streams.
//!
//! A stream is identified by `(seed, stream)`. The generator is ChaCha8 keyed
//! from the seed with the stream id as nonce, so sequences are identical across
//! runs and platforms. Per-image streams in batch operations use
//! `stream = base_seed ^ image_index`.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            seed,
            stream,
            inner,
        }
    }

    /// The stream used for image `index` of a batch seeded with `base_seed`.
    pub fn for_image(base_seed: u64, index: u64) -> Self {
        Self::new(base_seed, base_seed ^ index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A draw from `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// A draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::arg(format!(
                "uniform bounds require lo < hi, got [{lo}, {hi})"
            )));
        }
        let v = lo + (hi - lo) * self.unit();
        // lo + span * u can round up to hi when the span is tiny relative to lo.
        Ok(if v >= hi { hi.next_down().max(lo) } else { v })
    }

    /// A uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    /// A standard normal variate.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// A Gamma(shape, 1) variate.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive and finite")
            .sample(&mut self.inner)
    }

    /// A Beta(a, b) variate as `X / (X + Y)` with `X ~ Gamma(a)`, `Y ~ Gamma(b)`.
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        loop {
            let x = self.gamma(a);
            let y = self.gamma(b);
            let s = x + y;
            // Both variates can underflow to zero for very small shapes.
            if s > 0.0 {
                return (x / s).clamp(0.0, 1.0);
            }
        }
    }
}
