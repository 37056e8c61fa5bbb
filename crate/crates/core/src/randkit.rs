//! Reproducible random streams and the elementary samplers built on them.
//!
//! Every replicate of every experiment owns one [`RngStream`], addressed by
//! `(seed, stream_id)`. The generator is ChaCha8 with the 64-bit ChaCha stream
//! selector set to `stream_id`, so stream `k` is reachable in O(1) and two
//! streams never overlap.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, Poisson, StandardNormal};

use crate::error::{check_nonneg, check_positive, invalid, Result};

/// SplitMix64 finalizer, used to decorrelate user seeds and experiment labels.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from a user seed and a label naming one side of an experiment.
/// Different labels give unrelated key material for the same user seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = mix64(seed);
    for b in label.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    h
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for replicate `replicate` of the experiment side named `label`.
    pub fn for_replicate(seed: u64, label: &str, replicate: u64) -> Self {
        Self::new(derive_seed(seed, label), replicate)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to take logs of.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn draw_normal(&mut self, mean: f64, sd: f64) -> Result<f64> {
        check_nonneg("sd", sd)?;
        if !mean.is_finite() {
            return Err(invalid("mean", "must be finite"));
        }
        if sd == 0.0 {
            return Ok(mean);
        }
        Ok(mean + sd * self.std_normal())
    }

    pub fn draw_poisson(&mut self, rate: f64) -> Result<u64> {
        check_nonneg("rate", rate)?;
        Ok(self.poisson_unchecked(rate))
    }

    #[inline]
    pub(crate) fn poisson_unchecked(&mut self, rate: f64) -> u64 {
        if rate == 0.0 {
            return 0;
        }
        let dist = Poisson::new(rate).expect("finite positive rate");
        dist.sample(&mut self.rng) as u64
    }

    /// Gamma with the given shape and scale; `shape == 0` is the point mass at 0.
    pub fn draw_gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        check_nonneg("shape", shape)?;
        check_positive("scale", scale)?;
        Ok(self.gamma_unchecked(shape, scale))
    }

    #[inline]
    pub(crate) fn gamma_unchecked(&mut self, shape: f64, scale: f64) -> f64 {
        if shape == 0.0 {
            return 0.0;
        }
        // Marsaglia-Tsang rejection, with the shape < 1 boost.
        let dist = Gamma::new(shape, scale).expect("validated gamma parameters");
        dist.sample(&mut self.rng)
    }

    pub fn draw_binomial(&mut self, n: u64, p: f64) -> Result<u64> {
        crate::error::check_range("p", p, 0.0, 1.0)?;
        Ok(self.binomial_unchecked(n, p))
    }

    #[inline]
    pub(crate) fn binomial_unchecked(&mut self, n: u64, p: f64) -> u64 {
        Binomial::new(n, p.clamp(0.0, 1.0)).expect("p in [0, 1]").sample(&mut self.rng)
    }

    pub fn draw_exponential(&mut self, mean: f64) -> Result<f64> {
        check_positive("mean", mean)?;
        let e: f64 = Exp1.sample(&mut self.rng);
        Ok(mean * e)
    }
}

/// Inverse CDF of the exponential law with the given mean.
pub fn exponential_quantile(u: f64, mean: f64) -> Result<f64> {
    check_positive("mean", mean)?;
    if !(0.0..1.0).contains(&u) {
        return Err(invalid("u", format!("must lie in [0, 1), got {u}")));
    }
    Ok(-mean * (-u).ln_1p())
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
