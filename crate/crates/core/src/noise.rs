//! Seeded randomness and the noise primitives used by the privacy
//! mechanisms.
//!
//! All randomness flows through [`Rng`], a ChaCha12 generator with an
//! explicit 64-bit seed, so every mechanism run is reproducible. Concurrent
//! tasks must not share one generator; they derive independent child seeds
//! with [`derive_seed`] (a SplitMix64 mix of the parent seed and a stream
//! index).
//!
//! This is not a cryptographically hardened implementation: like all
//! floating-point differential-privacy code it has known side channels, and
//! the generator is chosen for reproducibility rather than for resistance to
//! state recovery.

use rand::Rng as _;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Reproducible random generator with a recorded seed.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// The seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child generator for stream `stream`, independent of how much of this
    /// generator's output has been consumed.
    pub fn derive(&self, stream: u64) -> Rng {
        Rng::new(derive_seed(self.seed, stream))
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// SplitMix64 finalizer over the parent seed and a stream index. The golden
/// ratio increment keeps distinct streams decorrelated.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fresh seed from OS entropy, for callers that did not supply one. The
/// value is returned so it can be recorded alongside the output.
pub fn entropy_seed() -> u64 {
    rand::rng().random()
}

/// Draws a vector with density proportional to `exp(-‖b‖ / scale)` in `d`
/// dimensions: the norm follows `Gamma(d, scale)` and the direction is
/// uniform on the unit sphere (a normalized standard Gaussian vector).
pub fn sample_gamma_sphere(d: usize, scale: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if d < 1 {
        return Err(Error::Config("noise dimension must be at least 1".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Config(format!(
            "gamma noise scale must be positive and finite, got {scale}"
        )));
    }
    let gamma = Gamma::new(d as f64, scale)
        .map_err(|e| Error::Config(format!("gamma distribution: {e}")))?;
    let radius = gamma.sample(rng);
    loop {
        let direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return Ok(direction.into_iter().map(|v| v * radius / norm).collect());
        }
    }
}

/// Independent zero-mean Gaussian draws with per-coordinate variances.
pub fn sample_gaussian_diag(variances: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    if let Some(bad) = variances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Config(format!(
            "gaussian variances must be nonnegative and finite, got {bad}"
        )));
    }
    Ok(variances
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            z * v.sqrt()
        })
        .collect())
}
