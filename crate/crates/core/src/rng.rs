//! Seeded, stream-separated random sampling.
//!
//! A [`SeededRng`] is a `(seed, stream)` descriptor rather than a stateful
//! generator. Each consumer derives its own ChaCha20 stream from it, so noise
//! draws, divergence probes and mask draws never share state, and forking by an
//! index (`fork(k)`) gives the same draws whether the work is done serially or
//! in parallel.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::grid::{ComplexGrid, RealGrid};

/// Well-known stream ids used by the library.
pub mod streams {
    pub const OPERATOR: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const MASK: u64 = 3;
    pub const PROBES: u64 = 4;
    pub const SIGNAL: u64 = 5;
    pub const ONSAGER: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededRng {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Same seed, different stream id.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self { seed: self.seed, stream }
    }

    /// Child descriptor for the `index`-th independent use of this stream.
    pub fn fork(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5EED))),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

pub(crate) fn standard_normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Grid of i.i.d. `N(0, sigma^2)` samples.
pub fn gaussian_grid(rng: &SeededRng, height: usize, width: usize, sigma: f64) -> Result<RealGrid> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be finite and >= 0, got {sigma}"));
    }
    let mut g = rng.rng();
    let data = standard_normals(&mut g, height * width).into_iter().map(|v| v * sigma).collect();
    Ok(RealGrid::from_raw(height, width, data))
}

/// Grid of circular complex Gaussian samples with total per-entry variance
/// `sigma^2` (real and imaginary parts each `N(0, sigma^2 / 2)`).
pub fn complex_gaussian_grid(
    rng: &SeededRng,
    height: usize,
    width: usize,
    sigma: f64,
) -> Result<ComplexGrid> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be finite and >= 0, got {sigma}"));
    }
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let mut g = rng.rng();
    let data = (0..height * width)
        .map(|_| {
            let re: f64 = g.sample(StandardNormal);
            let im: f64 = g.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect();
    Ok(ComplexGrid::from_raw(height, width, data))
}
