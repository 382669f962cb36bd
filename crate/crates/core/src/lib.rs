//! Compressive-sensing reconstruction with approximate message passing, and
//! ground-truth-free per-pixel error estimates for its output.
//!
//! The pieces, bottom up:
//!
//! * [`grid`], [`rng`], [`io`], [`metrics`]: 2-D sample arrays, reproducible
//!   random streams, file formats and quality metrics;
//! * [`operators`], [`wavelet`]: measurement operators and the orthonormal
//!   Haar transform;
//! * [`denoise`]: the denoiser abstraction, thresholding denoisers and the
//!   external plugin client;
//! * [`amp`]: the AMP iteration with Monte-Carlo Onsager correction;
//! * [`colored`]: colored-noise denoising problems and an approximate
//!   variable-density Fourier reconstruction loop;
//! * [`uncertainty`]: SURE / GSURE risk estimates and patch-averaged heatmaps.

pub mod amp;
pub mod colored;
pub mod denoise;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod phantom;
pub mod rng;
pub mod uncertainty;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::{ComplexGrid, Grid, RealGrid, Sample};
pub use rng::SeededRng;
pub use wavelet::WaveletSpec;
