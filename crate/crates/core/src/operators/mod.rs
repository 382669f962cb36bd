//! Linear measurement operators.

mod fourier;
mod gaussian;
mod mask;

pub use fourier::{Fft2, FourierMaskOperator};
pub use gaussian::GaussianOperator;
pub use mask::{make_vd_mask, VdMaskParams};

use crate::error::Result;
use crate::grid::RealGrid;

/// A real matrix `A` acting on images, with its transpose.
pub trait RealOperator {
    /// Number of measurements `m`.
    fn measurements(&self) -> usize;
    /// Shape of the images the operator acts on.
    fn image_shape(&self) -> (usize, usize);
    fn forward(&self, x: &RealGrid) -> Result<Vec<f64>>;
    fn adjoint(&self, y: &[f64]) -> Result<RealGrid>;
}
