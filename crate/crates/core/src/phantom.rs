//! Synthetic test images.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::grid::RealGrid;
use crate::rng::SeededRng;

// intensity, semi-axis a, semi-axis b, center x, center y, rotation (degrees)
const MODIFIED_SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Modified Shepp-Logan head phantom with values in [0, 1].
pub fn shepp_logan(h: usize, w: usize) -> RealGrid {
    RealGrid::from_fn(h, w, |i, j| {
        let x = (2.0 * j as f64 + 1.0) / w as f64 - 1.0;
        let y = 1.0 - (2.0 * i as f64 + 1.0) / h as f64;
        let mut v = 0.0;
        for [a, ea, eb, cx, cy, deg] in MODIFIED_SHEPP_LOGAN {
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (x - cx, y - cy);
            let u = (dx * c + dy * s) / ea;
            let t = (-dx * s + dy * c) / eb;
            if u * u + t * t <= 1.0 {
                v += a;
            }
        }
        v.clamp(0.0, 1.0)
    })
}

/// Image that is constant on aligned `block`x`block` tiles, `count` of which
/// carry a random level in [0.2, 1]; the rest are zero. Exactly sparse in the
/// Haar domain once `block` is a multiple of the wavelet divisor.
pub fn dyadic_blocks(h: usize, w: usize, block: usize, count: usize, rng: &SeededRng) -> Result<RealGrid> {
    if block == 0 || h % block != 0 || w % block != 0 {
        return invalid(format!("block size {block} must divide {h}x{w}"));
    }
    let (bh, bw) = (h / block, w / block);
    if count > bh * bw {
        return invalid(format!("{count} blocks requested, only {} fit", bh * bw));
    }
    let mut draw = rng.rng();
    let chosen = sample(&mut draw, bh * bw, count);
    let mut levels = vec![0.0; bh * bw];
    for idx in chosen.iter() {
        levels[idx] = draw.random_range(0.2..=1.0);
    }
    Ok(RealGrid::from_fn(h, w, |i, j| levels[(i / block) * bw + j / block]))
}

/// `k` spikes of random sign and magnitude in [1, 2] at distinct random
/// pixels.
pub fn sparse_spikes(h: usize, w: usize, k: usize, rng: &SeededRng) -> Result<RealGrid> {
    let n = h * w;
    if k > n {
        return invalid(format!("{k} spikes do not fit in {n} pixels"));
    }
    let mut draw = rng.rng();
    let mut data = vec![0.0; n];
    for idx in sample(&mut draw, n, k).iter() {
        let mag: f64 = draw.random_range(1.0..=2.0);
        data[idx] = if draw.random::<bool>() { mag } else { -mag };
    }
    RealGrid::from_vec(h, w, data)
}
