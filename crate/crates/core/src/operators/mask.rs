//! Polynomial variable-density k-space sampling.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::grid::RealGrid;
use crate::operators::FourierMaskOperator;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdMaskParams {
    /// Fraction of k-space to sample, in (0, 1).
    pub rate: f64,
    /// Polynomial decay exponent of the selection density.
    pub degree: u32,
    /// Radius (as a fraction of the largest k-space radius) inside which every
    /// location is sampled.
    pub center_fraction: f64,
}

impl Default for VdMaskParams {
    fn default() -> Self {
        Self { rate: 0.25, degree: 6, center_fraction: 0.02 }
    }
}

fn freq(i: usize, n: usize) -> f64 {
    let f = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
    f / (n as f64 / 2.0)
}

/// Normalized radius `|k| / |k|_max` of every location, natural FFT order.
fn radii(h: usize, w: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            r.push(freq(i, h).hypot(freq(j, w)));
        }
    }
    let rmax = r.iter().cloned().fold(0.0, f64::max);
    if rmax > 0.0 {
        r.iter_mut().for_each(|v| *v /= rmax);
    }
    r
}

/// Draws a variable-density mask with exactly `round(rate * h * w)` samples.
///
/// Selection probability is `min(1, c (1 - |k|/|k|_max)^degree)` with `c`
/// calibrated so the probabilities sum to the target count, and forced to one
/// inside the center radius. Each location gets a uniform draw `u`; a
/// Bernoulli(p) draw selects it iff `u / p < 1`. Taking the target count of
/// smallest `u / p` is that Bernoulli draw with the surplus or deficit
/// corrected at the locations nearest the acceptance boundary.
pub fn make_vd_mask(
    rng: &SeededRng,
    h: usize,
    w: usize,
    params: &VdMaskParams,
) -> Result<FourierMaskOperator> {
    let VdMaskParams { rate, degree, center_fraction } = *params;
    if !(rate > 0.0 && rate < 1.0) {
        return invalid(format!("sampling rate must be in (0, 1), got {rate}"));
    }
    if !(0.0..1.0).contains(&center_fraction) {
        return invalid(format!("center fraction must be in [0, 1), got {center_fraction}"));
    }
    if h == 0 || w == 0 {
        return invalid("mask dimensions must be non-zero");
    }
    let n = h * w;
    let target = (rate * n as f64).round() as usize;
    let radius = radii(h, w);
    let center: Vec<bool> = radius.iter().map(|&r| r < center_fraction).collect();
    let n_center = center.iter().filter(|&&c| c).count();
    if target < n_center {
        return invalid(format!(
            "rate {rate} gives {target} samples, fewer than the {n_center} in the fully sampled center"
        ));
    }
    let density: Vec<f64> = radius.iter().map(|&r| (1.0 - r).max(0.0).powi(degree as i32)).collect();
    let needed = (target - n_center) as f64;
    let reachable = density.iter().zip(&center).filter(|(&g, &c)| !c && g > 0.0).count();
    if (reachable as f64) < needed {
        return invalid(format!(
            "only {reachable} locations outside the center have non-zero density, {needed} needed"
        ));
    }

    let mass = |c: f64| -> f64 {
        density.iter().zip(&center).filter(|(_, &ctr)| !ctr).map(|(&g, _)| (c * g).min(1.0)).sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while mass(hi) < needed {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < needed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = hi;
    let prob: Vec<f64> = density
        .iter()
        .zip(&center)
        .map(|(&g, &c)| if c { 1.0 } else { (scale * g).min(1.0) })
        .collect();

    let mut draw = rng.rng();
    let mut keys: Vec<(f64, usize)> = prob
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let u: f64 = draw.random();
            let key = if center[i] {
                -1.0
            } else if p > 0.0 {
                u / p
            } else {
                f64::INFINITY
            };
            (key, i)
        })
        .collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut mask = vec![false; n];
    for &(_, i) in &keys[..target] {
        mask[i] = true;
    }
    FourierMaskOperator::new(mask, RealGrid::from_raw(h, w, prob))
}
