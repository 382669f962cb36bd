//! Per-subband soft thresholding with thresholds chosen by minimizing SURE.

use num_complex::Complex64;

use crate::denoise::soft::shrink_subbands;
use crate::denoise::{Denoiser, NoiseModel};
use crate::error::{invalid, Result};
use crate::grid::{ComplexGrid, Grid, RealGrid};
use crate::wavelet::{dwt2, subband_map, WaveletSpec};

fn check(len: usize, sigma: f64) -> Result<()> {
    if len < 2 {
        return invalid(format!("SURE threshold needs at least 2 coefficients, got {len}"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be finite and > 0, got {sigma}"));
    }
    Ok(())
}

/// Threshold minimizing the SURE of real soft thresholding,
///
/// `SURE(l) = n s^2 - 2 s^2 #{|x_i| <= l} + sum_i min(|x_i|, l)^2`,
///
/// over the candidates `{0} U {|x_i|}` (the minimizer of this piecewise
/// quadratic, increasing-between-breakpoints function is always one of them).
pub fn sure_tuned_threshold(coeffs: &[f64], sigma: f64) -> Result<f64> {
    check(coeffs.len(), sigma)?;
    let n = coeffs.len();
    let s2 = sigma * sigma;
    let mut mags: Vec<f64> = coeffs.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);

    let mut best = (n as f64 * s2, 0.0);
    let mut below_sq = 0.0;
    for k in 0..n {
        below_sq += mags[k] * mags[k];
        if k + 1 < n && mags[k + 1] == mags[k] {
            continue;
        }
        let lambda = mags[k];
        let le = (k + 1) as f64;
        let sure = n as f64 * s2 - 2.0 * s2 * le + below_sq + (n - k - 1) as f64 * lambda * lambda;
        if sure < best.0 {
            best = (sure, lambda);
        }
    }
    Ok(best.1)
}

/// Complex analogue for magnitude shrinkage of circular coefficients with
/// total variance `sigma^2` (`s^2 = sigma^2 / 2` per part). The per-coefficient
/// divergence of `v (1 - l/|v|)` in R^2 is `2 - l/|v|` when `|v| > l`.
pub fn sure_tuned_threshold_complex(coeffs: &[Complex64], sigma: f64) -> Result<f64> {
    check(coeffs.len(), sigma)?;
    let n = coeffs.len();
    let s2 = 0.5 * sigma * sigma;
    let mut mags: Vec<f64> = coeffs.iter().map(|v| v.norm()).collect();
    mags.sort_by(f64::total_cmp);
    // suffix sums of 1/|v|
    let mut inv_suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        inv_suffix[k] = inv_suffix[k + 1] + if mags[k] > 0.0 { 1.0 / mags[k] } else { 0.0 };
    }
    let score = |lambda: f64, le: usize, below_sq: f64| {
        let above = (n - le) as f64;
        below_sq - 2.0 * s2 * le as f64 + above * (lambda * lambda + 2.0 * s2)
            - 2.0 * s2 * lambda * inv_suffix[le]
    };
    let mut best = (score(0.0, 0, 0.0), 0.0);
    let mut below_sq = 0.0;
    for k in 0..n {
        below_sq += mags[k] * mags[k];
        if k + 1 < n && mags[k + 1] == mags[k] {
            continue;
        }
        let sure = score(mags[k], k + 1, below_sq);
        if sure < best.0 {
            best = (sure, mags[k]);
        }
    }
    Ok(best.1)
}

trait SureSample: crate::denoise::Shrink {
    fn tune(coeffs: &[Self], sigma: f64) -> Result<f64>;
}

impl SureSample for f64 {
    fn tune(coeffs: &[Self], sigma: f64) -> Result<f64> {
        sure_tuned_threshold(coeffs, sigma)
    }
}

impl SureSample for Complex64 {
    fn tune(coeffs: &[Self], sigma: f64) -> Result<f64> {
        sure_tuned_threshold_complex(coeffs, sigma)
    }
}

/// SureShrink: each detail subband soft-thresholded at its own SURE-optimal
/// threshold, given that band's noise level. Bands with zero noise pass
/// through.
#[derive(Debug, Clone, Copy, Default)]
pub struct SureShrink {
    pub spec: WaveletSpec,
}

impl SureShrink {
    fn run<T: SureSample>(&self, r: &Grid<T>, noise: &NoiseModel) -> Result<Grid<T>> {
        let sigmas = noise.subband_sigmas(&self.spec)?;
        let coeffs = dwt2(r, &self.spec)?;
        let map = subband_map(&self.spec, r.height(), r.width())?;
        let mut bands: Vec<Vec<T>> = vec![Vec::new(); self.spec.subband_count()];
        for (&v, &b) in coeffs.as_slice().iter().zip(map.indices()) {
            bands[b as usize].push(v);
        }
        let mut lambdas = vec![0.0; bands.len()];
        for j in 1..bands.len() {
            if sigmas[j] > 0.0 {
                lambdas[j] = T::tune(&bands[j], sigmas[j])?;
            }
        }
        shrink_subbands(r, &self.spec, &lambdas)
    }
}

impl Denoiser for SureShrink {
    fn name(&self) -> String {
        "sure-shrink".into()
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        self.run(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        self.run(r, noise)
    }
}
