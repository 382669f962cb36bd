//! Soft-thresholding denoisers.

use num_complex::Complex64;

use crate::denoise::{Denoiser, NoiseModel, DEFAULT_THRESHOLD_MULTIPLIER};
use crate::error::{invalid, Result};
use crate::grid::{ComplexGrid, Grid, RealGrid, Sample};
use crate::wavelet::{dwt2, idwt2, subband_map, WaveletSpec};

/// Magnitude shrinkage `v * max(0, 1 - lambda/|v|)`; preserves phase.
pub fn soft_threshold(v: Complex64, lambda: f64) -> Result<Complex64> {
    check_lambda(lambda)?;
    Ok(v.shrink(lambda))
}

/// `sign(v) * max(0, |v| - lambda)`.
pub fn soft_threshold_real(v: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(v.shrink(lambda))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return invalid(format!("threshold must be >= 0, got {lambda}"));
    }
    Ok(())
}

/// Samples that support soft thresholding (`f64` and `Complex64`).
pub trait Shrink: Sample {
    fn shrink(self, lambda: f64) -> Self;
}

impl Shrink for f64 {
    fn shrink(self, lambda: f64) -> Self {
        if self > lambda {
            self - lambda
        } else if self < -lambda {
            self + lambda
        } else {
            0.0
        }
    }
}

impl Shrink for Complex64 {
    fn shrink(self, lambda: f64) -> Self {
        let mag = self.norm();
        if mag <= lambda {
            Complex64::new(0.0, 0.0)
        } else {
            self * (1.0 - lambda / mag)
        }
    }
}

/// Soft-thresholds every detail subband `j` of `r` at `lambdas[j]`; the LL
/// band (index 0) passes through.
pub(crate) fn shrink_subbands<T: Shrink>(
    r: &Grid<T>,
    spec: &WaveletSpec,
    lambdas: &[f64],
) -> Result<Grid<T>> {
    let mut c = dwt2(r, spec)?;
    let map = subband_map(spec, r.height(), r.width())?;
    for (v, &b) in c.as_mut_slice().iter_mut().zip(map.indices()) {
        if b != 0 {
            *v = v.shrink(lambdas[b as usize]);
        }
    }
    idwt2(&c, spec)
}

fn check_multiplier(c: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return invalid(format!("threshold multiplier must be finite and >= 0, got {c}"));
    }
    Ok(())
}

fn white_lambdas(sigma: f64, c: f64, spec: &WaveletSpec) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be finite and > 0, got {sigma}"));
    }
    check_multiplier(c)?;
    Ok(vec![c * sigma; spec.subband_count()])
}

fn subband_lambdas(tau: &[f64], c: f64, spec: &WaveletSpec) -> Result<Vec<f64>> {
    if tau.len() != spec.subband_count() {
        return invalid(format!(
            "tau has {} entries, expected {}",
            tau.len(),
            spec.subband_count()
        ));
    }
    spec.check_tau(tau)?;
    check_multiplier(c)?;
    Ok(tau.iter().map(|t| c * t.sqrt()).collect())
}

/// Wavelet soft thresholding of every detail coefficient at `c * sigma`.
pub fn denoise_white<T: Shrink>(r: &Grid<T>, sigma: f64, c: f64, spec: &WaveletSpec) -> Result<Grid<T>> {
    let lambdas = white_lambdas(sigma, c, spec)?;
    shrink_subbands(r, spec, &lambdas)
}

/// Per-subband soft thresholding at `c * sqrt(tau[j])`.
pub fn denoise_subband<T: Shrink>(r: &Grid<T>, tau: &[f64], c: f64, spec: &WaveletSpec) -> Result<Grid<T>> {
    let lambdas = subband_lambdas(tau, c, spec)?;
    shrink_subbands(r, spec, &lambdas)
}

/// Wavelet soft thresholding with one threshold `c * sigma` for every detail
/// band. Under subband-colored noise `sigma` is the root of the average pixel
/// variance.
#[derive(Debug, Clone, Copy)]
pub struct WaveletSoft {
    pub c: f64,
    pub spec: WaveletSpec,
}

impl Default for WaveletSoft {
    fn default() -> Self {
        Self { c: DEFAULT_THRESHOLD_MULTIPLIER, spec: WaveletSpec::default() }
    }
}

impl WaveletSoft {
    fn run<T: Shrink>(&self, r: &Grid<T>, noise: &NoiseModel) -> Result<Grid<T>> {
        let sigma = match noise {
            NoiseModel::White { sigma } => *sigma,
            other => other.pixel_variance().sqrt(),
        };
        denoise_white(r, sigma, self.c, &self.spec)
    }
}

impl Denoiser for WaveletSoft {
    fn name(&self) -> String {
        format!("soft(c={})", self.c)
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        self.run(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        self.run(r, noise)
    }
}

/// Per-subband wavelet soft thresholding at `c * sqrt(tau[j])`; white noise
/// is treated as `tau[j] = sigma^2` everywhere.
#[derive(Debug, Clone, Copy)]
pub struct SubbandSoft {
    pub c: f64,
    pub spec: WaveletSpec,
}

impl Default for SubbandSoft {
    fn default() -> Self {
        Self { c: DEFAULT_THRESHOLD_MULTIPLIER, spec: WaveletSpec::default() }
    }
}

impl SubbandSoft {
    fn run<T: Shrink>(&self, r: &Grid<T>, noise: &NoiseModel) -> Result<Grid<T>> {
        match noise {
            NoiseModel::White { sigma } => denoise_white(r, *sigma, self.c, &self.spec),
            NoiseModel::SubbandDiagonal { tau, spec } => {
                if spec.levels != self.spec.levels {
                    return invalid("noise model and denoiser use different wavelet depths");
                }
                denoise_subband(r, tau, self.c, &self.spec)
            }
        }
    }
}

impl Denoiser for SubbandSoft {
    fn name(&self) -> String {
        format!("subband(c={})", self.c)
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        self.run(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        self.run(r, noise)
    }
}

/// Sample-wise soft thresholding at `c * sigma`, for signals sparse in the
/// sample domain itself.
#[derive(Debug, Clone, Copy)]
pub struct PixelSoft {
    pub c: f64,
}

impl Default for PixelSoft {
    fn default() -> Self {
        Self { c: DEFAULT_THRESHOLD_MULTIPLIER }
    }
}

impl PixelSoft {
    fn run<T: Shrink>(&self, r: &Grid<T>, noise: &NoiseModel) -> Result<Grid<T>> {
        check_multiplier(self.c)?;
        let lambda = self.c * noise.pixel_variance().sqrt();
        Ok(r.map(|v| v.shrink(lambda)))
    }
}

impl Denoiser for PixelSoft {
    fn name(&self) -> String {
        format!("pixel-soft(c={})", self.c)
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        self.run(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        self.run(r, noise)
    }
}
