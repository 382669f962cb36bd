use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::denoise::{Denoisable, Denoiser, NoiseModel};
use crate::error::{invalid, Result};
use crate::grid::{Grid, RealGrid, Sample};
use crate::rng::SeededRng;
use crate::uncertainty::{divergence_field, DivergenceField, SureConfig};

/// Patch origins along one axis: the stride lattice, plus a final patch
/// flush with the far edge when the lattice does not reach it.
pub fn patch_origins(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    assert!(patch >= 1 && patch <= len && stride >= 1);
    let mut v: Vec<usize> = (0..=len - patch).step_by(stride).collect();
    if *v.last().unwrap() != len - patch {
        v.push(len - patch);
    }
    v
}

/// Per-pixel risk estimate with the number of patches covering each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    values: RealGrid,
    coverage: Vec<u32>,
    config: SureConfig,
}

impl Heatmap {
    pub fn values(&self) -> &RealGrid {
        &self.values
    }

    pub fn coverage(&self) -> &[u32] {
        &self.coverage
    }

    pub fn config(&self) -> &SureConfig {
        &self.config
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }

    /// Visualization channel with negative estimates set to zero.
    pub fn clamped(&self) -> RealGrid {
        self.values.map(|v| v.max(0.0))
    }

    /// `x,y,value,coverage` rows, `x` the column and `y` the row index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value,coverage\n");
        let w = self.values.width();
        for (i, (v, c)) in self.values.as_slice().iter().zip(&self.coverage).enumerate() {
            writeln!(out, "{},{},{:e},{}", i % w, i / w, v, c).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Averages `terms` over every patch, then each pixel over the patches that
/// cover it.
fn patch_average(terms: &RealGrid, cfg: &SureConfig) -> Result<Heatmap> {
    let (h, w) = (terms.height(), terms.width());
    cfg.validate(h, w)?;
    let p = cfg.patch;
    let rows = patch_origins(h, p, cfg.stride);
    let cols = patch_origins(w, p, cfg.stride);
    let t = terms.as_slice();
    let mut acc = vec![0.0; h * w];
    let mut coverage = vec![0u32; h * w];
    let area = (p * p) as f64;
    for &oi in &rows {
        for &oj in &cols {
            let mut s = 0.0;
            for i in oi..oi + p {
                s += t[i * w + oj..i * w + oj + p].iter().sum::<f64>();
            }
            let s = s / area;
            for i in oi..oi + p {
                for j in oj..oj + p {
                    acc[i * w + j] += s;
                    coverage[i * w + j] += 1;
                }
            }
        }
    }
    let values = acc.iter().zip(&coverage).map(|(a, &c)| a / c as f64).collect();
    Ok(Heatmap { values: Grid::from_raw(h, w, values), coverage, config: *cfg })
}

fn white_terms(r: &RealGrid, xhat: &RealGrid, field: &DivergenceField, sigma: f64) -> Result<RealGrid> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be finite and > 0, got {sigma}"));
    }
    r.check_same_shape(xhat)?;
    r.check_same_shape(field.values())?;
    let s2 = sigma * sigma;
    let resid = r.zip_map(xhat, |a, b| (a - b) * (a - b))?;
    resid.zip_map(field.values(), |e, d| e - s2 + 2.0 * s2 * d)
}

/// `(1/n)|r - xhat|^2 - sigma^2 + (2 sigma^2 / n) sum_i d_i`.
pub fn sure_global(r: &RealGrid, xhat: &RealGrid, field: &DivergenceField, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be finite and > 0, got {sigma}"));
    }
    r.check_same_shape(xhat)?;
    r.check_same_shape(field.values())?;
    let n = r.len() as f64;
    let s2 = sigma * sigma;
    let resid: f64 = r.sub(xhat)?.norm_sqr();
    Ok(resid / n - s2 + 2.0 * s2 * field.total() / n)
}

/// Patch-averaged white-noise SURE.
pub fn sure_heatmap(
    r: &RealGrid,
    xhat: &RealGrid,
    field: &DivergenceField,
    sigma: f64,
    cfg: &SureConfig,
) -> Result<Heatmap> {
    patch_average(&white_terms(r, xhat, field, sigma)?, cfg)
}

fn check_positive_tau(noise: &NoiseModel) -> Result<()> {
    if let NoiseModel::SubbandDiagonal { tau, spec } = noise {
        spec.check_tau(tau)?;
        if let Some(j) = tau.iter().position(|&t| t <= 0.0) {
            return invalid(format!(
                "GSURE needs every subband variance positive; subband {} ({}) has tau = {}",
                j,
                spec.subband_name(j),
                tau[j]
            ));
        }
    }
    Ok(())
}

fn colored_terms<T: Sample>(
    r: &Grid<T>,
    xhat: &Grid<T>,
    field: &DivergenceField,
    noise: &NoiseModel,
) -> Result<RealGrid> {
    r.check_same_shape(xhat)?;
    r.check_same_shape(field.values())?;
    let c = noise.pixel_variance();
    let kappa = field.kappa();
    let resid: RealGrid = r.zip_map(xhat, |a, b| (a - b).norm_sqr())?;
    resid.zip_map(field.values(), |e, d| e - c + 2.0 * kappa * d)
}

/// GSURE from a precomputed divergence field: global value (`cfg = None`) or
/// heatmap. `field` must come from [`divergence_field`] with the same `noise`.
pub fn gsure_from_field<T: Sample>(
    r: &Grid<T>,
    xhat: &Grid<T>,
    field: &DivergenceField,
    noise: &NoiseModel,
    cfg: Option<&SureConfig>,
) -> Result<(f64, Option<Heatmap>)> {
    check_positive_tau(noise)?;
    let terms = colored_terms(r, xhat, field, noise)?;
    let global = terms.mean();
    let map = cfg.map(|c| patch_average(&terms, c)).transpose()?;
    Ok((global, map))
}

/// Global GSURE,
/// `(1/n)[|xhat - r|^2 - tr(C) + 2 tr(J C)]`, for noise with covariance `C`
/// given by `noise` (total over real and imaginary parts for complex data).
pub fn gsure_global<T, D>(
    r: &Grid<T>,
    xhat: &Grid<T>,
    f: &D,
    noise: &NoiseModel,
    cfg: &SureConfig,
    rng: &SeededRng,
) -> Result<f64>
where
    T: Denoisable,
    D: Denoiser + ?Sized,
{
    check_positive_tau(noise)?;
    let field = divergence_field(f, r, noise, cfg, rng)?;
    Ok(gsure_from_field(r, xhat, &field, noise, None)?.0)
}

/// Patch-averaged GSURE.
pub fn gsure_heatmap<T, D>(
    r: &Grid<T>,
    xhat: &Grid<T>,
    f: &D,
    noise: &NoiseModel,
    cfg: &SureConfig,
    rng: &SeededRng,
) -> Result<Heatmap>
where
    T: Denoisable,
    D: Denoiser + ?Sized,
{
    check_positive_tau(noise)?;
    cfg.validate(r.height(), r.width())?;
    let field = divergence_field(f, r, noise, cfg, rng)?;
    Ok(gsure_from_field(r, xhat, &field, noise, Some(cfg))?.1.expect("heatmap requested"))
}

/// Patch-averaged squared error against a known ground truth.
pub fn mse_heatmap<T: Sample>(xhat: &Grid<T>, x_true: &Grid<T>, cfg: &SureConfig) -> Result<Heatmap> {
    let terms = xhat.zip_map(x_true, |a, b| (a - b).norm_sqr())?;
    patch_average(&terms, cfg)
}

/// How a risk heatmap is compared with the true-error heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discrepancy {
    /// Mean of `|mse - sure| / max(mse, 1e-12)`.
    #[default]
    AbsRelative,
    /// Mean of `(mse - sure)^2`.
    Squared,
}

pub const DISCREPANCY_FLOOR: f64 = 1e-12;

pub fn heatmap_discrepancy(sure: &Heatmap, mse: &Heatmap, metric: Discrepancy) -> Result<f64> {
    sure.values.check_same_shape(&mse.values)?;
    if (sure.config.patch, sure.config.stride) != (mse.config.patch, mse.config.stride) {
        return invalid(format!(
            "heatmaps use different patch/stride: {}/{} vs {}/{}",
            sure.config.patch, sure.config.stride, mse.config.patch, mse.config.stride
        ));
    }
    let pairs = sure.values.as_slice().iter().zip(mse.values.as_slice());
    let total: f64 = match metric {
        Discrepancy::AbsRelative => pairs.map(|(s, m)| (m - s).abs() / m.max(DISCREPANCY_FLOOR)).sum(),
        Discrepancy::Squared => pairs.map(|(s, m)| (m - s) * (m - s)).sum(),
    };
    Ok(total / sure.values.len() as f64)
}
