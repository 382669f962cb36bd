//! Denoisers `f(r; noise)` and the noise models they are told about.
//!
//! For complex images the noise levels are total per-entry variances, so a
//! circular Gaussian with `White { sigma }` has real and imaginary parts of
//! variance `sigma^2 / 2` each.

mod plugin;
mod soft;
mod sureshrink;

pub use plugin::{
    decode_payload, encode_frame, encode_payload, read_frame, serve, write_frame, Frame,
    PluginDenoiser, PluginRequest, PROTOCOL_NAME, PROTOCOL_VERSION,
};
pub use soft::{
    denoise_subband, denoise_white, soft_threshold, soft_threshold_real, PixelSoft, Shrink,
    SubbandSoft, WaveletSoft,
};
pub use sureshrink::{sure_tuned_threshold, sure_tuned_threshold_complex, SureShrink};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{ComplexGrid, Grid, RealGrid, Sample};
use crate::wavelet::WaveletSpec;

/// Default threshold multiplier `c` in `lambda = c * sigma`.
pub const DEFAULT_THRESHOLD_MULTIPLIER: f64 = 3.0;

/// Covariance of the additive noise a denoiser is asked to remove.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum NoiseModel {
    /// i.i.d. noise with standard deviation `sigma`.
    #[serde(rename = "white")]
    White { sigma: f64 },
    /// Noise with covariance `Psi^T diag(tau) Psi`: independent in the wavelet
    /// domain with variance `tau[j]` in subband `j`.
    #[serde(rename = "subband")]
    SubbandDiagonal {
        tau: Vec<f64>,
        #[serde(skip)]
        spec: WaveletSpec,
    },
}

impl NoiseModel {
    pub fn white(sigma: f64) -> Result<Self> {
        let m = NoiseModel::White { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn subband(tau: Vec<f64>, spec: WaveletSpec) -> Result<Self> {
        let m = NoiseModel::SubbandDiagonal { tau, spec };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::White { sigma } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return invalid(format!("white noise sigma must be finite and > 0, got {sigma}"));
                }
                Ok(())
            }
            NoiseModel::SubbandDiagonal { tau, spec } => spec.check_tau(tau),
        }
    }

    /// Noise standard deviation in each subband of `spec`.
    pub fn subband_sigmas(&self, spec: &WaveletSpec) -> Result<Vec<f64>> {
        match self {
            NoiseModel::White { sigma } => Ok(vec![*sigma; spec.subband_count()]),
            NoiseModel::SubbandDiagonal { tau, spec: own } => {
                if own.levels != spec.levels {
                    return invalid(format!(
                        "noise model has {} wavelet levels, denoiser uses {}",
                        own.levels, spec.levels
                    ));
                }
                Ok(tau.iter().map(|t| t.sqrt()).collect())
            }
        }
    }

    /// Average per-pixel noise variance (the image-domain diagonal of the
    /// covariance).
    pub fn pixel_variance(&self) -> f64 {
        match self {
            NoiseModel::White { sigma } => sigma * sigma,
            NoiseModel::SubbandDiagonal { tau, spec } => spec.covariance_diagonal(tau),
        }
    }
}

/// A deterministic, shape-preserving map `r -> f(r; noise)`.
pub trait Denoiser: Send + Sync {
    fn name(&self) -> String;
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid>;
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn name(&self) -> String {
        (**self).name()
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        (**self).denoise(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        (**self).denoise_complex(r, noise)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn denoise(&self, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        (**self).denoise(r, noise)
    }
    fn denoise_complex(&self, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        (**self).denoise_complex(r, noise)
    }
}

/// Sample types a [`Denoiser`] accepts, dispatching to its real or complex
/// entry point.
pub trait Denoisable: Sample {
    fn denoise_with<D: Denoiser + ?Sized>(f: &D, r: &Grid<Self>, noise: &NoiseModel) -> Result<Grid<Self>>;
}

impl Denoisable for f64 {
    fn denoise_with<D: Denoiser + ?Sized>(f: &D, r: &RealGrid, noise: &NoiseModel) -> Result<RealGrid> {
        f.denoise(r, noise)
    }
}

impl Denoisable for Complex64 {
    fn denoise_with<D: Denoiser + ?Sized>(f: &D, r: &ComplexGrid, noise: &NoiseModel) -> Result<ComplexGrid> {
        f.denoise_complex(r, noise)
    }
}

/// `f(r) = r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Denoiser for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn denoise(&self, r: &RealGrid, _: &NoiseModel) -> Result<RealGrid> {
        Ok(r.clone())
    }
    fn denoise_complex(&self, r: &ComplexGrid, _: &NoiseModel) -> Result<ComplexGrid> {
        Ok(r.clone())
    }
}

/// `f(r) = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroMap;

impl Denoiser for ZeroMap {
    fn name(&self) -> String {
        "zero".into()
    }
    fn denoise(&self, r: &RealGrid, _: &NoiseModel) -> Result<RealGrid> {
        Ok(RealGrid::zeros(r.height(), r.width()))
    }
    fn denoise_complex(&self, r: &ComplexGrid, _: &NoiseModel) -> Result<ComplexGrid> {
        Ok(ComplexGrid::zeros(r.height(), r.width()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_model_json_matches_wire_format() {
        let w = NoiseModel::white(0.5).unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), r#"{"type":"white","sigma":0.5}"#);
        let s = NoiseModel::subband(vec![1.0; 13], WaveletSpec::default()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with(r#"{"type":"subband","tau":[1.0,1.0"#), "{json}");
        let back: NoiseModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation() {
        assert!(NoiseModel::white(0.0).is_err());
        assert!(NoiseModel::white(f64::NAN).is_err());
        assert!(NoiseModel::subband(vec![1.0; 12], WaveletSpec::default()).is_err());
        let mut tau = vec![0.0; 13];
        assert!(NoiseModel::subband(tau.clone(), WaveletSpec::default()).is_err());
        tau[3] = 1.0;
        assert!(NoiseModel::subband(tau, WaveletSpec::default()).is_ok());
    }

    #[test]
    fn pixel_variance_of_uniform_tau() {
        let s = NoiseModel::subband(vec![0.04; 13], WaveletSpec::default()).unwrap();
        assert!((s.pixel_variance() - 0.04).abs() < 1e-16);
    }
}
