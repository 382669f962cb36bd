//! Ground-truth-free risk estimates for denoiser outputs.
//!
//! For `r = x + noise` and `xhat = f(r)`, SURE (white noise) and GSURE
//! (colored noise) are unbiased estimates of the mean squared error of
//! `xhat`. Both are built here from per-pixel terms
//!
//! `t_i = |r_i - xhat_i|^2 - C_ii + 2 kappa d_i`
//!
//! where `C_ii` is the noise variance at pixel `i` and `kappa d_i` the
//! pixel's share of the Monte-Carlo divergence. Averaging `t` over the whole
//! image gives the global estimate; averaging over overlapping patches and
//! then over the patches covering each pixel gives a heatmap.

mod divergence;
mod heatmap;
mod sweep;

pub use divergence::{divergence_field, epsilon_for, DivergenceField};
pub use heatmap::{
    gsure_from_field, gsure_global, gsure_heatmap, heatmap_discrepancy, mse_heatmap,
    patch_origins, sure_global, sure_heatmap, Discrepancy, Heatmap,
};
pub use sweep::{accuracy_sweep, sweep_csv, SweepRow};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Distribution of the Monte-Carlo probe vectors `b_k`. Both have identity
/// covariance; Rademacher probes make the estimate exact for linear
/// denoisers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Probe {
    #[default]
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SureConfig {
    /// Side of the square patches.
    pub patch: usize,
    /// Distance between neighbouring patch origins.
    pub stride: usize,
    /// Monte-Carlo probes per divergence estimate.
    pub k: usize,
    pub probe: Probe,
    /// The perturbation step is `max|r| / eps_divisor`, ...
    pub eps_divisor: f64,
    /// ... but never below `eps_floor`.
    pub eps_floor: f64,
}

impl Default for SureConfig {
    fn default() -> Self {
        Self::with_patch(48)
    }
}

impl SureConfig {
    /// Defaults with the given patch size and stride `patch / 4`.
    pub fn with_patch(patch: usize) -> Self {
        Self {
            patch,
            stride: (patch / 4).max(1),
            k: 2,
            probe: Probe::default(),
            eps_divisor: 1000.0,
            eps_floor: 1e-6,
        }
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn probe(mut self, probe: Probe) -> Self {
        self.probe = probe;
        self
    }

    /// Checks the Monte-Carlo settings.
    pub fn validate_probes(&self) -> Result<()> {
        if self.k == 0 {
            return invalid("number of Monte-Carlo probes K must be at least 1");
        }
        if !(self.eps_divisor > 0.0) || !(self.eps_floor > 0.0) {
            return invalid("epsilon divisor and floor must be positive");
        }
        Ok(())
    }

    /// Checks everything, including that patches fit an `h`x`w` image.
    pub fn validate(&self, h: usize, w: usize) -> Result<()> {
        self.validate_probes()?;
        if self.patch == 0 || self.patch > h.min(w) {
            return invalid(format!("patch size {} must be in [1, {}]", self.patch, h.min(w)));
        }
        if self.stride == 0 || self.stride > self.patch {
            return invalid(format!("stride {} must be in [1, patch = {}]", self.stride, self.patch));
        }
        Ok(())
    }
}
