//! Denoising problems with noise that is white within each wavelet subband
//! but differs between subbands, and an approximate variable-density Fourier
//! reconstruction loop that produces such problems from k-space data.

use std::f64::consts::{LN_2, PI};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::denoise::{Denoiser, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexGrid, Grid, RealGrid, Sample};
use crate::io::{read_grid, write_complex_grid};
use crate::operators::FourierMaskOperator;
use crate::rng::{complex_gaussian_grid, SeededRng};
use crate::wavelet::{dwt2, idwt2, subband_map, WaveletSpec};

/// `r = x + Psi^T w`, `w` circular Gaussian with variance `tau[j]` in
/// subband `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredProblem {
    pub x_true: ComplexGrid,
    pub r: ComplexGrid,
    pub tau: Vec<f64>,
    pub spec: WaveletSpec,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    tau: Vec<f64>,
}

impl ColoredProblem {
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::subband(self.tau.clone(), self.spec)
    }

    /// Writes `<stem>_x.grd`, `<stem>_r.grd` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        write_complex_grid(dir.join(format!("{stem}_x.grd")), &self.x_true)?;
        write_complex_grid(dir.join(format!("{stem}_r.grd")), &self.r)?;
        let json = serde_json::to_string(&Sidecar { tau: self.tau.clone() })
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str, spec: WaveletSpec) -> Result<Self> {
        let dir = dir.as_ref();
        let x_true = read_grid(dir.join(format!("{stem}_x.grd")))?.into_complex();
        let r = read_grid(dir.join(format!("{stem}_r.grd")))?.into_complex();
        let text = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
        let Sidecar { tau } = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        check_tau_nonneg(&tau, &spec)?;
        x_true.check_same_shape(&r)?;
        Ok(Self { x_true, r, tau, spec })
    }
}

fn check_tau_nonneg(tau: &[f64], spec: &WaveletSpec) -> Result<()> {
    if tau.len() != spec.subband_count() {
        return invalid(format!("tau has {} entries, expected {}", tau.len(), spec.subband_count()));
    }
    if let Some(j) = tau.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
        return invalid(format!("tau[{j}] ({}) = {} must be finite and >= 0", spec.subband_name(j), tau[j]));
    }
    Ok(())
}

/// Draws a problem instance around `x`. A zero `tau` gives `r = x`.
pub fn gen_colored_problem(
    rng: &SeededRng,
    x: &ComplexGrid,
    tau: &[f64],
    spec: &WaveletSpec,
) -> Result<ColoredProblem> {
    let (h, w) = (x.height(), x.width());
    spec.check_dims(h, w)?;
    check_tau_nonneg(tau, spec)?;
    let map = subband_map(spec, h, w)?;
    let mut coeffs = complex_gaussian_grid(rng, h, w, 1.0)?;
    for (c, &j) in coeffs.as_mut_slice().iter_mut().zip(map.indices()) {
        *c *= tau[j as usize].sqrt();
    }
    let noise = idwt2(&coeffs, spec)?;
    Ok(ColoredProblem { x_true: x.clone(), r: x.add(&noise)?, tau: tau.to_vec(), spec: *spec })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust per-subband variance of a residual from the median coefficient
/// magnitude. Complex: `median|v|^2 / ln 2` (circular Gaussian modulus is
/// Rayleigh). Real: `(median|v| / 0.6745)^2`.
pub fn estimate_subband_tau<T: Sample>(residual: &Grid<T>, spec: &WaveletSpec) -> Result<Vec<f64>> {
    let (h, w) = (residual.height(), residual.width());
    let coeffs = dwt2(residual, spec)?;
    let map = subband_map(spec, h, w)?;
    let mut bands: Vec<Vec<f64>> = vec![Vec::new(); spec.subband_count()];
    for (c, &j) in coeffs.as_slice().iter().zip(map.indices()) {
        bands[j as usize].push(c.abs());
    }
    Ok(bands
        .into_iter()
        .map(|b| {
            let med = median(b);
            if T::IS_COMPLEX {
                med * med / LN_2
            } else {
                let s = med / 0.674_489_750_196_081_7;
                s * s
            }
        })
        .collect())
}

/// Energy of subband `j` in the Haar transform of a unit-norm plane wave, as
/// a function of the per-axis angular frequencies. Rows of the returned
/// table are subbands, columns are k-space locations in natural order.
pub fn subband_frequency_weights(spec: &WaveletSpec, h: usize, w: usize) -> Result<Vec<Vec<f64>>> {
    spec.check_dims(h, w)?;
    let levels = spec.levels;
    // per axis: approximation energy after l levels, detail energy at level l
    let axis = |n: usize| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut approx = vec![vec![1.0; n]; levels + 1];
        let mut detail = vec![vec![0.0; n]; levels + 1];
        for k in 0..n {
            let omega = 2.0 * PI * k as f64 / n as f64;
            for l in 1..=levels {
                let c = (omega * (1u64 << (l - 1)) as f64).cos();
                approx[l][k] = approx[l - 1][k] * (1.0 + c) / 2.0;
                detail[l][k] = approx[l - 1][k] * (1.0 - c) / 2.0;
            }
        }
        (approx, detail)
    };
    let (ar, dr) = axis(h);
    let (ac, dc) = axis(w);
    let mut table = vec![vec![0.0; h * w]; spec.subband_count()];
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            table[0][idx] = ar[levels][i] * ac[levels][j];
            for l in 1..=levels {
                let base = 1 + 3 * (levels - l);
                table[base][idx] = ar[l][i] * dc[l][j];
                table[base + 1][idx] = dr[l][i] * ac[l][j];
                table[base + 2][idx] = dr[l][i] * dc[l][j];
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdConfig {
    pub iterations: usize,
    /// Variance of the complex measurement noise per k-space sample.
    pub noise_var: f64,
    pub spec: WaveletSpec,
}

impl Default for VdConfig {
    fn default() -> Self {
        Self { iterations: 10, noise_var: 0.0, spec: WaveletSpec::default() }
    }
}

/// Output of [`vd_recon_approx`].
#[derive(Debug, Clone)]
pub struct VdOutput {
    pub x: ComplexGrid,
    pub r: ComplexGrid,
    pub tau: Vec<f64>,
    /// `tau` used at every iteration.
    pub tau_history: Vec<Vec<f64>>,
}

const TAU_FLOOR: f64 = 1e-12;

/// Approximate variable-density reconstruction (not a faithful VDAMP):
///
/// ```text
/// x_0 = 0
/// for t = 0 .. T-1:
///     z_t     = y - forward(x_t)
///     r_t     = x_t + F^H P^-1 z_t            (density-compensated adjoint)
///     tau_t   = per-subband variance of r_t - x, propagated from k-space
///     x_{t+1} = f(r_t; tau_t)
/// ```
///
/// The k-space variance of `r_t - x` at a sampled location is estimated as
/// `(1 - p)/p^2 |z|^2 + noise_var / p`, and mapped to subbands with
/// [`subband_frequency_weights`]. Returns `x_T`, the last denoiser input and
/// its `tau`.
pub fn vd_recon_approx<D: Denoiser + ?Sized>(
    op: &FourierMaskOperator,
    y: &[Complex64],
    f: &D,
    cfg: &VdConfig,
) -> Result<VdOutput> {
    let (h, w) = op.image_shape();
    let spec = cfg.spec;
    spec.check_dims(h, w).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{m}; crop or pad the image")),
        other => other,
    })?;
    if y.len() != op.measurements() {
        return invalid(format!("{} k-space samples supplied, mask selects {}", y.len(), op.measurements()));
    }
    if cfg.iterations == 0 {
        return invalid("at least one iteration is required");
    }
    if !(cfg.noise_var >= 0.0) || !cfg.noise_var.is_finite() {
        return invalid(format!("noise variance must be finite and >= 0, got {}", cfg.noise_var));
    }
    let weights = subband_frequency_weights(&spec, h, w)?;
    let map = subband_map(&spec, h, w)?;
    let counts = map.counts();
    let prob = op.prob().as_slice();

    let mut x = ComplexGrid::zeros(h, w);
    let mut history = Vec::new();
    let mut last = None;
    let mut first_norm = None;
    for t in 0..cfg.iterations {
        let fx = op.forward(&x)?;
        let z: Vec<Complex64> = y.iter().zip(&fx).map(|(a, b)| a - b).collect();
        let r = x.add(&op.adjoint_density_compensated(&z)?)?;

        let mut tau = vec![0.0; spec.subband_count()];
        for (zk, &loc) in z.iter().zip(op.selected()) {
            let p = prob[loc];
            let v = (1.0 - p) / (p * p) * zk.norm_sqr() + cfg.noise_var / p;
            for (j, t) in tau.iter_mut().enumerate() {
                *t += v * weights[j][loc];
            }
        }
        let top = tau.iter().cloned().fold(0.0, f64::max).max(TAU_FLOOR);
        for (j, t) in tau.iter_mut().enumerate() {
            *t = (*t / counts[j] as f64).max(TAU_FLOOR * top);
        }

        let norm = r.norm_sqr().sqrt();
        let base = *first_norm.get_or_insert(norm.max(f64::MIN_POSITIVE));
        if !norm.is_finite() || norm > 1e3 * base {
            return Err(Error::Numerical(format!(
                "iterates diverged at iteration {t}: |r| = {norm:e}, initially {base:e}"
            )));
        }
        let x_next = f.denoise_complex(&r, &NoiseModel::subband(tau.clone(), spec)?)?;
        r.check_same_shape(&x_next)?;
        history.push(tau.clone());
        last = Some((r, tau));
        x = x_next;
    }
    let (r, tau) = last.expect("at least one iteration ran");
    Ok(VdOutput { x, r, tau, tau_history: history })
}

/// Zero-filled reconstruction: unsampled k-space set to zero, then the
/// inverse unitary DFT.
pub fn zero_filled(op: &FourierMaskOperator, y: &[Complex64]) -> Result<ComplexGrid> {
    op.adjoint(y)
}

/// Magnitude image of a complex grid.
pub fn magnitude(x: &ComplexGrid) -> RealGrid {
    x.map(|v| v.norm())
}
