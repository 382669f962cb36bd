//! Approximate message passing with a plug-in denoiser.
//!
//! ```text
//! x_0 = 0, z_0 = y
//! for t = 0 .. T-1:
//!     r_t     = x_t + A^T z_t
//!     s_t     = |z_t| / sqrt(m)
//!     x_{t+1} = f(r_t; s_t)
//!     z_{t+1} = y - A x_{t+1} + (1/m) div f(r_t) z_t
//! ```
//!
//! The divergence is a Monte-Carlo estimate with fresh probes every
//! iteration. Under state evolution `r_t - x` behaves like white Gaussian
//! noise of standard deviation `s_t`, which is what makes SURE applicable to
//! the final denoising step.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::denoise::{Denoiser, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::grid::RealGrid;
use crate::metrics::{excess_kurtosis, mse, psnr_from_mse, variance};
use crate::operators::RealOperator;
use crate::rng::SeededRng;
use crate::uncertainty::{divergence_field, Probe, SureConfig};

/// `|z|_2 / sqrt(m)` with `m = z.len()`.
pub fn sigma_hat(z: &[f64]) -> Result<f64> {
    if z.is_empty() {
        return invalid("sigma_hat of an empty residual");
    }
    Ok(z.iter().map(|v| v * v).sum::<f64>().sqrt() / (z.len() as f64).sqrt())
}

/// Monte-Carlo divergence of `f` at `r` for white noise level `sigma`.
pub fn onsager_divergence<D: Denoiser + ?Sized>(
    f: &D,
    r: &RealGrid,
    sigma: f64,
    k: usize,
    probe: Probe,
    rng: &SeededRng,
) -> Result<f64> {
    let cfg = SureConfig::default().k(k).probe(probe);
    Ok(divergence_field(f, r, &NoiseModel::white(sigma)?, &cfg, rng)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    /// Iteration count `T`.
    pub iterations: usize,
    /// Probes per Onsager divergence estimate.
    pub divergence_samples: usize,
    pub probe: Probe,
    /// Keep the Onsager term. Turning it off gives plain iterative
    /// thresholding, for comparison.
    pub onsager: bool,
    /// Stop once `sigma_hat` falls by less than this fraction in one
    /// iteration.
    pub early_stop: Option<f64>,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self { iterations: 30, divergence_samples: 1, probe: Probe::default(), onsager: true, early_stop: None }
    }
}

/// Early-stop tolerance used when stopping is enabled without a value.
pub const DEFAULT_EARLY_STOP: f64 = 1e-3;

/// Diagnostics of one iteration `t`. Ground-truth columns are present only
/// when the true signal was supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpRow {
    pub iteration: usize,
    pub sigma_hat: f64,
    /// Error of `x_{t+1}`.
    pub mse: Option<f64>,
    pub psnr: Option<f64>,
    /// `std(r_t - x) / sigma_hat_t`.
    pub std_ratio: Option<f64>,
    /// Excess kurtosis of `r_t - x`.
    pub kurtosis: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AmpReport {
    pub rows: Vec<AmpRow>,
}

impl AmpReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from("iteration,sigma_hat,mse,psnr,std_ratio,kurtosis\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{},{},{},{}",
                r.iteration,
                r.sigma_hat,
                opt(r.mse),
                opt(r.psnr),
                opt(r.std_ratio),
                opt(r.kurtosis)
            )
            .unwrap();
        }
        out
    }
}

/// Result of [`amp_run`]: the final estimate `x_T = f(r; sigma_hat)` together
/// with the denoiser input `r` and noise level that produced it.
#[derive(Debug, Clone)]
pub struct AmpOutput {
    pub x: RealGrid,
    pub r: RealGrid,
    pub sigma_hat: f64,
    pub report: AmpReport,
}

fn finite(v: &[f64], what: &str, t: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite {what} at iteration {t}")))
    }
}

/// Runs AMP on `y = A x + noise`. Onsager probes for iteration `t` come from
/// `rng.fork(t)`.
pub fn amp_run<O, D>(
    op: &O,
    y: &[f64],
    f: &D,
    cfg: &AmpConfig,
    rng: &SeededRng,
    x_true: Option<&RealGrid>,
) -> Result<AmpOutput>
where
    O: RealOperator + ?Sized,
    D: Denoiser + ?Sized,
{
    let m = op.measurements();
    let (h, w) = op.image_shape();
    if y.len() != m {
        return invalid(format!("{} measurements supplied, operator produces {m}", y.len()));
    }
    if cfg.iterations == 0 {
        return invalid("AMP needs at least one iteration");
    }
    if cfg.divergence_samples == 0 {
        return invalid("divergence_samples must be at least 1");
    }
    if let Some(x) = x_true {
        if (x.height(), x.width()) != (h, w) {
            return invalid(format!("ground truth is {}, operator images are {h}x{w}", x.shape()));
        }
    }
    finite(y, "measurements", 0)?;
    let peak = x_true.map(|x| x.max_abs_part()).filter(|p| *p > 0.0).unwrap_or(1.0);

    let mut x = RealGrid::zeros(h, w);
    let mut z = y.to_vec();
    let mut report = AmpReport::default();
    let mut last = None;
    for t in 0..cfg.iterations {
        let r = x.add(&op.adjoint(&z)?)?;
        let s = sigma_hat(&z)?;
        if !s.is_finite() {
            return Err(Error::Numerical(format!("sigma_hat overflowed at iteration {t}")));
        }
        let noise = NoiseModel::white(s.max(f64::MIN_POSITIVE))?;
        let x_next = f.denoise(&r, &noise)?;
        r.check_same_shape(&x_next)?;
        finite(x_next.as_slice(), "denoiser output", t)?;

        let correction = if cfg.onsager {
            let div = divergence_field(
                f,
                &r,
                &noise,
                &SureConfig::default().k(cfg.divergence_samples).probe(cfg.probe),
                &rng.fork(t as u64),
            )?
            .total();
            if !div.is_finite() {
                return Err(Error::Numerical(format!("divergence estimate {div} at iteration {t}")));
            }
            div / m as f64
        } else {
            0.0
        };
        let ax = op.forward(&x_next)?;
        let z_next: Vec<f64> =
            y.iter().zip(&ax).zip(&z).map(|((yi, ai), zi)| yi - ai + correction * zi).collect();
        finite(&z_next, "residual", t)?;

        let mut row =
            AmpRow { iteration: t, sigma_hat: s, mse: None, psnr: None, std_ratio: None, kurtosis: None };
        if let Some(truth) = x_true {
            let e = mse(&x_next, truth)?;
            row.mse = Some(e);
            row.psnr = Some(psnr_from_mse(e, peak));
            let eff: Vec<f64> = r.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| a - b).collect();
            if s > 0.0 {
                row.std_ratio = Some(variance(&eff).sqrt() / s);
            }
            row.kurtosis = Some(excess_kurtosis(&eff));
        }
        report.rows.push(row);

        let stop = match (cfg.early_stop, last) {
            (Some(tol), Some((_, prev_s))) => prev_s > 0.0 && (prev_s - s) / prev_s < tol,
            _ => false,
        };
        last = Some((r, s));
        x = x_next;
        z = z_next;
        if stop {
            break;
        }
    }
    let (r, s) = last.expect("at least one iteration ran");
    Ok(AmpOutput { x, r, sigma_hat: s, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{Identity, PixelSoft, ZeroMap};
    use crate::operators::GaussianOperator;
    use crate::phantom::sparse_spikes;
    use crate::rng::{gaussian_grid, streams};

    #[test]
    fn sigma_hat_cases() {
        assert_eq!(sigma_hat(&[0.0; 5]).unwrap(), 0.0);
        assert!((sigma_hat(&[1.0; 7]).unwrap() - 1.0).abs() < 1e-15);
        assert!(sigma_hat(&[]).is_err());
        let z = gaussian_grid(&SeededRng::new(1, 1), 1, 333, 2.0).unwrap().into_vec();
        let mut acc = 0.0;
        for v in &z {
            acc += v * v;
        }
        let oracle = (acc / 333.0).sqrt();
        assert!((sigma_hat(&z).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn onsager_identity_and_zero() {
        let r = gaussian_grid(&SeededRng::new(2, 1), 32, 32, 1.0).unwrap();
        let rng = SeededRng::new(2, streams::ONSAGER);
        let d = onsager_divergence(&Identity, &r, 0.5, 1, Probe::Rademacher, &rng).unwrap();
        assert!((d / 1024.0 - 1.0).abs() < 1e-6);
        assert_eq!(onsager_divergence(&ZeroMap, &r, 0.5, 1, Probe::Rademacher, &rng).unwrap(), 0.0);
    }

    fn operator(seed: u64, m: usize, n: usize) -> GaussianOperator {
        GaussianOperator::new(&SeededRng::new(seed, streams::OPERATOR), m, (n, n)).unwrap()
    }

    #[test]
    fn zero_measurements_stay_zero() {
        let op = operator(3, 40, 16);
        let cfg = AmpConfig { iterations: 5, ..AmpConfig::default() };
        let out = amp_run(&op, &[0.0; 40], &ZeroMap, &cfg, &SeededRng::new(3, 6), None).unwrap();
        assert!(out.x.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(out.report.rows.len(), 5);
    }

    #[test]
    fn one_identity_iteration_is_adjoint() {
        let op = operator(4, 60, 16);
        let y = gaussian_grid(&SeededRng::new(4, 2), 1, 60, 1.0).unwrap().into_vec();
        let cfg = AmpConfig { iterations: 1, ..AmpConfig::default() };
        let out = amp_run(&op, &y, &Identity, &cfg, &SeededRng::new(4, 6), None).unwrap();
        assert_eq!(out.x, op.adjoint(&y).unwrap());
        assert_eq!(out.r, out.x);
        assert_eq!(out.sigma_hat, sigma_hat(&y).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let op = operator(5, 20, 16);
        let cfg = AmpConfig::default();
        assert!(amp_run(&op, &[0.0; 19], &Identity, &cfg, &SeededRng::new(5, 6), None).is_err());
        let zero_iters = AmpConfig { iterations: 0, ..cfg };
        assert!(amp_run(&op, &[0.0; 20], &Identity, &zero_iters, &SeededRng::new(5, 6), None).is_err());
        let mut y = vec![0.0; 20];
        y[3] = f64::NAN;
        assert!(matches!(
            amp_run(&op, &y, &Identity, &cfg, &SeededRng::new(5, 6), None),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn early_stop_and_csv() {
        let n = 32;
        let op = operator(6, 400, n);
        let x = sparse_spikes(n, n, 10, &SeededRng::new(6, streams::SIGNAL)).unwrap();
        let y = op.forward(&x).unwrap();
        let f = PixelSoft { c: 2.0 };
        let cfg = AmpConfig { iterations: 200, early_stop: Some(0.5), ..AmpConfig::default() };
        let out = amp_run(&op, &y, &f, &cfg, &SeededRng::new(6, 6), Some(&x)).unwrap();
        assert!(out.report.rows.len() < 200);
        let csv = out.report.to_csv();
        assert!(csv.starts_with("iteration,sigma_hat,mse,psnr,std_ratio,kurtosis\n0,"));
        let plain = amp_run(&op, &y, &f, &cfg, &SeededRng::new(6, 6), None).unwrap().report.to_csv();
        assert!(plain.lines().nth(1).unwrap().ends_with(",,,,"));
    }

    #[test]
    fn deterministic_trajectory() {
        let n = 32;
        let op = operator(7, 400, n);
        let x = sparse_spikes(n, n, 10, &SeededRng::new(7, streams::SIGNAL)).unwrap();
        let y = op.forward(&x).unwrap();
        let f = PixelSoft { c: 2.0 };
        let cfg = AmpConfig { iterations: 8, ..AmpConfig::default() };
        let a = amp_run(&op, &y, &f, &cfg, &SeededRng::new(7, 6), Some(&x)).unwrap();
        let b = amp_run(&op, &y, &f, &cfg, &SeededRng::new(7, 6), Some(&x)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn overflowing_residual_is_numerical() {
        let op = operator(5, 40, 10);
        let y = vec![1e200; 40];
        let res = amp_run(&op, &y, &Identity, &AmpConfig::default(), &SeededRng::new(5, 6), None);
        assert!(matches!(res, Err(Error::Numerical(_))), "{res:?}");
    }
}
