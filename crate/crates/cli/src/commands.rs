use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sure_amp::amp::{amp_run, AmpConfig};
use sure_amp::colored::{gen_colored_problem, vd_recon_approx, zero_filled, VdConfig};
use sure_amp::denoise::{
    Denoisable, Denoiser, Identity, NoiseModel, PixelSoft, PluginDenoiser, SubbandSoft, SureShrink, WaveletSoft,
};
use sure_amp::io::{read_grid, read_pgm, GridData};
use sure_amp::metrics::psnr;
use sure_amp::operators::{make_vd_mask, FourierMaskOperator, GaussianOperator, RealOperator, VdMaskParams};
use sure_amp::phantom::{dyadic_blocks, shepp_logan, sparse_spikes};
use sure_amp::rng::{complex_gaussian_grid, gaussian_grid, streams};
use sure_amp::uncertainty::{
    accuracy_sweep, gsure_heatmap, heatmap_discrepancy, mse_heatmap, sweep_csv, Discrepancy,
};
use sure_amp::{ComplexGrid, Grid, RealGrid, SeededRng, WaveletSpec};

use crate::config::{Measure, Phantom, RunConfig};
use crate::error::{usage, CliError};
use crate::output::OutDir;

pub const SIDECAR: &str = "params.json";
pub const EVAL_PATCHES: [usize; 4] = [8, 16, 32, 48];
pub const EVAL_KS: [usize; 3] = [1, 2, 3];

/// Noise description and denoiser settings written next to a reconstruction;
/// `heatmap` and `eval` rebuild the denoiser from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub measure: Measure,
    pub complex: bool,
    pub denoiser: String,
    pub plugin_args: Vec<String>,
    pub threshold: f64,
    pub levels: usize,
    /// Noise level of `r` (`sigma_hat` or per-subband `tau`).
    pub noise: NoiseModel,
    pub psnr: Option<f64>,
    pub baseline_psnr: Option<f64>,
}

pub fn load_image(cfg: &RunConfig) -> Result<RealGrid, CliError> {
    if let Some(path) = &cfg.image {
        return Ok(read_pgm(path)?);
    }
    let n = cfg.size;
    let rng = SeededRng::new(cfg.seed, streams::SIGNAL);
    Ok(match cfg.phantom {
        Phantom::SheppLogan => shepp_logan(n, n),
        Phantom::Spikes => sparse_spikes(n, n, (n * n / 200).max(1), &rng)?,
        Phantom::Blocks => dyadic_blocks(n, n, (n / 8).max(1), 6, &rng)?,
    })
}

pub fn make_denoiser(
    name: &str,
    plugin_args: &[String],
    threshold: f64,
    spec: WaveletSpec,
) -> Result<Box<dyn Denoiser>, CliError> {
    let c = threshold;
    Ok(match name {
        "soft" => Box::new(WaveletSoft { c, spec }),
        "subband" => Box::new(SubbandSoft { c, spec }),
        "sure-shrink" => Box::new(SureShrink { spec }),
        "pixel-soft" => Box::new(PixelSoft { c }),
        "identity" => Box::new(Identity),
        other => match other.strip_prefix("plugin:") {
            Some(path) => {
                let args: Vec<&str> = plugin_args.iter().map(String::as_str).collect();
                Box::new(PluginDenoiser::spawn(path, &args)?)
            }
            None => return usage(format!("unknown denoiser {other:?}")),
        },
    })
}

fn peak<T: sure_amp::Sample>(x: &Grid<T>) -> f64 {
    x.as_slice().iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn psnr_or_none<T: sure_amp::Sample>(a: &Grid<T>, truth: &Grid<T>) -> Result<Option<f64>, CliError> {
    let p = peak(truth);
    Ok(if p > 0.0 { Some(psnr(a, truth, p)?) } else { None })
}

/// Scales a unit noise draw so that `10 log10(|clean|^2 / |noise|^2)` equals
/// `snr_db` exactly.
fn scale_to_snr(clean_energy: f64, raw_energy: f64, snr_db: f64) -> f64 {
    if raw_energy == 0.0 {
        return 0.0;
    }
    (clean_energy / (raw_energy * 10f64.powf(snr_db / 10.0))).sqrt()
}

fn sampling_operator(cfg: &RunConfig, h: usize, w: usize) -> Result<FourierMaskOperator, CliError> {
    if cfg.rate == 1.0 {
        return Ok(FourierMaskOperator::full(h, w));
    }
    let params = VdMaskParams { rate: cfg.rate, ..VdMaskParams::default() };
    Ok(make_vd_mask(&SeededRng::new(cfg.seed, streams::MASK), h, w, &params)?)
}

fn sidecar(cfg: &RunConfig, complex: bool, noise: NoiseModel) -> Sidecar {
    Sidecar {
        measure: cfg.measure,
        complex,
        denoiser: cfg.denoiser.clone(),
        plugin_args: cfg.plugin_args.clone(),
        threshold: cfg.threshold,
        levels: cfg.levels,
        noise,
        psnr: None,
        baseline_psnr: None,
    }
}

pub fn cmd_mask(cfg: &RunConfig) -> Result<String, CliError> {
    let (h, w) = match &cfg.image {
        Some(_) => {
            let x = load_image(cfg)?;
            (x.height(), x.width())
        }
        None => (cfg.size, cfg.size),
    };
    let op = sampling_operator(cfg, h, w)?;
    let mut out = OutDir::create(&cfg.out)?;
    out.put_real("mask.grd", &op.mask_grid())?;
    out.put_real("prob.grd", op.prob())?;
    out.finish("mask", cfg)?;
    Ok(format!("selected {} of {h}x{w} samples (rate {})\n", op.measurements(), cfg.rate))
}

pub fn cmd_recon(cfg: &RunConfig) -> Result<String, CliError> {
    let x = load_image(cfg)?;
    let f = make_denoiser(&cfg.denoiser, &cfg.plugin_args, cfg.threshold, cfg.spec())?;
    let mut out = OutDir::create(&cfg.out)?;
    let side = match cfg.measure {
        Measure::Gaussian => recon_gaussian(cfg, &x, f.as_ref(), &mut out)?,
        Measure::Fourier => recon_fourier(cfg, &x.to_complex(), f.as_ref(), &mut out)?,
    };
    out.put_json(SIDECAR, &side)?;
    out.finish("recon", cfg)?;
    let fmt = |v: Option<f64>| v.map(|p| format!("{p:.2} dB")).unwrap_or_else(|| "n/a".into());
    Ok(format!("PSNR {} (baseline {})\n", fmt(side.psnr), fmt(side.baseline_psnr)))
}

fn recon_gaussian(cfg: &RunConfig, x: &RealGrid, f: &dyn Denoiser, out: &mut OutDir) -> Result<Sidecar, CliError> {
    let (h, w) = (x.height(), x.width());
    let m = ((cfg.rate * (h * w) as f64).round() as usize).max(1);
    let op = GaussianOperator::new(&SeededRng::new(cfg.seed, streams::OPERATOR), m, (h, w))?;
    let clean = op.forward(x)?;
    let raw = gaussian_grid(&SeededRng::new(cfg.seed, streams::NOISE), 1, m, 1.0)?;
    let s = scale_to_snr(clean.iter().map(|v| v * v).sum(), raw.norm_sqr(), cfg.snr_db);
    let y: Vec<f64> = clean.iter().zip(raw.as_slice()).map(|(a, b)| a + s * b).collect();
    let amp_cfg = AmpConfig {
        iterations: cfg.iterations(),
        probe: cfg.probe,
        early_stop: cfg.early_stop,
        onsager: cfg.onsager,
        ..AmpConfig::default()
    };
    let res = amp_run(&op, &y, f, &amp_cfg, &SeededRng::new(cfg.seed, streams::ONSAGER), Some(x))?;
    let baseline = op.adjoint(&y)?;
    let mut side = sidecar(cfg, false, NoiseModel::white(res.sigma_hat)?);
    side.psnr = psnr_or_none(&res.x, x)?;
    side.baseline_psnr = psnr_or_none(&baseline, x)?;
    out.put_real("x_true.grd", x)?;
    out.put_real("x_hat.grd", &res.x)?;
    out.put_real("r.grd", &res.r)?;
    out.put_real("baseline.grd", &baseline)?;
    out.put("report.csv", res.report.to_csv().as_bytes())?;
    Ok(side)
}

fn recon_fourier(cfg: &RunConfig, x: &ComplexGrid, f: &dyn Denoiser, out: &mut OutDir) -> Result<Sidecar, CliError> {
    let (h, w) = (x.height(), x.width());
    let op = sampling_operator(cfg, h, w)?;
    let clean = op.forward(x)?;
    let m = clean.len();
    let raw = complex_gaussian_grid(&SeededRng::new(cfg.seed, streams::NOISE), 1, m, 1.0)?;
    let s = scale_to_snr(clean.iter().map(|v| v.norm_sqr()).sum(), raw.norm_sqr(), cfg.snr_db);
    let y: Vec<Complex64> = clean.iter().zip(raw.as_slice()).map(|(a, b)| a + b * s).collect();
    let noise_var = s * s * raw.norm_sqr() / m as f64;
    if !noise_var.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(sure_amp::Error::Numerical("simulated measurements overflow".into()).into());
    }
    let vd = VdConfig { iterations: cfg.iterations(), noise_var, spec: cfg.spec() };
    let res = vd_recon_approx(&op, &y, f, &vd)?;
    let baseline = zero_filled(&op, &y)?;
    let mut side = sidecar(cfg, true, NoiseModel::subband(res.tau.clone(), cfg.spec())?);
    side.psnr = psnr_or_none(&res.x, x)?;
    side.baseline_psnr = psnr_or_none(&baseline, x)?;
    let mut report = String::from("iteration");
    for j in 0..cfg.spec().subband_count() {
        write!(report, ",tau_{j}").unwrap();
    }
    report.push('\n');
    for (t, tau) in res.tau_history.iter().enumerate() {
        write!(report, "{t}").unwrap();
        for v in tau {
            write!(report, ",{v:e}").unwrap();
        }
        report.push('\n');
    }
    out.put_complex("x_true.grd", x)?;
    out.put_complex("x_hat.grd", &res.x)?;
    out.put_complex("r.grd", &res.r)?;
    out.put_complex("baseline.grd", &baseline)?;
    out.put_real("mask.grd", &op.mask_grid())?;
    out.put_real("prob.grd", op.prob())?;
    out.put("report.csv", report.as_bytes())?;
    Ok(side)
}

/// Grids of one sample type read back from a run directory.
trait FromData: Denoisable {
    fn from_data(d: GridData) -> Result<Grid<Self>, CliError>;
}

impl FromData for f64 {
    fn from_data(d: GridData) -> Result<RealGrid, CliError> {
        Ok(d.into_real()?)
    }
}

impl FromData for Complex64 {
    fn from_data(d: GridData) -> Result<ComplexGrid, CliError> {
        Ok(d.into_complex())
    }
}

struct Problem<T: sure_amp::Sample> {
    side: Sidecar,
    r: Grid<T>,
    xhat: Grid<T>,
    truth: Option<Grid<T>>,
}

fn read_sidecar(dir: &Path) -> Result<Sidecar, CliError> {
    let path = dir.join(SIDECAR);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::Usage(format!(
            "missing noise sidecar {}; run `recon` first or pass --synthetic",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_input<T: FromData>(dir: &Path, name: &str) -> Result<Grid<T>, CliError> {
    let path = dir.join(name);
    if !path.is_file() {
        return usage(format!("missing input {}", path.display()));
    }
    T::from_data(read_grid(path)?)
}

fn load_problem<T: FromData>(dir: &Path, side: Sidecar) -> Result<Problem<T>, CliError> {
    let truth_path = dir.join("x_true.grd");
    Ok(Problem {
        r: read_input(dir, "r.grd")?,
        xhat: read_input(dir, "x_hat.grd")?,
        truth: if truth_path.is_file() { Some(T::from_data(read_grid(truth_path)?)?) } else { None },
        side,
    })
}

/// Writes a denoising problem `r = x + noise` and its denoised estimate into
/// the output directory: real white noise for `gaussian`, complex
/// subband-colored noise with a 100x variance spread for `fourier`.
fn synthesize(cfg: &RunConfig, out: &mut OutDir) -> Result<Sidecar, CliError> {
    let x = load_image(cfg)?;
    let power = x.norm_sqr() / x.len() as f64;
    let var = power * 10f64.powf(-cfg.snr_db / 10.0);
    let rng = SeededRng::new(cfg.seed, streams::NOISE);
    let f = make_denoiser(&cfg.denoiser, &cfg.plugin_args, cfg.threshold, cfg.spec())?;
    let side = match cfg.measure {
        Measure::Gaussian => {
            let noise = NoiseModel::white(var.sqrt())?;
            let r = x.add(&gaussian_grid(&rng, x.height(), x.width(), var.sqrt())?)?;
            let xhat = f.denoise(&r, &noise)?;
            out.put_real("x_true.grd", &x)?;
            out.put_real("r.grd", &r)?;
            out.put_real("x_hat.grd", &xhat)?;
            sidecar(cfg, false, noise)
        }
        Measure::Fourier => {
            let spec = cfg.spec();
            let j = spec.subband_count();
            let tau: Vec<f64> = (0..j)
                .map(|i| var * 10f64.powf(2.0 * i as f64 / (j.max(2) - 1) as f64 - 1.0))
                .collect();
            let p = gen_colored_problem(&rng, &x.to_complex(), &tau, &spec)?;
            let noise = p.noise_model()?;
            let xhat = f.denoise_complex(&p.r, &noise)?;
            out.put_complex("x_true.grd", &p.x_true)?;
            out.put_complex("r.grd", &p.r)?;
            out.put_complex("x_hat.grd", &xhat)?;
            sidecar(cfg, true, noise)
        }
    };
    out.put_json(SIDECAR, &side)?;
    Ok(side)
}

fn input_sidecar(cfg: &RunConfig, out: &mut OutDir) -> Result<(Sidecar, std::path::PathBuf), CliError> {
    if cfg.synthetic {
        Ok((synthesize(cfg, out)?, cfg.out.clone()))
    } else {
        let dir = cfg.input_dir().to_path_buf();
        Ok((read_sidecar(&dir)?, dir))
    }
}

pub fn cmd_heatmap(cfg: &RunConfig) -> Result<String, CliError> {
    let mut out = OutDir::create(&cfg.out)?;
    let (side, dir) = input_sidecar(cfg, &mut out)?;
    let text = if side.complex {
        heatmap_for::<Complex64>(cfg, load_problem(&dir, side)?, &mut out)?
    } else {
        heatmap_for::<f64>(cfg, load_problem(&dir, side)?, &mut out)?
    };
    out.finish("heatmap", cfg)?;
    Ok(text)
}

fn heatmap_for<T: FromData>(cfg: &RunConfig, p: Problem<T>, out: &mut OutDir) -> Result<String, CliError> {
    let spec = WaveletSpec { levels: p.side.levels };
    let f = make_denoiser(&p.side.denoiser, &p.side.plugin_args, p.side.threshold, spec)?;
    let sc = cfg.sure_config();
    let rng = SeededRng::new(cfg.seed, streams::PROBES);
    let hm = gsure_heatmap(&p.r, &p.xhat, f.as_ref(), &p.side.noise, &sc, &rng)?;
    out.put_real("heatmap.grd", hm.values())?;
    out.put_real("heatmap_clamped.grd", &hm.clamped())?;
    out.put("heatmap.csv", hm.to_csv().as_bytes())?;
    let mut text = format!(
        "heatmap {}x{} patch {} stride {} K {}: mean estimated risk {:e}\n",
        hm.values().height(),
        hm.values().width(),
        sc.patch,
        sc.stride,
        sc.k,
        hm.mean()
    );
    if let Some(truth) = &p.truth {
        let m = mse_heatmap(&p.xhat, truth, &sc)?;
        out.put_real("mse_heatmap.grd", m.values())?;
        let d = heatmap_discrepancy(&hm, &m, Discrepancy::AbsRelative)?;
        writeln!(text, "true patch MSE mean {:e}; mean |MSE - estimate| / MSE {d:.4}", m.mean()).unwrap();
    }
    Ok(text)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<String, CliError> {
    let mut out = OutDir::create(&cfg.out)?;
    let (side, dir) = input_sidecar(cfg, &mut out)?;
    let csv = if side.complex {
        eval_for::<Complex64>(cfg, load_problem(&dir, side)?)?
    } else {
        eval_for::<f64>(cfg, load_problem(&dir, side)?)?
    };
    out.put("eval.csv", csv.as_bytes())?;
    out.finish("eval", cfg)?;
    Ok(csv)
}

fn eval_for<T: FromData>(cfg: &RunConfig, p: Problem<T>) -> Result<String, CliError> {
    let Some(truth) = &p.truth else {
        return usage("eval needs the ground truth x_true.grd next to the reconstruction");
    };
    let (h, w) = (p.r.height(), p.r.width());
    let largest = EVAL_PATCHES[EVAL_PATCHES.len() - 1];
    if h.min(w) < largest {
        return usage(format!("eval sweeps patches up to {largest}; the image is only {h}x{w}"));
    }
    let spec = WaveletSpec { levels: p.side.levels };
    let f = make_denoiser(&p.side.denoiser, &p.side.plugin_args, p.side.threshold, spec)?;
    let rows = accuracy_sweep(
        &p.r,
        &p.xhat,
        truth,
        f.as_ref(),
        &p.side.noise,
        &EVAL_PATCHES,
        &EVAL_KS,
        &cfg.sure_config(),
        Discrepancy::AbsRelative,
        &SeededRng::new(cfg.seed, streams::PROBES),
    )?;
    Ok(sweep_csv(&rows))
}
