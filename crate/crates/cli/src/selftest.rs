//! Quick invariant checks on the installed build.

use num_complex::Complex64;
use sure_amp::colored::gen_colored_problem;
use sure_amp::denoise::{Denoiser, Identity, NoiseModel, PixelSoft, SubbandSoft, WaveletSoft};
use sure_amp::metrics::{mean, mse, variance};
use sure_amp::operators::{make_vd_mask, GaussianOperator, RealOperator, VdMaskParams};
use sure_amp::phantom::{dyadic_blocks, shepp_logan};
use sure_amp::rng::{complex_gaussian_grid, gaussian_grid, streams};
use sure_amp::uncertainty::{divergence_field, gsure_heatmap, sure_global, sure_heatmap, SureConfig};
use sure_amp::wavelet::{dwt2, idwt2};
use sure_amp::{SeededRng, WaveletSpec};

type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn wavelet() -> Check {
    let spec = WaveletSpec::default();
    let x = gaussian_grid(&SeededRng::new(1, 1), 64, 64, 1.0).map_err(|e| e.to_string())?;
    let c = dwt2(&x, &spec).map_err(|e| e.to_string())?;
    let back = idwt2(&c, &spec).map_err(|e| e.to_string())?;
    let pr = x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let parseval = (x.norm_sqr() - c.norm_sqr()).abs() / x.norm_sqr();
    verdict(pr < 1e-10 && parseval < 1e-10, format!("reconstruction {pr:.1e}, energy {parseval:.1e}"))
}

fn adjoints() -> Check {
    let e = |e: sure_amp::Error| e.to_string();
    let g = GaussianOperator::new(&SeededRng::new(2, streams::OPERATOR), 200, (16, 16)).map_err(e)?;
    let u = gaussian_grid(&SeededRng::new(3, 1), 16, 16, 1.0).map_err(e)?;
    let v = gaussian_grid(&SeededRng::new(4, 1), 1, 200, 1.0).map_err(e)?.into_vec();
    let lhs: f64 = g.forward(&u).map_err(e)?.iter().zip(&v).map(|(a, b)| a * b).sum();
    let rhs: f64 = u.as_slice().iter().zip(g.adjoint(&v).map_err(e)?.as_slice()).map(|(a, b)| a * b).sum();
    let dense = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
    let f = make_vd_mask(&SeededRng::new(5, streams::MASK), 32, 32, &VdMaskParams::default()).map_err(e)?;
    let uc = complex_gaussian_grid(&SeededRng::new(6, 1), 32, 32, 1.0).map_err(e)?;
    let vc = complex_gaussian_grid(&SeededRng::new(7, 1), 1, f.measurements(), 1.0).map_err(e)?.into_vec();
    let lhs: Complex64 = f.forward(&uc).map_err(e)?.iter().zip(&vc).map(|(a, b)| a * b.conj()).sum();
    let rhs: Complex64 =
        uc.as_slice().iter().zip(f.adjoint(&vc).map_err(e)?.as_slice()).map(|(a, b)| a * b.conj()).sum();
    let fourier = (lhs - rhs).norm() / lhs.norm().max(rhs.norm());
    verdict(dense < 1e-12 && fourier < 1e-10, format!("dense {dense:.1e}, fourier {fourier:.1e}"))
}

fn mask_popcount() -> Check {
    let op = make_vd_mask(&SeededRng::new(8, streams::MASK), 320, 320, &VdMaskParams::default())
        .map_err(|e| e.to_string())?;
    let k = op.mask().iter().filter(|&&b| b).count();
    verdict(k == 25600, format!("{k} of 102400 selected at rate 0.25"))
}

fn divergence() -> Check {
    let e = |e: sure_amp::Error| e.to_string();
    let r = gaussian_grid(&SeededRng::new(9, streams::NOISE), 64, 64, 1.0).map_err(e)?;
    let noise = NoiseModel::white(1.0).map_err(e)?;
    let rng = SeededRng::new(9, streams::PROBES);
    let id = divergence_field(&Identity, &r, &noise, &SureConfig::default(), &rng).map_err(e)?.total();
    let count = r.as_slice().iter().filter(|v| v.abs() > 1.0).count() as f64;
    let cfg = SureConfig::default().k(10);
    let soft = divergence_field(&PixelSoft { c: 1.0 }, &r, &noise, &cfg, &rng).map_err(e)?.total();
    let rel = (soft - count).abs() / count;
    verdict(
        (id - 4096.0).abs() < 4096.0 * 1e-6 && rel < 0.05,
        format!("identity {id:.6}, soft {soft:.1} vs {count}"),
    )
}

fn reduction() -> Check {
    let e = |e: sure_amp::Error| e.to_string();
    let sigma = 0.1;
    let x = shepp_logan(64, 64);
    let r = x.add(&gaussian_grid(&SeededRng::new(10, streams::NOISE), 64, 64, sigma).map_err(e)?).map_err(e)?;
    let spec = WaveletSpec::default();
    let f = SubbandSoft { c: 3.0, spec };
    let white = NoiseModel::white(sigma).map_err(e)?;
    let colored = NoiseModel::subband(vec![sigma * sigma; spec.subband_count()], spec).map_err(e)?;
    let cfg = SureConfig::with_patch(16);
    let rng = SeededRng::new(10, streams::PROBES);
    let xhat = f.denoise(&r, &white).map_err(e)?;
    let field = divergence_field(&f, &r, &white, &cfg, &rng).map_err(e)?;
    let a = sure_heatmap(&r, &xhat, &field, sigma, &cfg).map_err(e)?;
    let b = gsure_heatmap(&r, &xhat, &f, &colored, &cfg, &rng).map_err(e)?;
    let gap = a
        .values()
        .as_slice()
        .iter()
        .zip(b.values().as_slice())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    verdict(gap <= 1e-10, format!("max heatmap gap {gap:.1e}"))
}

fn unbiased() -> Check {
    let e = |e: sure_amp::Error| e.to_string();
    let (n, sigma, draws) = (32, 0.1, 60);
    let x = dyadic_blocks(n, n, 8, 4, &SeededRng::new(11, streams::SIGNAL)).map_err(e)?;
    let f = WaveletSoft { c: 3.0, spec: WaveletSpec::new(3).map_err(e)? };
    let noise = NoiseModel::white(sigma).map_err(e)?;
    let cfg = SureConfig::with_patch(n);
    let mut diffs = Vec::new();
    for d in 0..draws {
        let base = SeededRng::new(100 + d, streams::NOISE);
        let r = x.add(&gaussian_grid(&base, n, n, sigma).map_err(e)?).map_err(e)?;
        let xhat = f.denoise(&r, &noise).map_err(e)?;
        let field = divergence_field(&f, &r, &noise, &cfg, &base.with_stream(streams::PROBES)).map_err(e)?;
        diffs.push(sure_global(&r, &xhat, &field, sigma).map_err(e)? - mse(&xhat, &x).map_err(e)?);
    }
    let gap = mean(&diffs).abs();
    let se = (variance(&diffs) / (draws - 1) as f64).sqrt();
    verdict(gap <= 4.0 * se, format!("|mean SURE - mean MSE| {gap:.2e}, standard error {se:.2e}"))
}

fn reproducible() -> Check {
    let e = |e: sure_amp::Error| e.to_string();
    let spec = WaveletSpec::default();
    let x = shepp_logan(32, 32).to_complex();
    let tau = vec![1e-3; spec.subband_count()];
    let a = gen_colored_problem(&SeededRng::new(12, streams::NOISE), &x, &tau, &spec).map_err(e)?;
    let b = gen_colored_problem(&SeededRng::new(12, streams::NOISE), &x, &tau, &spec).map_err(e)?;
    let m1 = make_vd_mask(&SeededRng::new(12, streams::MASK), 48, 48, &VdMaskParams::default()).map_err(e)?;
    let m2 = make_vd_mask(&SeededRng::new(12, streams::MASK), 48, 48, &VdMaskParams::default()).map_err(e)?;
    verdict(a == b && m1.mask() == m2.mask(), "noise and mask draws repeat bit for bit".into())
}

/// Runs every check, printing one line each. Returns the number of failures.
pub fn run() -> (String, usize) {
    let checks: [(&str, fn() -> Check); 7] = [
        ("wavelet orthonormality", wavelet),
        ("operator adjoints", adjoints),
        ("mask popcount", mask_popcount),
        ("divergence oracle", divergence),
        ("colored reduction", reduction),
        ("white SURE unbiasedness", unbiased),
        ("reproducibility", reproducible),
    ];
    let mut text = String::new();
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(d) => text.push_str(&format!("PASS {name}: {d}\n")),
            Err(d) => {
                failed += 1;
                text.push_str(&format!("FAIL {name}: {d}\n"));
            }
        }
    }
    (text, failed)
}
