use sure_amp::amp::{amp_run, AmpConfig};
use sure_amp::colored::gen_colored_problem;
use sure_amp::denoise::{Denoiser, Identity, NoiseModel, PixelSoft, PluginDenoiser, SubbandSoft, WaveletSoft, ZeroMap};
use sure_amp::metrics::{mean, mse, variance};
use sure_amp::operators::GaussianOperator;
use sure_amp::phantom::{dyadic_blocks, shepp_logan, sparse_spikes};
use sure_amp::rng::{gaussian_grid, streams};
use sure_amp::uncertainty::{
    accuracy_sweep, divergence_field, gsure_from_field, sure_global, Discrepancy, SureConfig,
};
use sure_amp::wavelet::{dwt2, subband_map};
use sure_amp::{SeededRng, WaveletSpec};

/// Returns `(|mean(a) - mean(b)|, standard error of the paired difference)`.
fn paired_gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
    let n = d.len() as f64;
    ((mean(a) - mean(b)).abs(), (variance(&d) * n / (n - 1.0) / n).sqrt())
}

fn white_gap(f: &dyn Denoiser, draws: u64) -> (f64, f64, f64) {
    let (n, sigma) = (32, 0.2);
    let x = dyadic_blocks(n, n, 8, 5, &SeededRng::new(11, streams::SIGNAL)).unwrap();
    let noise = NoiseModel::white(sigma).unwrap();
    let cfg = SureConfig::with_patch(n);
    let (mut s, mut e) = (Vec::new(), Vec::new());
    for d in 0..draws {
        let base = SeededRng::new(d, streams::NOISE);
        let r = x.add(&gaussian_grid(&base, n, n, sigma).unwrap()).unwrap();
        let xhat = f.denoise(&r, &noise).unwrap();
        let field = divergence_field(f, &r, &noise, &cfg, &base.with_stream(streams::PROBES)).unwrap();
        s.push(sure_global(&r, &xhat, &field, sigma).unwrap());
        e.push(mse(&xhat, &x).unwrap());
    }
    let (gap, se) = paired_gap(&s, &e);
    (gap, se, mean(&e))
}

#[test]
fn white_sure_is_unbiased_for_reference_denoisers() {
    let spec = WaveletSpec::new(3).unwrap();
    let cases: Vec<(&str, Box<dyn Denoiser>)> = vec![
        ("identity", Box::new(Identity)),
        ("zero", Box::new(ZeroMap)),
        ("pixel soft", Box::new(PixelSoft { c: 1.0 })),
        ("wavelet soft", Box::new(WaveletSoft { c: 2.5, spec })),
    ];
    for (name, f) in cases {
        let (gap, se, m) = white_gap(f.as_ref(), 200);
        assert!(gap <= 3.0 * se.max(1e-12 * m), "{name}: gap {gap:e}, se {se:e}");
    }
}

#[test]
fn white_sure_is_unbiased_for_blur_plugin() {
    let p = PluginDenoiser::spawn(env!("CARGO_BIN_EXE_sure-amp-ref-plugin"), &["blur"]).unwrap();
    let (gap, se, _) = white_gap(&p, 200);
    assert!(gap <= 3.0 * se, "gap {gap:e}, se {se:e}");
}

#[test]
fn colored_gsure_is_unbiased() {
    let n = 64;
    let spec = WaveletSpec::new(3).unwrap();
    let x = shepp_logan(n, n).to_complex();
    let tau: Vec<f64> = (0..spec.subband_count()).map(|j| 1e-4 * 100f64.powf(j as f64 / 9.0)).collect();
    let noise = NoiseModel::subband(tau.clone(), spec).unwrap();
    let f = SubbandSoft { c: 2.5, spec };
    let cfg = SureConfig::with_patch(n);
    let (mut g, mut e) = (Vec::new(), Vec::new());
    for d in 0..200u64 {
        let p = gen_colored_problem(&SeededRng::new(d, streams::NOISE), &x, &tau, &spec).unwrap();
        let xhat = f.denoise_complex(&p.r, &noise).unwrap();
        let field = divergence_field(&f, &p.r, &noise, &cfg, &SeededRng::new(d, streams::PROBES)).unwrap();
        g.push(gsure_from_field(&p.r, &xhat, &field, &noise, None).unwrap().0);
        e.push(mse(&xhat, &x).unwrap());
    }
    let (gap, se) = paired_gap(&g, &e);
    assert!(gap <= 3.0 * se, "gap {gap:e}, se {se:e}");
}

#[test]
fn more_probes_change_discrepancy_only_slightly() {
    let n = 128;
    let sigma = 0.1;
    let x = shepp_logan(n, n);
    let r = x.add(&gaussian_grid(&SeededRng::new(21, streams::NOISE), n, n, sigma).unwrap()).unwrap();
    let f = WaveletSoft { c: 2.0, spec: WaveletSpec::default() };
    let noise = NoiseModel::white(sigma).unwrap();
    let xhat = f.denoise(&r, &noise).unwrap();
    let patches = [8, 16, 32, 48];
    let reps = 6;
    let mut rows = Vec::new();
    for rep in 0..reps {
        rows.extend(
            accuracy_sweep(
                &r,
                &xhat,
                &x,
                &f,
                &noise,
                &patches,
                &[1, 8],
                &SureConfig::default(),
                Discrepancy::AbsRelative,
                &SeededRng::new(rep, streams::PROBES),
            )
            .unwrap(),
        );
    }
    let at = |p: usize, k: usize| {
        rows.iter().filter(|r| r.patch == p && r.k == k).map(|r| r.discrepancy).sum::<f64>() / reps as f64
    };
    for p in patches {
        let (a, b) = (at(p, 1), at(p, 8));
        assert!((a - b).abs() / a < 0.2, "patch {p}: K=1 {a}, K=8 {b}");
    }
}

#[test]
fn orthonormal_transform_keeps_noise_white() {
    let n = 128;
    let spec = WaveletSpec::default();
    let map = subband_map(&spec, n, n).unwrap();
    let draws = 200;
    let mut sums = vec![0.0; spec.subband_count()];
    for d in 0..draws {
        let w = gaussian_grid(&SeededRng::new(d, streams::NOISE), n, n, 1.0).unwrap();
        let c = dwt2(&w, &spec).unwrap();
        for (v, &j) in c.as_slice().iter().zip(map.indices()) {
            sums[j as usize] += v * v;
        }
    }
    for (j, (s, &k)) in sums.iter().zip(map.counts()).enumerate() {
        let var = s / (k as u64 * draws) as f64;
        assert!((var - 1.0).abs() < 0.05, "subband {j}: variance {var}");
    }
}

#[test]
fn state_evolution_holds_at_lower_rate() {
    let side = 48;
    let n = side * side;
    let m = (0.3 * n as f64).round() as usize;
    let op = GaussianOperator::new(&SeededRng::new(41, streams::OPERATOR), m, (side, side)).unwrap();
    let x = sparse_spikes(side, side, 25, &SeededRng::new(41, streams::SIGNAL)).unwrap();
    let clean = sure_amp::operators::RealOperator::forward(&op, &x).unwrap();
    let power = clean.iter().map(|v| v * v).sum::<f64>() / m as f64;
    let eta = gaussian_grid(&SeededRng::new(41, streams::NOISE), 1, m, (power * 1e-4).sqrt()).unwrap();
    let y: Vec<f64> = clean.iter().zip(eta.as_slice()).map(|(a, b)| a + b).collect();
    let cfg = AmpConfig { iterations: 10, ..AmpConfig::default() };
    let out = amp_run(&op, &y, &PixelSoft { c: 1.5 }, &cfg, &SeededRng::new(41, streams::ONSAGER), Some(&x)).unwrap();
    assert_eq!(out.report.rows.len(), 10);
    for row in out.report.rows.iter().skip(3) {
        let (s, k) = (row.std_ratio.unwrap(), row.kurtosis.unwrap());
        assert!((0.9..=1.1).contains(&s) && k.abs() < 0.5, "iteration {}: ratio {s}, kurtosis {k}", row.iteration);
    }
}
