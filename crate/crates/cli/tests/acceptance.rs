//! Acceptance checks driven through the `sure-amp` binary. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use sure_amp::denoise::NoiseModel;
use sure_amp::io::{read_grid, write_pgm};
use sure_amp::metrics::{mean, spearman, variance};
use sure_amp::phantom::dyadic_blocks;
use sure_amp::{SeededRng, WaveletSpec};

const BIN: &str = env!("CARGO_BIN_EXE_sure-amp");

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sure_amp(args: &[&str]) -> Result<String, String> {
    let o = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("`sure-amp {}` failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

/// Values of a heatmap CSV, at full precision.
fn csv_values(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect()
}

fn grid_mean(path: &Path) -> f64 {
    read_grid(path).unwrap().into_real().unwrap().mean()
}

fn gap_within(sures: &[f64], mses: &[f64], rel: f64) -> (bool, String) {
    let diffs: Vec<f64> = sures.iter().zip(mses).map(|(a, b)| a - b).collect();
    let n = diffs.len() as f64;
    let (ms, mm) = (mean(sures), mean(mses));
    let se = (variance(&diffs) / (n - 1.0)).sqrt();
    let bound = (rel * mm).max(3.0 * se);
    let gap = (ms - mm).abs();
    (gap <= bound, format!("mean estimate {ms:.5e}, mean MSE {mm:.5e}, gap {gap:.2e} <= {bound:.2e}"))
}

fn white_unbiasedness(tmp: &Path) -> Outcome {
    let img = tmp.join("blocks.pgm");
    let x = dyadic_blocks(64, 64, 16, 6, &SeededRng::new(1, 5)).unwrap();
    write_pgm(&img, &x).unwrap();
    let power = sure_amp::io::read_pgm(&img).unwrap().norm_sqr() / 4096.0;
    let snr = format!("{}", 10.0 * (power / 0.01).log10());
    let out = tmp.join("c1");
    let (mut s, mut m) = (Vec::new(), Vec::new());
    for d in 0..200 {
        let seed = d.to_string();
        sure_amp(&[
            "heatmap", "--synthetic", "--measure", "gaussian", "--image", &p(&img), "--snr-db", &snr,
            "--denoiser", "soft", "--patch", "64", "--K", "2", "--seed", &seed, "--out", &p(&out),
        ])?;
        s.push(csv_values(&out.join("heatmap.csv"))[0]);
        m.push(grid_mean(&out.join("mse_heatmap.grd")));
    }
    let (ok, d) = gap_within(&s, &m, 0.02);
    check(ok, d)
}

fn selftest_line(name: &str) -> Outcome {
    let text = sure_amp(&["selftest"])?;
    let line = text.lines().find(|l| l.contains(name)).ok_or(format!("no selftest line for {name}"))?;
    check(line.starts_with("PASS"), line.to_string())
}

fn report_columns(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[4].parse().unwrap(), f[5].parse().unwrap())
        })
        .collect()
}

fn amp_calibration(tmp: &Path) -> Outcome {
    let mut rows = Vec::new();
    for (name, extra) in [("on", None), ("off", Some("--no-onsager"))] {
        let out = tmp.join(format!("c3{name}"));
        let mut args = vec![
            "recon", "--measure", "gaussian", "--phantom", "spikes", "--size", "64", "--rate", "0.4",
            "--denoiser", "pixel-soft", "--threshold", "2", "--snr-db", "40", "--T", "12", "--seed", "3",
        ];
        let o = p(&out);
        args.extend(["--out", o.as_str()]);
        args.extend(extra);
        sure_amp(&args)?;
        rows.push(report_columns(&out.join("report.csv")).split_off(3));
    }
    let dev = |v: &[(f64, f64)]| v.iter().map(|(s, _)| (s - 1.0).abs()).sum::<f64>() / v.len() as f64;
    let ok = rows[0].iter().all(|(s, k)| (0.9..=1.1).contains(s) && k.abs() < 0.5);
    let worst_k = rows[0].iter().map(|(_, k)| k.abs()).fold(0.0, f64::max);
    let (a, b) = (dev(&rows[0]), dev(&rows[1]));
    check(
        ok && a < b,
        format!("t>=3 mean|ratio-1| {a:.3} with Onsager, {b:.3} without; max|kurtosis| {worst_k:.3}"),
    )
}

fn colored_reduction(tmp: &Path) -> Outcome {
    let (a, b) = (tmp.join("c4a"), tmp.join("c4b"));
    sure_amp(&[
        "heatmap", "--synthetic", "--measure", "gaussian", "--size", "128", "--denoiser", "subband", "--patch",
        "32", "--seed", "4", "--out", &p(&a),
    ])
    .map_err(|e| e.to_string())?;
    fs::create_dir_all(&b).unwrap();
    for f in ["r.grd", "x_hat.grd", "x_true.grd"] {
        fs::copy(a.join(f), b.join(f)).unwrap();
    }
    let mut side: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("params.json")).unwrap()).unwrap();
    let sigma = side["noise"]["sigma"].as_f64().unwrap();
    let spec = WaveletSpec::default();
    let uniform = NoiseModel::subband(vec![sigma * sigma; spec.subband_count()], spec).unwrap();
    side["noise"] = serde_json::to_value(uniform).unwrap();
    fs::write(b.join("params.json"), side.to_string()).unwrap();
    sure_amp(&["heatmap", "--input", &p(&b), "--patch", "32", "--seed", "4", "--out", &p(&b)])?;
    let (u, v) = (csv_values(&a.join("heatmap.csv")), csv_values(&b.join("heatmap.csv")));
    let max = u.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    check(u.len() == 128 * 128 && max <= 1e-10, format!("max |colored - white| over 128x128 heatmap = {max:.2e}"))
}

fn colored_unbiasedness(tmp: &Path) -> Outcome {
    let out = tmp.join("c5");
    let (mut g, mut m) = (Vec::new(), Vec::new());
    for d in 0..200 {
        let seed = d.to_string();
        sure_amp(&[
            "heatmap", "--synthetic", "--measure", "fourier", "--size", "128", "--denoiser", "subband", "--patch",
            "128", "--seed", &seed, "--out", &p(&out),
        ])?;
        g.push(csv_values(&out.join("heatmap.csv"))[0]);
        m.push(grid_mean(&out.join("mse_heatmap.grd")));
    }
    let rel = (mean(&g) - mean(&m)).abs() / mean(&m);
    check(rel <= 0.05, format!("mean GSURE {:.5e}, mean MSE {:.5e}, rel {rel:.4}", mean(&g), mean(&m)))
}

fn patch_width_trend(tmp: &Path) -> Outcome {
    let rec = tmp.join("c6");
    sure_amp(&[
        "recon", "--measure", "gaussian", "--size", "128", "--rate", "0.4", "--denoiser", "soft", "--threshold",
        "1.5", "--T", "15", "--snr-db", "30", "--seed", "6", "--out", &p(&rec),
    ])?;
    let reps = 8;
    let mut sum: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for s in 0..reps {
        let out = tmp.join(format!("c6e{s}"));
        let seed = (600 + s).to_string();
        sure_amp(&["eval", "--input", &p(&rec), "--seed", &seed, "--out", &p(&out)])?;
        for line in fs::read_to_string(out.join("eval.csv")).unwrap().lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            *sum.entry((f[0].parse().unwrap(), f[1].parse().unwrap())).or_default() += f[2].parse::<f64>().unwrap();
        }
    }
    let at = |p: usize, k: usize| sum[&(p, k)] / reps as f64;
    let patches = [8usize, 16, 32, 48];
    let k2: Vec<f64> = patches.iter().map(|&q| at(q, 2)).collect();
    let rho = spearman(&patches.map(|q| q as f64), &k2);
    let inversions = k2.windows(2).filter(|w| w[1] > w[0]).count();
    let shift = patches.iter().map(|&q| (at(q, 3) - at(q, 1)).abs() / at(q, 1)).fold(0.0, f64::max);
    check(
        rho <= -0.8 && inversions <= 1 && shift < 0.2,
        format!(
            "K=2 discrepancy by patch {:?}; Spearman {rho:.2}, inversions {inversions}; max K1->K3 change {shift:.3} (mean over {reps} probe seeds)",
            k2.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn numerics(tmp: &Path) -> Outcome {
    let text = sure_amp(&["selftest"])?;
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["wavelet orthonormality", "operator adjoints", "mask popcount", "reproducibility"] {
        let line = text.lines().find(|l| l.contains(name)).unwrap_or("FAIL missing");
        ok &= line.starts_with("PASS");
        notes.push(line.to_string());
    }
    let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.join(format!("c7{i}"))).collect();
    for d in &dirs {
        sure_amp(&["recon", "--size", "64", "--seed", "7", "--out", &p(d)])?;
        sure_amp(&["mask", "--size", "96", "--seed", "7", "--out", &p(d)])?;
    }
    let same = ["x_hat.grd", "r.grd", "report.csv", "params.json", "mask.grd", "prob.grd"]
        .iter()
        .all(|f| fs::read(dirs[0].join(f)).unwrap() == fs::read(dirs[1].join(f)).unwrap());
    ok &= same;
    notes.push(format!("reruns byte-identical: {same}"));
    check(ok, notes.join("; "))
}

fn end_to_end(tmp: &Path) -> Outcome {
    let out = tmp.join("c8");
    sure_amp(&["recon", "--size", "128", "--rate", "0.25", "--snr-db", "20", "--denoiser", "subband", "--out", &p(&out)])?;
    sure_amp(&["heatmap", "--input", &p(&out), "--out", &p(&out)])?;
    let (h, m) = (grid_mean(&out.join("heatmap.grd")), grid_mean(&out.join("mse_heatmap.grd")));
    let ratio = h / m;
    check((0.5..=2.0).contains(&ratio), format!("heatmap mean {h:.3e}, patch-averaged MSE mean {m:.3e}, ratio {ratio:.3}"))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let criteria: [(&str, Box<dyn Fn() -> Outcome>); 8] = [
        ("1 white SURE unbiasedness", Box::new(|| white_unbiasedness(t))),
        ("2 divergence oracle", Box::new(|| selftest_line("divergence oracle"))),
        ("3 AMP calibration", Box::new(|| amp_calibration(t))),
        ("4 colored reduction", Box::new(|| colored_reduction(t))),
        ("5 colored unbiasedness", Box::new(|| colored_unbiasedness(t))),
        ("6 accuracy vs patch width", Box::new(|| patch_width_trend(t))),
        ("7 numerics", Box::new(|| numerics(t))),
        ("8 end-to-end smoke", Box::new(|| end_to_end(t))),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria.iter() {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {name} [{secs:.1}s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
