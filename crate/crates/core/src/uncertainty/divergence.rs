use rand::Rng;

use crate::denoise::{Denoisable, Denoiser, NoiseModel};
use crate::error::{Error, Result};
use crate::grid::{Grid, RealGrid, Sample};
use crate::rng::{standard_normals, SeededRng};
use crate::uncertainty::{Probe, SureConfig};
use crate::wavelet::{dwt2, idwt2, subband_map, WaveletSpec};

/// Per-pixel Monte-Carlo divergence contributions
/// `d_i = (1/K) sum_k b_ki (f(r + eps g_k) - f(r))_i / eps`,
/// where `g_k = b_k` for white noise and `g_k = C b_k / kappa` for a colored
/// per-part covariance `C` with `kappa = tr(C) / n`. Complex inputs
/// contribute one real and one imaginary term per probe.
///
/// `sum_i d_i` estimates the ordinary divergence for white noise;
/// `kappa * sum_i d_i` estimates the covariance-weighted divergence
/// `tr(J C)` that GSURE needs, and equals `sigma^2` times the former when
/// `C = sigma^2 I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceField {
    values: RealGrid,
    kappa: f64,
    k: usize,
    eps: f64,
}

impl DivergenceField {
    pub fn values(&self) -> &RealGrid {
        &self.values
    }

    /// `sum_i d_i`.
    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    /// Per-part covariance scale `tr(C) / n`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `kappa * sum_i d_i`.
    pub fn weighted_total(&self) -> f64 {
        self.kappa * self.total()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// Perturbation step `max(max|r| / divisor, floor)`, with `max|r|` taken over
/// real and imaginary parts.
pub fn epsilon_for<T: Sample>(r: &Grid<T>, cfg: &SureConfig) -> f64 {
    (r.max_abs_part() / cfg.eps_divisor).max(cfg.eps_floor)
}

enum Shape {
    White,
    Subband { weights: Vec<f64>, spec: WaveletSpec },
}

impl Shape {
    fn direction(&self, b: &RealGrid) -> Result<RealGrid> {
        match self {
            Shape::White => Ok(b.clone()),
            Shape::Subband { weights, spec } => {
                let mut c = dwt2(b, spec)?;
                let map = subband_map(spec, b.height(), b.width())?;
                for (v, &j) in c.as_mut_slice().iter_mut().zip(map.indices()) {
                    *v *= weights[j as usize];
                }
                idwt2(&c, spec)
            }
        }
    }
}

fn draw_probe(rng: &SeededRng, h: usize, w: usize, probe: Probe) -> RealGrid {
    let mut g = rng.rng();
    let data = match probe {
        Probe::Rademacher => (0..h * w).map(|_| if g.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        Probe::Gaussian => standard_normals(&mut g, h * w),
    };
    Grid::from_raw(h, w, data)
}

/// Monte-Carlo divergence field of `f` at `r`. Probe `k` for part `p` (0 real,
/// 1 imaginary) is drawn from `rng.fork(2k + p)`, so fields computed with
/// the same `rng` share perturbations regardless of the noise model.
pub fn divergence_field<T, D>(
    f: &D,
    r: &Grid<T>,
    noise: &NoiseModel,
    cfg: &SureConfig,
    rng: &SeededRng,
) -> Result<DivergenceField>
where
    T: Denoisable,
    D: Denoiser + ?Sized,
{
    cfg.validate_probes()?;
    noise.validate()?;
    let (h, w) = (r.height(), r.width());
    let parts = if T::IS_COMPLEX { 2 } else { 1 };
    let part_share = 1.0 / parts as f64;
    let (shape, kappa) = match noise {
        NoiseModel::White { sigma } => (Shape::White, sigma * sigma * part_share),
        NoiseModel::SubbandDiagonal { tau, spec } => {
            spec.check_dims(h, w)?;
            let diag = spec.covariance_diagonal(tau);
            let weights = tau.iter().map(|t| t / diag).collect();
            (Shape::Subband { weights, spec: *spec }, diag * part_share)
        }
    };
    let eps = epsilon_for(r, cfg);
    let base = T::denoise_with(f, r, noise)?;
    r.check_same_shape(&base)?;

    let mut acc = vec![0.0; h * w];
    for k in 0..cfg.k {
        for part in 0..parts {
            let b = draw_probe(&rng.fork((2 * k + part) as u64), h, w, cfg.probe);
            let g = shape.direction(&b)?;
            let bumped = r.zip_map(&g, |v, d| {
                if part == 0 {
                    v + T::from_parts(eps * d, 0.0)
                } else {
                    v + T::from_parts(0.0, eps * d)
                }
            })?;
            let out = T::denoise_with(f, &bumped, noise)?;
            r.check_same_shape(&out)?;
            for (i, a) in acc.iter_mut().enumerate() {
                let diff = out.as_slice()[i] - base.as_slice()[i];
                let diff = if part == 0 { diff.re() } else { diff.im() };
                *a += b.as_slice()[i] * diff / eps;
            }
        }
    }
    let scale = 1.0 / cfg.k as f64;
    let values: Vec<f64> = acc.into_iter().map(|v| v * scale).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "divergence estimate of {} is not finite (eps = {eps:e})",
            f.name()
        )));
    }
    Ok(DivergenceField { values: Grid::from_raw(h, w, values), kappa, k: cfg.k, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{Identity, PixelSoft, WaveletSoft, ZeroMap};
    use crate::grid::ComplexGrid;
    use crate::rng::{complex_gaussian_grid, gaussian_grid};

    fn noisy(seed: u64, h: usize, w: usize) -> RealGrid {
        gaussian_grid(&SeededRng::new(seed, 7), h, w, 1.0).unwrap()
    }

    #[test]
    fn identity_gives_n() {
        let r = noisy(1, 64, 64);
        let cfg = SureConfig::default().k(3);
        let d = divergence_field(&Identity, &r, &NoiseModel::white(1.0).unwrap(), &cfg, &SeededRng::new(1, 4))
            .unwrap();
        assert!((d.total() / 4096.0 - 1.0).abs() < 1e-6, "{}", d.total());
        assert!(d.values().as_slice().iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn zero_map_gives_zero() {
        let r = noisy(2, 32, 32);
        let d = divergence_field(&ZeroMap, &r, &NoiseModel::white(1.0).unwrap(), &SureConfig::default(), &SeededRng::new(2, 4))
            .unwrap();
        assert_eq!(d.total(), 0.0);
    }

    #[test]
    fn pixel_soft_matches_survivor_count() {
        let r = noisy(3, 64, 64);
        let sigma = 0.5;
        let f = PixelSoft { c: 2.0 };
        let lambda = 1.0;
        let count = r.as_slice().iter().filter(|v| v.abs() > lambda).count() as f64;
        for probe in [Probe::Rademacher, Probe::Gaussian] {
            let cfg = SureConfig::default().k(10).probe(probe);
            let d = divergence_field(&f, &r, &NoiseModel::white(sigma).unwrap(), &cfg, &SeededRng::new(3, 4))
                .unwrap();
            let rel = (d.total() - count).abs() / count;
            assert!(rel < 0.05, "{probe:?}: {} vs {count}", d.total());
        }
    }

    #[test]
    fn wavelet_soft_matches_survivor_count() {
        // orthonormal transform: divergence = surviving detail coefficients
        // plus the untouched LL coefficients
        let r = noisy(4, 64, 64);
        let spec = WaveletSpec::default();
        let f = WaveletSoft { c: 1.0, spec };
        let c = dwt2(&r, &spec).unwrap();
        let map = subband_map(&spec, 64, 64).unwrap();
        let count = c
            .as_slice()
            .iter()
            .zip(map.indices())
            .filter(|(v, &j)| j == 0 || v.abs() > 1.0)
            .count() as f64;
        let cfg = SureConfig::default().k(10);
        let d = divergence_field(&f, &r, &NoiseModel::white(1.0).unwrap(), &cfg, &SeededRng::new(4, 4)).unwrap();
        assert!((d.total() - count).abs() / count < 0.05, "{} vs {count}", d.total());
    }

    #[test]
    fn deterministic() {
        let r = noisy(5, 32, 32);
        let f = WaveletSoft { c: 1.0, spec: WaveletSpec::default() };
        let noise = NoiseModel::white(1.0).unwrap();
        let cfg = SureConfig::default();
        let a = divergence_field(&f, &r, &noise, &cfg, &SeededRng::new(5, 4)).unwrap();
        let b = divergence_field(&f, &r, &noise, &cfg, &SeededRng::new(5, 4)).unwrap();
        assert_eq!(a, b);
        let c = divergence_field(&f, &r, &noise, &cfg, &SeededRng::new(6, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_subband_reduces_to_white() {
        let r = noisy(6, 64, 64);
        let spec = WaveletSpec::default();
        let f = WaveletSoft { c: 1.5, spec };
        let sigma = 0.7;
        let cfg = SureConfig::default();
        let rng = SeededRng::new(6, 4);
        let white = divergence_field(&f, &r, &NoiseModel::white(sigma).unwrap(), &cfg, &rng).unwrap();
        let colored =
            divergence_field(&f, &r, &NoiseModel::subband(vec![sigma * sigma; 13], spec).unwrap(), &cfg, &rng)
                .unwrap();
        assert!((white.kappa() - colored.kappa()).abs() < 1e-15);
        for (a, b) in white.values().as_slice().iter().zip(colored.values().as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    /// Linear test denoiser: periodic 3x3 blur.
    struct Blur;
    impl Blur {
        fn apply<T: Sample>(r: &Grid<T>) -> Grid<T> {
            let (h, w) = (r.height(), r.width());
            Grid::from_fn(h, w, |i, j| {
                let mut acc = T::default();
                for (di, dj, wt) in [(0, 0, 0.5), (1, 0, 0.25), (0, 1, 0.125), (h - 1, w - 1, 0.125)] {
                    acc = acc + r.get((i + di) % h, (j + dj) % w) * wt;
                }
                acc
            })
        }
    }
    impl Denoiser for Blur {
        fn name(&self) -> String {
            "blur".into()
        }
        fn denoise(&self, r: &RealGrid, _: &NoiseModel) -> Result<RealGrid> {
            Ok(Blur::apply(r))
        }
        fn denoise_complex(&self, r: &ComplexGrid, _: &NoiseModel) -> Result<ComplexGrid> {
            Ok(Blur::apply(r))
        }
    }

    /// `tr(J C)` for the linear blur, by applying `J C` to every unit vector.
    fn exact_weighted_divergence(tau: &[f64], spec: &WaveletSpec, h: usize, w: usize) -> f64 {
        let map = subband_map(spec, h, w).unwrap();
        let mut tr = 0.0;
        for idx in 0..h * w {
            let mut e = RealGrid::zeros(h, w);
            e.as_mut_slice()[idx] = 1.0;
            let mut c = dwt2(&e, spec).unwrap();
            for (v, &j) in c.as_mut_slice().iter_mut().zip(map.indices()) {
                *v *= tau[j as usize];
            }
            let ce = idwt2(&c, spec).unwrap();
            tr += Blur::apply(&ce).as_slice()[idx];
        }
        tr
    }

    #[test]
    fn colored_matches_exact_trace() {
        let spec = WaveletSpec::default();
        let tau: Vec<f64> = (0..13).map(|j| 0.01 * 10f64.powf(j as f64 / 6.0)).collect();
        let noise = NoiseModel::subband(tau.clone(), spec).unwrap();
        let exact = exact_weighted_divergence(&tau, &spec, 32, 32);
        let r = noisy(7, 32, 32);
        let cfg = SureConfig::default().k(400);
        let d = divergence_field(&Blur, &r, &noise, &cfg, &SeededRng::new(7, 4)).unwrap();
        assert!((d.weighted_total() - exact).abs() / exact < 0.03, "{} vs {exact}", d.weighted_total());

        // complex input: per-part covariance is half, both parts contribute
        let rc = complex_gaussian_grid(&SeededRng::new(8, 7), 32, 32, 1.0).unwrap();
        let d = divergence_field(&Blur, &rc, &noise, &cfg, &SeededRng::new(8, 4)).unwrap();
        assert!((d.weighted_total() - exact).abs() / exact < 0.03, "{} vs {exact}", d.weighted_total());
    }

    #[test]
    fn complex_identity() {
        let r = complex_gaussian_grid(&SeededRng::new(9, 7), 16, 16, 1.0).unwrap();
        let d = divergence_field(&Identity, &r, &NoiseModel::white(0.3).unwrap(), &SureConfig::default(), &SeededRng::new(9, 4))
            .unwrap();
        assert!((d.total() - 512.0).abs() < 1e-6);
        assert!((d.weighted_total() - 0.09 * 256.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_rule() {
        let cfg = SureConfig::default();
        let mut g = RealGrid::zeros(2, 2);
        assert_eq!(epsilon_for(&g, &cfg), 1e-6);
        g.set(1, 1, -3.0);
        assert_eq!(epsilon_for(&g, &cfg), 3e-3);
    }
}
