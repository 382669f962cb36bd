//! Image quality metrics and small sample statistics.

use crate::error::{invalid, Result};
use crate::grid::{Grid, Sample};

/// Mean squared error `(1/n) sum |a_i - b_i|^2`.
pub fn mse<T: Sample>(a: &Grid<T>, b: &Grid<T>) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.is_empty() {
        return invalid("mse of empty grids");
    }
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| (x - y).norm_sqr()).sum();
    Ok(s / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` when the grids are equal.
pub fn psnr<T: Sample>(a: &Grid<T>, b: &Grid<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return invalid(format!("peak must be > 0, got {peak}"));
    }
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Excess kurtosis `m4 / m2^2 - 3`; zero for a Gaussian.
pub fn excess_kurtosis(v: &[f64]) -> f64 {
    let m = mean(v);
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in v {
        let d = (x - m) * (x - m);
        m2 += d;
        m4 += d * d;
    }
    let n = v.len() as f64;
    m2 /= n;
    m4 /= n;
    m4 / (m2 * m2) - 3.0
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, mb) = (mean(&ra), mean(&rb));
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da * db).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ComplexGrid, RealGrid};
    use crate::rng::{gaussian_grid, SeededRng};
    use num_complex::Complex64;

    #[test]
    fn mse_basic_cases() {
        let a = gaussian_grid(&SeededRng::new(1, 1), 8, 8, 1.0).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v + 0.5);
        assert!((mse(&b, &a).unwrap() - 0.25).abs() < 1e-15);
        assert!(mse(&a, &RealGrid::zeros(8, 7)).is_err());
    }

    #[test]
    fn mse_matches_loop_oracle() {
        let a = gaussian_grid(&SeededRng::new(2, 1), 13, 7, 1.0).unwrap();
        let b = gaussian_grid(&SeededRng::new(2, 2), 13, 7, 1.0).unwrap();
        let mut acc = 0.0;
        for i in 0..13 {
            for j in 0..7 {
                let d = a.get(i, j) - b.get(i, j);
                acc += d * d;
            }
        }
        let oracle = acc / 91.0;
        assert!((mse(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
    }

    #[test]
    fn complex_mse_uses_modulus() {
        let a = ComplexGrid::filled(2, 2, Complex64::new(1.0, 1.0));
        let b = ComplexGrid::zeros(2, 2);
        assert_eq!(mse(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn psnr_values() {
        assert!((psnr_from_mse(0.01, 1.0) - 20.0).abs() < 1e-12);
        assert!((psnr_from_mse(1e-4, 1.0) - 40.0).abs() < 1e-12);
        let a = RealGrid::zeros(2, 2);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &a, 0.0).is_err());
        assert!(psnr(&a, &RealGrid::zeros(1, 2), 1.0).is_err());
    }

    #[test]
    fn spearman_monotone() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 3.5, 1.0]) + 0.8).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_of_gaussian_is_small() {
        let g = gaussian_grid(&SeededRng::new(4, 4), 128, 128, 1.0).unwrap();
        assert!(excess_kurtosis(g.as_slice()).abs() < 0.15);
    }
}
