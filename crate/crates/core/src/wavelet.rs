//! Orthonormal multi-level 2-D Haar transform in Mallat layout.
//!
//! Coefficients occupy a grid of the same shape as the input. After `L`
//! levels the approximation (LL) block sits in the top-left
//! `h/2^L x w/2^L` corner; the three detail blocks of level `l` are
//! `[0, h_l) x [w_l, 2w_l)`, `[h_l, 2h_l) x [0, w_l)` and
//! `[h_l, 2h_l) x [w_l, 2w_l)` with `h_l = h/2^l`.
//!
//! Subbands are numbered coarse to fine: 0 is LL, then three per level from
//! level `L` down to level 1, giving `3L + 1` subbands.
//!
//! Haar filters have length two, so on even-length signals the periodic
//! extension never wraps and the transform is exactly orthonormal.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Grid, Sample};

/// Wavelet configuration. Only Haar is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub levels: usize,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self { levels: 4 }
    }
}

impl WaveletSpec {
    pub fn new(levels: usize) -> Result<Self> {
        if levels == 0 {
            return invalid("wavelet levels must be >= 1");
        }
        Ok(Self { levels })
    }

    pub fn subband_count(&self) -> usize {
        3 * self.levels + 1
    }

    /// Both image dimensions must be multiples of this.
    pub fn divisor(&self) -> usize {
        1 << self.levels
    }

    pub fn check_dims(&self, h: usize, w: usize) -> Result<()> {
        let d = self.divisor();
        if h == 0 || w == 0 || h % d != 0 || w % d != 0 {
            return invalid(format!(
                "image dimensions {h}x{w} must be non-zero multiples of {d} for a {}-level Haar transform",
                self.levels
            ));
        }
        Ok(())
    }

    /// Decomposition level of subband `j` (0 for the approximation band,
    /// which lives at level `levels`).
    pub fn subband_level(&self, j: usize) -> usize {
        if j == 0 {
            self.levels
        } else {
            self.levels - (j - 1) / 3
        }
    }

    pub fn subband_name(&self, j: usize) -> String {
        if j == 0 {
            return format!("LL{}", self.levels);
        }
        let orient = ["LH", "HL", "HH"][(j - 1) % 3];
        format!("{orient}{}", self.subband_level(j))
    }

    pub fn check_tau(&self, tau: &[f64]) -> Result<()> {
        if tau.len() != self.subband_count() {
            return invalid(format!(
                "tau has {} entries, expected {} (one per subband)",
                tau.len(),
                self.subband_count()
            ));
        }
        if let Some(j) = tau.iter().position(|t| !(*t >= 0.0) || !t.is_finite()) {
            return invalid(format!(
                "tau[{j}] ({}) = {} must be finite and >= 0",
                self.subband_name(j),
                tau[j]
            ));
        }
        if !tau.iter().any(|&t| t > 0.0) {
            return invalid("tau must have at least one positive entry");
        }
        Ok(())
    }

    /// Diagonal entry of `Psi^T diag(tau) Psi` in the image domain.
    ///
    /// For Haar every pixel lies in the support of exactly one coefficient per
    /// detail band and one LL coefficient, with squared weight `4^-level`, so
    /// the diagonal is constant across pixels.
    pub fn covariance_diagonal(&self, tau: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, t) in tau.iter().enumerate() {
            acc += t * 0.25f64.powi(self.subband_level(j) as i32);
        }
        acc
    }
}

fn haar_pass<T: Sample>(buf: &mut [T], tmp: &mut Vec<T>, start: usize, stride: usize, len: usize) {
    let half = len / 2;
    tmp.clear();
    tmp.resize(len, T::default());
    for k in 0..half {
        let a = buf[start + 2 * k * stride];
        let b = buf[start + (2 * k + 1) * stride];
        tmp[k] = (a + b) * FRAC_1_SQRT_2;
        tmp[half + k] = (a - b) * FRAC_1_SQRT_2;
    }
    for (k, v) in tmp.iter().enumerate() {
        buf[start + k * stride] = *v;
    }
}

fn haar_unpass<T: Sample>(buf: &mut [T], tmp: &mut Vec<T>, start: usize, stride: usize, len: usize) {
    let half = len / 2;
    tmp.clear();
    tmp.resize(len, T::default());
    for k in 0..half {
        let s = buf[start + k * stride];
        let d = buf[start + (half + k) * stride];
        tmp[2 * k] = (s + d) * FRAC_1_SQRT_2;
        tmp[2 * k + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    for (k, v) in tmp.iter().enumerate() {
        buf[start + k * stride] = *v;
    }
}

/// Forward transform.
pub fn dwt2<T: Sample>(x: &Grid<T>, spec: &WaveletSpec) -> Result<Grid<T>> {
    let (h, w) = (x.height(), x.width());
    spec.check_dims(h, w)?;
    let mut buf = x.as_slice().to_vec();
    let mut tmp = Vec::new();
    for level in 0..spec.levels {
        let (hh, ww) = (h >> level, w >> level);
        for row in 0..hh {
            haar_pass(&mut buf, &mut tmp, row * w, 1, ww);
        }
        for col in 0..ww {
            haar_pass(&mut buf, &mut tmp, col, w, hh);
        }
    }
    Ok(Grid::from_raw(h, w, buf))
}

/// Inverse transform.
pub fn idwt2<T: Sample>(coeffs: &Grid<T>, spec: &WaveletSpec) -> Result<Grid<T>> {
    let (h, w) = (coeffs.height(), coeffs.width());
    spec.check_dims(h, w)?;
    let mut buf = coeffs.as_slice().to_vec();
    let mut tmp = Vec::new();
    for level in (0..spec.levels).rev() {
        let (hh, ww) = (h >> level, w >> level);
        for col in 0..ww {
            haar_unpass(&mut buf, &mut tmp, col, w, hh);
        }
        for row in 0..hh {
            haar_unpass(&mut buf, &mut tmp, row * w, 1, ww);
        }
    }
    Ok(Grid::from_raw(h, w, buf))
}

/// Per-coefficient subband index for a given image shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubbandMap {
    height: usize,
    width: usize,
    index: Vec<u8>,
    counts: Vec<usize>,
}

impl SubbandMap {
    pub fn subband(&self, row: usize, col: usize) -> usize {
        self.index[row * self.width + col] as usize
    }

    /// Subband of each coefficient, row-major.
    pub fn indices(&self) -> &[u8] {
        &self.index
    }

    /// Number of coefficients in each subband.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

pub fn subband_map(spec: &WaveletSpec, h: usize, w: usize) -> Result<SubbandMap> {
    spec.check_dims(h, w)?;
    let levels = spec.levels;
    let mut index = vec![0u8; h * w];
    for row in 0..h {
        for col in 0..w {
            // finest level whose detail blocks contain (row, col)
            let mut band = 0;
            for l in 1..=levels {
                let (hl, wl) = (h >> l, w >> l);
                let hi_r = row >= hl && row < 2 * hl;
                let hi_c = col >= wl && col < 2 * wl;
                let in_block = row < 2 * hl && col < 2 * wl;
                if in_block && (hi_r || hi_c) {
                    let base = 1 + 3 * (levels - l);
                    band = base
                        + match (hi_r, hi_c) {
                            (false, true) => 0,
                            (true, false) => 1,
                            _ => 2,
                        };
                    break;
                }
            }
            index[row * w + col] = band as u8;
        }
    }
    let mut counts = vec![0usize; spec.subband_count()];
    for &b in &index {
        counts[b as usize] += 1;
    }
    Ok(SubbandMap { height: h, width: w, index, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ComplexGrid, RealGrid};
    use crate::rng::{complex_gaussian_grid, gaussian_grid, SeededRng};

    #[test]
    fn constant_2x2_one_level() {
        let spec = WaveletSpec::new(1).unwrap();
        let x = RealGrid::filled(2, 2, 0.75);
        let c = dwt2(&x, &spec).unwrap();
        assert!((c.get(0, 0) - 1.5).abs() < 1e-15);
        assert_eq!(c.get(0, 1), 0.0);
        assert_eq!(c.get(1, 0), 0.0);
        assert_eq!(c.get(1, 1), 0.0);
    }

    #[test]
    fn perfect_reconstruction_and_parseval() {
        let spec = WaveletSpec::default();
        let x = gaussian_grid(&SeededRng::new(1, 1), 64, 64, 1.0).unwrap();
        let c = dwt2(&x, &spec).unwrap();
        let back = idwt2(&c, &spec).unwrap();
        let err = x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "max err {err}");
        let (ex, ec) = (x.norm_sqr(), c.norm_sqr());
        assert!((ex - ec).abs() < 1e-10 * ex);
    }

    #[test]
    fn complex_roundtrip() {
        let spec = WaveletSpec::default();
        let x: ComplexGrid = complex_gaussian_grid(&SeededRng::new(2, 1), 32, 48, 1.0).unwrap();
        let back = idwt2(&dwt2(&x, &spec).unwrap(), &spec).unwrap();
        let err = x.sub(&back).unwrap().max_abs_part();
        assert!(err < 1e-12);
    }

    #[test]
    fn rejects_indivisible_dims() {
        let spec = WaveletSpec::default();
        let err = dwt2(&RealGrid::zeros(40, 40), &spec).unwrap_err().to_string();
        assert!(err.contains("16"), "{err}");
    }

    #[test]
    fn subband_map_partitions_coefficients() {
        let spec = WaveletSpec::default();
        let map = subband_map(&spec, 64, 32).unwrap();
        let counts = map.counts();
        assert_eq!(counts.len(), 13);
        assert_eq!(counts.iter().sum::<usize>(), 64 * 32);
        assert_eq!(counts[0], 4 * 2);
        // finest level detail bands are each a quarter of the image
        assert_eq!(&counts[10..], &[512, 512, 512]);
        assert_eq!(map.subband(0, 0), 0);
        assert_eq!(map.subband(63, 31), 12);
        assert_eq!(map.subband(0, 31), 10);
        assert_eq!(map.subband(63, 0), 11);
    }

    #[test]
    fn covariance_diagonal_matches_brute_force() {
        // diag_i = sum_j Psi_{j,i}^2 tau_{band(j)}, with Psi e_i from dwt2 of impulses
        let spec = WaveletSpec::default();
        let (h, w) = (16, 32);
        let map = subband_map(&spec, h, w).unwrap();
        let tau: Vec<f64> = (0..13).map(|j| 0.1 + j as f64 * 0.37).collect();
        let expected = spec.covariance_diagonal(&tau);
        for &(r, c) in &[(0, 0), (5, 17), (15, 31), (8, 3)] {
            let mut e = RealGrid::zeros(h, w);
            e.set(r, c, 1.0);
            let col = dwt2(&e, &spec).unwrap();
            let diag: f64 = col
                .as_slice()
                .iter()
                .zip(map.indices())
                .map(|(v, &b)| v * v * tau[b as usize])
                .sum();
            assert!((diag - expected).abs() < 1e-12, "{diag} vs {expected}");
        }
        // trace identity: n * diag = sum over coefficients of tau
        let total: f64 = map.indices().iter().map(|&b| tau[b as usize]).sum();
        assert!(((h * w) as f64 * expected - total).abs() < 1e-9);
    }

    #[test]
    fn tau_validation_names_subband() {
        let spec = WaveletSpec::default();
        assert!(spec.check_tau(&[1.0; 12]).is_err());
        let mut tau = vec![1.0; 13];
        tau[4] = -1.0;
        let msg = spec.check_tau(&tau).unwrap_err().to_string();
        assert!(msg.contains("LH3"), "{msg}");
        assert!(spec.check_tau(&[0.0; 13]).is_err());
    }
}
