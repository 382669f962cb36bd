use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result, Shape};
use crate::grid::{ComplexGrid, RealGrid};

/// Unitary 2-D DFT (`1/sqrt(h w)` in both directions), natural (unshifted)
/// frequency order.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("height", &self.height).field("width", &self.width).finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.height, self.width);
        row.process(data);
        let mut t = vec![Complex64::default(); h * w];
        for i in 0..h {
            for j in 0..w {
                t[j * h + i] = data[i * w + j];
            }
        }
        col.process(&mut t);
        let s = 1.0 / ((h * w) as f64).sqrt();
        for i in 0..h {
            for j in 0..w {
                data[i * w + j] = t[j * h + i] * s;
            }
        }
    }

    pub fn forward(&self, x: &ComplexGrid) -> ComplexGrid {
        let mut data = x.as_slice().to_vec();
        self.run(&mut data, &self.row_fwd, &self.col_fwd);
        ComplexGrid::from_raw(self.height, self.width, data)
    }

    pub fn inverse(&self, k: &ComplexGrid) -> ComplexGrid {
        let mut data = k.as_slice().to_vec();
        self.run(&mut data, &self.row_inv, &self.col_inv);
        ComplexGrid::from_raw(self.height, self.width, data)
    }
}

/// Masked unitary DFT: `forward` keeps the selected k-space samples (in
/// row-major order of the mask), `adjoint` zero-fills and inverts.
#[derive(Debug, Clone)]
pub struct FourierMaskOperator {
    height: usize,
    width: usize,
    mask: Vec<bool>,
    prob: RealGrid,
    selected: Vec<usize>,
    fft: Fft2,
}

impl FourierMaskOperator {
    /// Builds an operator from a sampling mask and the probabilities it was
    /// drawn with. Every selected location needs a positive probability.
    pub fn new(mask: Vec<bool>, prob: RealGrid) -> Result<Self> {
        let (height, width) = (prob.height(), prob.width());
        if mask.len() != height * width {
            return invalid(format!(
                "mask has {} entries, probability grid is {height}x{width}",
                mask.len()
            ));
        }
        for (i, (&sel, &p)) in mask.iter().zip(prob.as_slice()).enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("probability {p} at index {i} outside [0, 1]"));
            }
            if sel && p <= 0.0 {
                return invalid(format!("mask selects index {i} with zero probability"));
            }
        }
        let selected = mask.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();
        Ok(Self { height, width, mask, prob, selected, fft: Fft2::new(height, width) })
    }

    /// Every location sampled with probability one.
    pub fn full(height: usize, width: usize) -> Self {
        Self::new(vec![true; height * width], RealGrid::filled(height, width, 1.0))
            .expect("full mask is valid")
    }

    pub fn measurements(&self) -> usize {
        self.selected.len()
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask_grid(&self) -> RealGrid {
        RealGrid::from_raw(
            self.height,
            self.width,
            self.mask.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn prob(&self) -> &RealGrid {
        &self.prob
    }

    /// Flat k-space indices of the measurements, in measurement order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn check_image(&self, x: &ComplexGrid) -> Result<()> {
        if (x.height(), x.width()) != (self.height, self.width) {
            return Err(Error::ShapeMismatch {
                expected: Shape(self.height, self.width),
                actual: x.shape(),
            });
        }
        Ok(())
    }

    fn check_measurements(&self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.selected.len() {
            return invalid(format!(
                "expected {} k-space measurements, got {}",
                self.selected.len(),
                y.len()
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        self.check_image(x)?;
        let k = self.fft.forward(x);
        Ok(self.selected.iter().map(|&i| k.as_slice()[i]).collect())
    }

    /// Zero-fill into a full k-space grid.
    pub fn zero_fill(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        self.check_measurements(y)?;
        let mut k = ComplexGrid::zeros(self.height, self.width);
        let data = k.as_mut_slice();
        for (&i, &v) in self.selected.iter().zip(y) {
            data[i] = v;
        }
        Ok(k)
    }

    pub fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        Ok(self.fft.inverse(&self.zero_fill(y)?))
    }

    /// Adjoint with each measurement divided by its selection probability.
    pub fn adjoint_density_compensated(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        self.check_measurements(y)?;
        let p = self.prob.as_slice();
        let weighted: Vec<Complex64> =
            self.selected.iter().zip(y).map(|(&i, &v)| v / p[i]).collect();
        self.adjoint(&weighted)
    }
}
