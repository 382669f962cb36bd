use crate::error::{invalid, Error, Result, Shape};
use crate::grid::RealGrid;
use crate::operators::RealOperator;
use crate::rng::{standard_normals, SeededRng};

/// Dense `m x n` matrix with i.i.d. `N(0, 1/m)` entries, stored row-major.
///
/// The `1/m` variance gives columns of (nearly) unit norm, which is what the
/// AMP residual-based noise estimate `||z||/sqrt(m)` assumes.
#[derive(Debug, Clone)]
pub struct GaussianOperator {
    m: usize,
    height: usize,
    width: usize,
    entries: Vec<f64>,
}

impl GaussianOperator {
    /// Draws the matrix from `rng` for images of shape `(height, width)`,
    /// `n = height * width`.
    pub fn new(rng: &SeededRng, m: usize, (height, width): (usize, usize)) -> Result<Self> {
        let n = height * width;
        if m == 0 || n == 0 {
            return invalid(format!("operator needs m > 0 and n > 0, got m={m}, n={n}"));
        }
        if m > n {
            return invalid(format!("compressive regime requires m <= n, got m={m} > n={n}"));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let mut entries = standard_normals(&mut rng.rng(), m * n);
        entries.iter_mut().for_each(|v| *v *= scale);
        Ok(Self { m, height, width, entries })
    }

    pub fn n(&self) -> usize {
        self.height * self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `A x` on a flat vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return invalid(format!("operator expects {} inputs, got {}", self.n(), x.len()));
        }
        Ok(self
            .entries
            .chunks_exact(self.n())
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `A^T y` on a flat vector.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m {
            return invalid(format!("operator expects {} measurements, got {}", self.m, y.len()));
        }
        let mut out = vec![0.0; self.n()];
        for (row, &yi) in self.entries.chunks_exact(self.n()).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        Ok(out)
    }
}

impl RealOperator for GaussianOperator {
    fn measurements(&self) -> usize {
        self.m
    }

    fn image_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn forward(&self, x: &RealGrid) -> Result<Vec<f64>> {
        if (x.height(), x.width()) != (self.height, self.width) {
            return Err(Error::ShapeMismatch {
                expected: Shape(self.height, self.width),
                actual: x.shape(),
            });
        }
        self.apply(x.as_slice())
    }

    fn adjoint(&self, y: &[f64]) -> Result<RealGrid> {
        Ok(RealGrid::from_raw(self.height, self.width, self.apply_transpose(y)?))
    }
}
