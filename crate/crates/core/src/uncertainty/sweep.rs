use serde::{Deserialize, Serialize};

use crate::denoise::{Denoisable, Denoiser, NoiseModel};
use crate::error::Result;
use crate::grid::Grid;
use crate::rng::SeededRng;
use crate::uncertainty::{
    divergence_field, gsure_from_field, heatmap_discrepancy, mse_heatmap, Discrepancy, SureConfig,
};

/// One point of the accuracy/resolution trade-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub patch: usize,
    pub k: usize,
    pub discrepancy: f64,
}

/// Discrepancy between risk and true-error heatmaps for every
/// `(patch, K)` pair, patch stride `patch / 4`. One divergence field is
/// drawn per `K` (from `rng.fork(K)`) and shared by all patch sizes.
#[allow(clippy::too_many_arguments)]
pub fn accuracy_sweep<T, D>(
    r: &Grid<T>,
    xhat: &Grid<T>,
    x_true: &Grid<T>,
    f: &D,
    noise: &NoiseModel,
    patches: &[usize],
    ks: &[usize],
    base: &SureConfig,
    metric: Discrepancy,
    rng: &SeededRng,
) -> Result<Vec<SweepRow>>
where
    T: Denoisable,
    D: Denoiser + ?Sized,
{
    let mut rows = Vec::with_capacity(patches.len() * ks.len());
    for &patch in patches {
        SureConfig { patch, stride: (patch / 4).max(1), ..*base }.validate(r.height(), r.width())?;
    }
    for &k in ks {
        let field = divergence_field(f, r, noise, &SureConfig { k, ..*base }, &rng.fork(k as u64))?;
        for &patch in patches {
            let cfg = SureConfig { patch, stride: (patch / 4).max(1), k, ..*base };
            let (_, hm) = gsure_from_field(r, xhat, &field, noise, Some(&cfg))?;
            let truth = mse_heatmap(xhat, x_true, &cfg)?;
            let discrepancy = heatmap_discrepancy(&hm.expect("heatmap requested"), &truth, metric)?;
            rows.push(SweepRow { patch, k, discrepancy });
        }
    }
    rows.sort_by_key(|row| (row.patch, row.k));
    Ok(rows)
}

/// `patch,K,discrepancy` CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("patch,K,discrepancy\n");
    for r in rows {
        out.push_str(&format!("{},{},{:e}\n", r.patch, r.k, r.discrepancy));
    }
    out
}
