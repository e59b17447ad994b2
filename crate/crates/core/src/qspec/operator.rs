use serde::{Deserialize, Serialize};

use super::band::SymBand;
use crate::error::{Error, Result};
use crate::models::{confinement_check, ModelHamiltonian};

/// Uniform interior-node Dirichlet grid on `[−L, L]^dim`.
///
/// Node `k` (0-based) along an axis sits at `−L + (k + 1) Δx` with
/// `Δx = 2L/(n + 1)`; in two dimensions the flat index is `i + n j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

pub fn build_grid(dim: usize, half_width: f64, n: usize) -> Result<Grid> {
    if !(1..=2).contains(&dim) {
        return Err(Error::BadSize(format!("grid dimension must be 1 or 2, got {dim}")));
    }
    if n < 16 {
        return Err(Error::BadSize(format!("need at least 16 nodes per axis, got {n}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::BadSize(format!("half-width must be positive, got {half_width}")));
    }
    Ok(Grid { dim, half_width, n })
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n + 1) as f64
    }

    pub fn coord(&self, k: usize) -> f64 {
        // centred form keeps x_k = −x_{n−1−k} exactly
        ((k + 1) as f64 - 0.5 * (self.n + 1) as f64) * self.spacing()
    }

    /// Total number of nodes `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis node indices of a flat index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx % self.n, idx / self.n]
        }
    }

    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        ij[0] + self.n * ij[1]
    }

    /// Coordinates of a flat node index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let ij = self.unflatten(idx);
        (0..self.dim).map(|a| self.coord(ij[a])).collect()
    }
}

/// Second-derivative central stencil coefficients `c_0, c_1, …` for
/// `f'' ≈ (c_0 f_i + Σ_k c_k (f_{i+k} + f_{i−k})) / Δx²`.
pub fn stencil(order: usize) -> Result<&'static [f64]> {
    const O2: [f64; 2] = [-2.0, 1.0];
    const O4: [f64; 3] = [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    const O6: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    const O8: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    match order {
        2 => Ok(&O2),
        4 => Ok(&O4),
        6 => Ok(&O6),
        8 => Ok(&O8),
        _ => Err(Error::BadSize(format!("stencil order must be 2, 4, 6 or 8, got {order}"))),
    }
}

/// `−h²Δ + V` on a [`Grid`], stored as a symmetric band matrix.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub h: f64,
    pub order: usize,
    pub matrix: SymBand,
}

/// Fraction of the box half-width the classical region may occupy.
pub const BOX_FRACTION: f64 = 0.8;

/// Assemble the operator. Wide stencils see the Dirichlet walls through
/// odd ghost values, so sine modes stay exact eigenvectors of the Laplacian.
/// With `confine_energy = Some(E)` the sublevel set
/// `{V ≤ E}` must fit within `0.8 L`, else `BoxTooSmall`.
pub fn discretize(
    model: &ModelHamiltonian,
    grid: &Grid,
    h: f64,
    order: usize,
    confine_energy: Option<f64>,
) -> Result<DiscreteOperator> {
    if model.dim != grid.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: grid.dim });
    }
    if !(h > 0.0) {
        return Err(Error::BadParams(format!("h must be positive, got {h}")));
    }
    let coeffs = stencil(order)?;
    if let Some(e) = confine_energy {
        let l = grid.half_width;
        let radius = match confinement_check(model, e, 1e-3 * e.abs().max(1.0), 4.0 * l) {
            Ok(r) => r,
            Err(Error::NotConfined { .. }) => f64::INFINITY,
            Err(other) => return Err(other),
        };
        if radius > BOX_FRACTION * l {
            return Err(Error::BoxTooSmall { half_width: l, radius, fraction: BOX_FRACTION });
        }
    }
    let n = grid.n;
    let half = coeffs.len() - 1;
    let stride = if grid.dim == 1 { 1 } else { n };
    let kd = half * stride;
    let scale = -h * h / (grid.spacing() * grid.spacing());
    let mut a = SymBand::zeros(grid.len(), kd);
    for idx in 0..grid.len() {
        let ij = grid.unflatten(idx);
        a.set(idx, idx, model.potential(&grid.point(idx)) + scale * coeffs[0] * grid.dim as f64);
        for axis in 0..grid.dim {
            let step = if axis == 0 { 1 } else { n };
            let pos = ij[axis] as i64;
            for (k, c) in coeffs.iter().enumerate().skip(1) {
                let k = k as i64;
                if pos >= k {
                    a.set(idx, idx - k as usize * step, scale * c);
                }
                // odd reflection through the walls at nodes −1 and n
                let mirrored = [(pos - k < -1).then(|| k - pos - 2), (pos + k > n as i64).then(|| 2 * n as i64 - pos - k)];
                for m in mirrored.into_iter().flatten() {
                    let mut target = ij;
                    target[axis] = m as usize;
                    let t = grid.flatten(target);
                    if t <= idx {
                        a.add(idx, t, -scale * c);
                    }
                }
            }
        }
    }
    Ok(DiscreteOperator { grid: *grid, h, order, matrix: a })
}
