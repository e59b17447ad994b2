//! Linearized data of a twisted periodic orbit: reduced Poincaré
//! determinant, nondegeneracy certificate and the index σ.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::flow::{flow, FlowOptions};
use crate::error::{Error, Result};
use crate::models::ModelHamiltonian;
use crate::symgroup::standard_symplectic;

/// Eigenvalues within this distance of 1 belong to the structural block.
pub const EIGEN_ONE_TOL: f64 = 1e-6;
/// Kernel threshold for the nondegeneracy certificate.
pub const KERNEL_TOL: f64 = 1e-6;

/// `D_red = Π (λ_i − 1)` over the eigenvalues of the twisted monodromy
/// outside the eigenvalue-1 block, together with the size of that block.
pub fn reduced_determinant_of(twisted: &DMatrix<f64>) -> Result<(f64, usize)> {
    let n = twisted.nrows();
    let mut m = twisted.clone();
    balance_parlett_reinsch(&mut m);
    let eig = m.complex_eigenvalues();
    let mut eig: Vec<Complex64> = eig.iter().copied().collect();
    eig.sort_by(|a, b| (a - 1.0).norm().partial_cmp(&(b - 1.0).norm()).unwrap());
    let near_one = eig.iter().filter(|l| (*l - 1.0).norm() <= EIGEN_ONE_TOL).count();
    if near_one > 2 {
        return Err(Error::NondegeneracyViolation { dimension: near_one });
    }
    // the two eigenvalues closest to 1 are the structural pair
    let skip = 2.min(n);
    let prod: Complex64 = eig[skip..].iter().map(|l| l - 1.0).product();
    Ok((prod.re, near_one.max(skip)))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Certificate {
    pub kernel_dim: usize,
    pub pass: bool,
    pub singular_values: Vec<f64>,
}

/// Kernel of `(τ, α) ↦ τ J∇H(z) + (M(g)F − I) α` with `α ⊥ ∇H(z)`.
pub fn nondegeneracy_certificate(model: &ModelHamiltonian, z0: &[f64], twisted: &DMatrix<f64>) -> Certificate {
    let n = twisted.nrows();
    let grad = model.grad_h(z0);
    let vel = standard_symplectic(model.dim) * &grad;
    let basis = orthogonal_complement(&grad);
    let mut k = DMatrix::zeros(n, n);
    k.column_mut(0).copy_from(&vel);
    let shifted = twisted - DMatrix::identity(n, n);
    k.view_mut((0, 1), (n, n - 1)).copy_from(&(shifted * basis));
    let sv = k.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max).max(vel.norm());
    let kernel_dim = sv.iter().filter(|s| **s <= KERNEL_TOL * smax).count();
    let mut singular_values: Vec<f64> = sv.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Certificate { kernel_dim, pass: kernel_dim == 1, singular_values }
}

/// Orthonormal basis (columns) of `v⊥`.
fn orthogonal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    // Householder QR of [v, e_1, …] gives v⊥ in the trailing columns
    let aug = {
        let mut a = DMatrix::zeros(n, n + 1);
        a.column_mut(0).copy_from(&(v / v.norm()));
        for i in 0..n {
            a[(i, i + 1)] = 1.0;
        }
        a
    };
    let q = aug.qr().q();
    q.columns(1, n - 1).into_owned()
}

/// Index from the continuous argument `θ(s)` of `det P(F(s))`,
/// `P(F) = ((A + D) + i(B − C))/2`, along the untwisted monodromy on
/// `[0, t₀]`.
///
/// `P` is multiplicative against the orthogonal lift `M(g)`, so
/// `θ(t₀) = arg det g + arg det P(W)` with `W = M(g)F(t₀)`. The principal
/// part `φ_W` of `arg det P(W)` is the shear of the closing block and is
/// removed: `σ = −(θ(t₀) − φ_W)/π`, which is an integer up to integration
/// error. Returns `(σ, rounding residual, largest per-sample increment)`.
pub fn maslov_from_samples(monodromy: &[DMatrix<f64>], twist: &DMatrix<f64>) -> (i64, f64, f64) {
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    let mut prev: Option<Complex64> = None;
    for f in monodromy {
        let det = complex_block_det(f);
        if let Some(p) = prev {
            let d = (det / p).arg();
            max_step = max_step.max(d.abs());
            total += d;
        }
        prev = Some(det);
    }
    let closing = match monodromy.last() {
        Some(f) => complex_block_det(&(twist * f)).arg(),
        None => 0.0,
    };
    let x = -(total - closing) / std::f64::consts::PI;
    let sigma = x.round();
    (sigma as i64, (x - sigma).abs(), max_step)
}

fn complex_block_det(f: &DMatrix<f64>) -> Complex64 {
    let d = f.nrows() / 2;
    let p = DMatrix::from_fn(d, d, |i, j| {
        let a = f[(i, j)];
        let b = f[(i, d + j)];
        let c = f[(d + i, j)];
        let dd = f[(d + i, d + j)];
        Complex64::new(0.5 * (a + dd), 0.5 * (b - c))
    });
    p.determinant()
}

/// Rounding residual above which σ is flagged as ambiguous.
pub const PHASE_TOL: f64 = 0.1;
/// Largest accepted change of `arg det P` between samples.
const MAX_PHASE_STEP: f64 = 0.25 * std::f64::consts::PI;

/// σ for the orbit through `z0` over `[0, t0]` twisted by `twist = M(g)`,
/// refining the sampling if the phase track looks under-resolved.
pub fn maslov_index(
    model: &ModelHamiltonian,
    z0: &[f64],
    t0: f64,
    twist: &DMatrix<f64>,
    opts: &FlowOptions,
) -> Result<(i64, f64)> {
    let mut worst = f64::NAN;
    for samples in [400.0, 1600.0, 6400.0] {
        let o = FlowOptions { max_step: (t0 / samples).max(1e-6), ..*opts };
        let r = flow(model, z0, t0, &o)?;
        let (sigma, residual, step) = maslov_from_samples(&r.monodromy, twist);
        if residual <= PHASE_TOL && step <= MAX_PHASE_STEP {
            return Ok((sigma, residual));
        }
        worst = residual;
    }
    Err(Error::PhaseAmbiguity { residual: worst, tol: PHASE_TOL })
}
