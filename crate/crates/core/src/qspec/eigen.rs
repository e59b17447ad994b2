//! Eigenpairs of a [`DiscreteOperator`] inside an energy window.
//!
//! One-dimensional operators have a narrow band, so eigenvalues are located
//! by bisection on `LDLᵀ` inertia counts (spectrum slicing) and eigenvectors
//! by subspace inverse iteration on each cluster. Two-dimensional operators
//! use shift-invert Lanczos with full reorthogonalization on slices of the
//! window, each slice holding at most [`SLICE_CAP`] eigenvalues; the inertia
//! count tells each slice how many pairs it must lock.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::band::SymBand;
use super::operator::DiscreteOperator;
use crate::error::{Error, Result};
use crate::par::{map_range, map_slice, Execution};

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖A v − λ v‖` with `‖v‖ = 1`.
    pub residual: f64,
}

pub const RESIDUAL_TOL: f64 = 1e-9;
const SLICE_CAP: usize = 40;

/// All eigenpairs with eigenvalue in `[lo, hi)`, sorted ascending.
pub fn eigensolve(op: &DiscreteOperator, lo: f64, hi: f64, exec: Execution) -> Result<Vec<EigenPair>> {
    if !(hi > lo) {
        return Ok(Vec::new());
    }
    let a = &op.matrix;
    if a.count_below(hi) == a.count_below(lo) {
        return Ok(Vec::new());
    }
    let pairs = if op.grid.dim == 1 { bisection_path(a, lo, hi, exec)? } else { lanczos_path(a, lo, hi, exec)? };
    if let Some(bad) = pairs.iter().find(|p| p.residual > RESIDUAL_TOL) {
        return Err(Error::ConvergenceFailure(format!(
            "eigenpair at {} has residual {:e} > {:e}",
            bad.value, bad.residual, RESIDUAL_TOL
        )));
    }
    Ok(pairs)
}

/// Eigenvalues only, by inertia bisection; works for any band matrix.
pub fn eigenvalues_in(a: &SymBand, lo: f64, hi: f64, exec: Execution) -> Vec<f64> {
    let c_lo = a.count_below(lo);
    let c_hi = a.count_below(hi);
    let norm = a.norm_inf();
    map_range(exec, c_hi - c_lo, |k| kth_eigenvalue(a, c_lo + k, lo, hi, norm))
}

/// Bisection for the eigenvalue with global index `k` (0-based, ascending),
/// given `count(lo) ≤ k < count(hi)`.
fn kth_eigenvalue(a: &SymBand, k: usize, mut lo: f64, mut hi: f64, norm: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let tol = 4.0 * f64::EPSILON * (norm + mid.abs());
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        if a.count_below(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn residual(a: &SymBand, v: &[f64], lambda: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    a.apply(v, &mut av);
    av.iter().zip(v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Two passes of classical Gram–Schmidt against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
}

fn bisection_path(a: &SymBand, lo: f64, hi: f64, exec: Execution) -> Result<Vec<EigenPair>> {
    let values = eigenvalues_in(a, lo, hi, exec);
    let norm = a.norm_inf();
    // groups of numerically close eigenvalues share one inverse-iteration subspace
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for v in values {
        match groups.last_mut() {
            Some(g) if v - g[g.len() - 1] <= 1e-8 * (norm + v.abs()) => g.push(v),
            _ => groups.push(vec![v]),
        }
    }
    let solved = map_slice(exec, &groups, |g| subspace_inverse_iteration(a, g));
    let mut out = Vec::new();
    for s in solved {
        out.extend(s?);
    }
    Ok(out)
}

fn subspace_inverse_iteration(a: &SymBand, values: &[f64]) -> Result<Vec<EigenPair>> {
    let n = a.n;
    let m = values.len();
    let sigma = values.iter().sum::<f64>() / m as f64;
    let fact = a.ldlt_shifted(sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(sigma.to_bits());
    let mut basis: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for _ in 0..4 {
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(m);
        for b in &basis {
            let mut x = b.clone();
            fact.solve_in_place(&mut x);
            normalize(&mut x);
            orthogonalize(&mut x, &next);
            normalize(&mut x);
            next.push(x);
        }
        basis = next;
    }
    let vectors = if m == 1 { basis } else { rayleigh_ritz(a, &basis) };
    Ok(values
        .iter()
        .zip(vectors)
        .map(|(&value, vector)| {
            let r = residual(a, &vector, value);
            EigenPair { value, vector, residual: r }
        })
        .collect())
}

/// Ritz vectors of `A` on an orthonormal basis, ascending.
fn rayleigh_ritz(a: &SymBand, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = basis.len();
    let n = a.n;
    let images: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| {
            let mut y = vec![0.0; n];
            a.apply(b, &mut y);
            y
        })
        .collect();
    let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    order
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(i, c)], b, &mut v);
            }
            normalize(&mut v);
            v
        })
        .collect()
}

/// Split `[lo, hi)` into slices of at most `SLICE_CAP` eigenvalues.
fn slices(a: &SymBand, lo: f64, hi: f64) -> Vec<(f64, f64, usize)> {
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi, a.count_below(lo), a.count_below(hi))];
    let mut jitter = 0u32;
    while let Some((l, h, cl, ch)) = stack.pop() {
        let k = ch - cl;
        if k == 0 {
            continue;
        }
        if k <= SLICE_CAP || h - l <= 1e-10 * (h.abs() + 1.0) {
            out.push((l, h, k));
            continue;
        }
        // off-centre split so near-degenerate clusters are unlikely to straddle it
        jitter = jitter.wrapping_mul(1_103_515_245).wrapping_add(12_345);
        let frac = 0.5 + 0.05 * ((jitter >> 16) as f64 / 65_536.0 - 0.5);
        let mid = l + frac * (h - l);
        let cm = a.count_below(mid);
        stack.push((mid, h, cm, ch));
        stack.push((l, mid, cl, cm));
    }
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    out
}

fn lanczos_path(a: &SymBand, lo: f64, hi: f64, exec: Execution) -> Result<Vec<EigenPair>> {
    let parts = slices(a, lo, hi);
    let solved = map_slice(exec, &parts, |&(l, h, k)| lanczos_slice(a, l, h, k));
    let mut out = Vec::new();
    for s in solved {
        out.extend(s?);
    }
    out.sort_by(|x, y| x.value.partial_cmp(&y.value).unwrap());
    Ok(out)
}

/// Shift-invert Lanczos on `(A − σ)⁻¹`, σ at the slice centre, locking
/// converged pairs and restarting orthogonally to them until `k` pairs in
/// `[lo, hi)` are found.
fn lanczos_slice(a: &SymBand, lo: f64, hi: f64, k: usize) -> Result<Vec<EigenPair>> {
    let n = a.n;
    let sigma = 0.5 * (lo + hi) + 1e-9 * (hi - lo);
    let fact = a.ldlt_shifted(sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(sigma.to_bits() ^ 0x1a9c);
    let mut locked: Vec<EigenPair> = Vec::new();
    let max_restarts = 30;
    for _ in 0..max_restarts {
        let locked_vecs: Vec<Vec<f64>> = locked.iter().map(|p| p.vector.clone()).collect();
        let room = n.saturating_sub(locked.len());
        let m_max = room.min((3 * k + 40).max(80));
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(m_max + 1);
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut start, &locked_vecs);
        if normalize(&mut start) == 0.0 {
            break;
        }
        q.push(start);
        let mut ritz: Vec<(f64, Vec<f64>)> = Vec::new();
        for j in 0..m_max {
            let mut w = q[j].clone();
            fact.solve_in_place(&mut w);
            let aj = dot(&w, &q[j]);
            alpha.push(aj);
            axpy(-aj, &q[j], &mut w);
            if j > 0 {
                axpy(-beta[j - 1], &q[j - 1], &mut w);
            }
            orthogonalize(&mut w, &q);
            orthogonalize(&mut w, &locked_vecs);
            let bj = dot(&w, &w).sqrt();
            let steps = j + 1;
            let check = steps == m_max || bj <= 1e-14 * aj.abs().max(1e-300) || (steps >= k + 10 && steps % 10 == 0);
            if check {
                ritz = converged_ritz(&alpha, &beta, bj, sigma, lo, hi);
                let needed = k - locked.len();
                if ritz.len() >= needed || steps == m_max || bj <= 1e-14 * aj.abs().max(1e-300) {
                    break;
                }
            }
            beta.push(bj);
            w.iter_mut().for_each(|x| *x /= bj);
            q.push(w);
        }
        for (_, s) in ritz {
            let mut v = vec![0.0; n];
            for (i, si) in s.iter().enumerate() {
                axpy(*si, &q[i], &mut v);
            }
            let lv: Vec<Vec<f64>> = locked.iter().map(|p| p.vector.clone()).collect();
            orthogonalize(&mut v, &lv);
            if normalize(&mut v) < 0.5 {
                continue;
            }
            let mut av = vec![0.0; n];
            a.apply(&v, &mut av);
            let value = dot(&v, &av);
            if !(value >= lo && value < hi) {
                continue;
            }
            let r = residual(a, &v, value);
            if r <= RESIDUAL_TOL && locked.len() < k {
                locked.push(EigenPair { value, vector: v, residual: r });
            }
        }
        if locked.len() >= k {
            locked.sort_by(|x, y| x.value.partial_cmp(&y.value).unwrap());
            return Ok(locked);
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "Lanczos slice [{lo}, {hi}) locked {} of {k} eigenpairs",
        locked.len()
    )))
}

/// Ritz pairs of the Lanczos tridiagonal whose eigenvalue `σ + 1/θ` lies in
/// the slice and whose residual estimate `|β s_m|` is small.
fn converged_ritz(alpha: &[f64], beta: &[f64], b_last: f64, sigma: f64, lo: f64, hi: f64) -> Vec<(f64, Vec<f64>)> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut out = Vec::new();
    for c in 0..m {
        let theta = eig.eigenvalues[c];
        if theta == 0.0 {
            continue;
        }
        let lambda = sigma + 1.0 / theta;
        let margin = 1e-9 * (hi - lo);
        if lambda < lo - margin || lambda >= hi + margin {
            continue;
        }
        let s: DVector<f64> = eig.eigenvectors.column(c).into_owned();
        let est = (b_last * s[m - 1]).abs();
        if est <= 1e-10 * theta.abs() {
            out.push((lambda, s.iter().copied().collect()));
        }
    }
    out
}
