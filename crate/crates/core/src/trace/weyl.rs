//! Smooth (Weyl) part: fixed-subspace data, Liouville factors by thin-shell
//! Monte Carlo and the counting law.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SemiclassicalTerm, TermKind};
use crate::cdyn::OrbitDatabase;
use crate::error::{Error, Result};
use crate::models::{confinement_check, ModelHamiltonian};
use crate::par::{map_range, Execution};
use crate::qspec::WindowPair;
use crate::symgroup::FiniteGroupRep;

/// Relative Monte Carlo standard error above which estimates are rejected.
pub const MC_REL_LIMIT: f64 = 0.02;
const CHUNK: usize = 1 << 16;
const FIXED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSetData {
    pub g: usize,
    /// `dim ker(g − I)` on `R^d`
    pub nu: usize,
    /// Orthonormal basis of `ker(g − I)` (columns, `d × ν`).
    pub fixed_basis: DMatrix<f64>,
    /// Orthonormal basis of the complement (columns, `d × (d − ν)`).
    pub complement_basis: DMatrix<f64>,
    /// `det((I − g)|_{F̃⊥})`
    pub complement_det: f64,
}

impl FixedSetData {
    /// Dimension of `F_g = ker(M(g) − I)` in phase space.
    pub fn phase_dim(&self) -> usize {
        2 * self.nu
    }
}

pub fn fixed_set_data(group: &FiniteGroupRep, g: usize) -> FixedSetData {
    let m = &group.elements[g];
    let d = m.nrows();
    let shifted = m - DMatrix::identity(d, d);
    // ker(g − I) through the symmetric form (g − I)ᵀ(g − I)
    let eig = (shifted.transpose() * &shifted).symmetric_eigen();
    let mut fixed = Vec::new();
    let mut other = Vec::new();
    for k in 0..d {
        let v = eig.eigenvectors.column(k).into_owned();
        if eig.eigenvalues[k].abs() <= FIXED_TOL {
            fixed.push(v);
        } else {
            other.push(v);
        }
    }
    let as_matrix = |cols: &[DVector<f64>]| {
        if cols.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(cols)
        }
    };
    let fixed_basis = as_matrix(&fixed);
    let complement_basis = as_matrix(&other);
    let restricted = complement_basis.transpose() * (-&shifted) * &complement_basis;
    let complement_det = if other.is_empty() { 1.0 } else { restricted.determinant() };
    FixedSetData { g, nu: fixed.len(), fixed_basis, complement_basis, complement_det }
}

/// Sampling box for `{H ≤ level}` inside `F_g`: position half-width and momentum half-width.
fn sampling_box(model: &ModelHamiltonian, basis: &DMatrix<f64>, level: f64) -> Result<(f64, f64)> {
    let rx = confinement_check(model, level, 1e-3 * level.abs().max(1.0), 50.0)?.max(1e-6);
    let nu = basis.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a3b);
    let mut vmin = model.potential(&vec![0.0; model.dim]);
    for _ in 0..20_000 {
        let a = DVector::from_fn(nu, |_, _| rng.random_range(-rx..rx));
        vmin = vmin.min(model.potential((basis * a).as_slice()));
    }
    let p = (level - vmin).max(0.0).sqrt() * 1.05;
    Ok((rx * 1.02, p))
}

/// Monte Carlo tally over a box in `F_g` coordinates.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: usize,
    hits: f64,
    hits_sq: f64,
    ratio: f64,
    ratio_sq: f64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.n += o.n;
        self.hits += o.hits;
        self.hits_sq += o.hits_sq;
        self.ratio += o.ratio;
        self.ratio_sq += o.ratio_sq;
        self
    }

    /// Mean and standard error of a per-sample quantity, scaled by `w`.
    fn estimate(sum: f64, sum_sq: f64, n: usize, w: f64) -> (f64, f64) {
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum_sq / nf - mean * mean).max(0.0);
        (w * mean, w * (var / nf).sqrt())
    }
}

/// Samples `z ∈ F_g` uniformly in the box and tallies `lo ≤ H(z) ≤ hi`
/// together with the ratio `|∇_{F_g} H| / |∇H|` on hits.
#[allow(clippy::too_many_arguments)]
fn shell_tally(
    model: &ModelHamiltonian,
    basis: &DMatrix<f64>,
    half_x: f64,
    half_p: f64,
    lo: f64,
    hi: f64,
    samples: usize,
    rng_seed: u64,
    exec: Execution,
) -> Tally {
    let nu = basis.ncols();
    let d = model.dim;
    let chunks = samples.div_ceil(CHUNK);
    let parts = map_range(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(c as u64);
        let count = CHUNK.min(samples - c * CHUNK);
        let mut t = Tally { n: count, ..Tally::default() };
        let mut z = vec![0.0; 2 * d];
        for _ in 0..count {
            let a = DVector::from_fn(nu, |_, _| rng.random_range(-half_x..half_x));
            let b = DVector::from_fn(nu, |_, _| rng.random_range(-half_p..half_p));
            let x = basis * a;
            let p = basis * b;
            z[..d].copy_from_slice(x.as_slice());
            z[d..].copy_from_slice(p.as_slice());
            let h = model.hamiltonian(&z);
            if h >= lo && h <= hi {
                let grad = model.grad_h(&z);
                let full = grad.norm();
                let gx = basis.transpose() * grad.rows(0, d);
                let gp = basis.transpose() * grad.rows(d, d);
                let restricted = (gx.norm_squared() + gp.norm_squared()).sqrt();
                let r = if full > 0.0 { restricted / full } else { 1.0 };
                t.hits += 1.0;
                t.hits_sq += 1.0;
                t.ratio += r;
                t.ratio_sq += r * r;
            }
        }
        t
    });
    parts.into_iter().fold(Tally::default(), Tally::merge)
}

/// `∫_{Σ_λ ∩ F_g} dσ/|∇H|` with both gradient conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleEstimate {
    /// Ambient gradient `|∇H|` in the surface integrand.
    pub value: f64,
    pub std_err: f64,
    /// Co-area form `d/dλ Vol{z ∈ F_g : H ≤ λ}` (restricted gradient).
    pub restricted: f64,
    pub restricted_std_err: f64,
}

impl LiouvilleEstimate {
    fn zero() -> Self {
        Self { value: 0.0, std_err: 0.0, restricted: 0.0, restricted_std_err: 0.0 }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn liouville_factor(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    g: usize,
    lambda: f64,
    mc_samples: usize,
    shell: f64,
    rng_seed: u64,
    exec: Execution,
) -> Result<LiouvilleEstimate> {
    if !(shell > 0.0) || mc_samples == 0 {
        return Err(Error::BadParams("Liouville shell and sample count must be positive".into()));
    }
    let fixed = fixed_set_data(group, g);
    if fixed.nu == 0 {
        // F_g = {0}; the level set is a point only at a critical value
        return Ok(LiouvilleEstimate::zero());
    }
    let (hx, hp) = sampling_box(model, &fixed.fixed_basis, lambda + shell)?;
    let t = shell_tally(model, &fixed.fixed_basis, hx, hp, lambda - shell, lambda + shell, mc_samples, rng_seed, exec);
    let box_vol = (2.0 * hx).powi(fixed.nu as i32) * (2.0 * hp).powi(fixed.nu as i32);
    let w = box_vol / (2.0 * shell);
    let (restricted, restricted_std_err) = Tally::estimate(t.hits, t.hits_sq, t.n, w);
    let (value, std_err) = Tally::estimate(t.ratio, t.ratio_sq, t.n, w);
    if restricted == 0.0 {
        return Ok(LiouvilleEstimate::zero());
    }
    let limit = MC_REL_LIMIT * restricted;
    if restricted_std_err > limit {
        return Err(Error::MCVariance { std_err: restricted_std_err, limit });
    }
    Ok(LiouvilleEstimate { value, std_err, restricted, restricted_std_err })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleOptions {
    pub mc_samples: usize,
    pub shell: f64,
    pub rng_seed: u64,
}

impl Default for LiouvilleOptions {
    fn default() -> Self {
        Self { mc_samples: 1_000_000, shell: 0.02, rng_seed: 0x11_0b11 }
    }
}

/// Leading Weyl term of `I_g(h)`: `c₀ h^{1−ν_g}` with
/// `c₀ = ψ(λ) f̂(0) (2π)^{−ν_g} L_g / det((I − g)|_{F̃⊥})`.
///
/// With an orbit database, every nonzero return time inside the support of
/// `f̂` is a regime violation.
#[allow(clippy::too_many_arguments)]
pub fn weyl_term(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    g: usize,
    windows: &WindowPair,
    lambda: f64,
    orbits: Option<&OrbitDatabase>,
    liouville: &LiouvilleOptions,
    exec: Execution,
) -> Result<SemiclassicalTerm> {
    check_weyl_regime(windows, orbits)?;
    let fixed = fixed_set_data(group, g);
    let l = liouville_factor(model, group, g, lambda, liouville.mc_samples, liouville.shell, liouville.rng_seed, exec)?;
    let amp = windows.psi(lambda) * windows.fhat(0.0) * std::f64::consts::TAU.powi(-(fixed.nu as i32)) * l.value
        / fixed.complement_det;
    Ok(SemiclassicalTerm {
        kind: TermKind::Weyl,
        g,
        orbit: None,
        amplitude: amp.into(),
        action: None,
        h_power: 1.0 - fixed.nu as f64,
    })
}

pub(crate) fn check_weyl_regime(windows: &WindowPair, orbits: Option<&OrbitDatabase>) -> Result<()> {
    if windows.fhat(0.0) == 0.0 {
        return Err(Error::RegimeViolation("Weyl mode needs 0 inside the support of f̂".into()));
    }
    if let Some(db) = orbits {
        let (a, b) = windows.fhat_support();
        let inside = |t: f64| (t > a && t < b) || (windows.fhat.mirror && -t > a && -t < b);
        if let Some(o) = db.orbits.iter().find(|o| o.t0 > 0.0 && inside(o.t0)) {
            return Err(Error::RegimeViolation(format!("return time {} lies inside the support of f̂", o.t0)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPrediction {
    pub value: f64,
    pub std_err: f64,
    /// `Vol{E₁ ≤ H ≤ E₂}`
    pub volume: f64,
}

/// `d_χ²/|G| (2πh)^{−d} Vol[H^{−1}(I)]` by rejection sampling.
#[allow(clippy::too_many_arguments)]
pub fn weyl_counting(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    chi: usize,
    interval: (f64, f64),
    h: f64,
    mc_samples: usize,
    rng_seed: u64,
    exec: Execution,
) -> Result<CountPrediction> {
    if chi >= group.characters.len() {
        return Err(Error::UnknownCharacter(chi));
    }
    let (e1, e2) = interval;
    if !(e2 > e1) {
        return Ok(CountPrediction { value: 0.0, std_err: 0.0, volume: 0.0 });
    }
    let d = model.dim;
    let basis = DMatrix::identity(d, d);
    let (hx, hp) = sampling_box(model, &basis, e2)?;
    let t = shell_tally(model, &basis, hx, hp, e1, e2, mc_samples, rng_seed, exec);
    let box_vol = (2.0 * hx).powi(d as i32) * (2.0 * hp).powi(d as i32);
    let (volume, vol_err) = Tally::estimate(t.hits, t.hits_sq, t.n, box_vol);
    let dchi = group.degree(chi) as f64;
    let scale = dchi * dchi / group.order() as f64 * (std::f64::consts::TAU * h).powi(-(d as i32));
    if volume > 0.0 && vol_err > MC_REL_LIMIT * volume {
        return Err(Error::MCVariance { std_err: vol_err, limit: MC_REL_LIMIT * volume });
    }
    Ok(CountPrediction { value: scale * volume, std_err: scale * vol_err, volume })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symgroup::catalog_group;
    use std::f64::consts::PI;

    fn harmonic(d: usize) -> ModelHamiltonian {
        ModelHamiltonian::from_name("harmonic", Some(d), &[]).unwrap()
    }

    #[test]
    fn fixed_sets() {
        let z2 = catalog_group("z2", 1).unwrap();
        let id = fixed_set_data(&z2, 0);
        assert_eq!((id.nu, id.complement_det), (1, 1.0));
        let minus = fixed_set_data(&z2, 1);
        assert_eq!(minus.nu, 0);
        assert!((minus.complement_det - 2.0).abs() < 1e-14);
        let d4 = catalog_group("dihedral4", 2).unwrap();
        let quarter = d4
            .elements
            .iter()
            .position(|m| (m[(0, 1)].abs() - 1.0).abs() < 1e-12 && m[(0, 0)].abs() < 1e-12 && m.determinant() > 0.0)
            .unwrap();
        let r = fixed_set_data(&d4, quarter);
        assert_eq!(r.nu, 0);
        assert!((r.complement_det - 2.0).abs() < 1e-12);
    }

    #[test]
    fn disk_liouville() {
        let z2 = catalog_group("z2", 1).unwrap();
        let l = liouville_factor(&harmonic(1), &z2, 0, 1.0, 400_000, 0.02, 3, Execution::Parallel).unwrap();
        assert!((l.value - PI).abs() <= 3.0 * l.std_err + 1e-12, "{l:?}");
        assert!((l.restricted - l.value).abs() < 1e-12);
        let parity = liouville_factor(&harmonic(1), &z2, 1, 1.0, 1000, 0.02, 3, Execution::Parallel).unwrap();
        assert_eq!(parity.value, 0.0);
    }

    #[test]
    fn reflection_restricts_to_one_dimension() {
        let g = catalog_group("z2^d", 2).unwrap();
        // the reflection fixing the x-axis
        let refl = g.elements.iter().position(|m| m[(0, 0)] > 0.5 && m[(1, 1)] < -0.5).unwrap();
        let l = liouville_factor(&harmonic(2), &g, refl, 1.0, 400_000, 0.02, 5, Execution::Parallel).unwrap();
        assert!((l.value - PI).abs() <= 3.0 * l.std_err, "{l:?}");
    }

    #[test]
    fn sequential_matches_parallel() {
        let z2 = catalog_group("z2", 1).unwrap();
        let a = liouville_factor(&harmonic(1), &z2, 0, 1.0, 200_000, 0.02, 9, Execution::Parallel).unwrap();
        let b = liouville_factor(&harmonic(1), &z2, 0, 1.0, 200_000, 0.02, 9, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn counting_harmonic() {
        let z2 = catalog_group("z2", 1).unwrap();
        for chi in 0..2 {
            let c = weyl_counting(&harmonic(1), &z2, chi, (0.0, 1.0), 0.01, 1_000_000, 1, Execution::Parallel).unwrap();
            assert!((c.value - 25.0).abs() <= 3.0 * c.std_err + 1e-9, "{c:?}");
        }
        let trivial = catalog_group("trivial", 1).unwrap();
        let c = weyl_counting(&harmonic(1), &trivial, 0, (0.0, 1.0), 0.01, 1_000_000, 1, Execution::Parallel).unwrap();
        assert!((c.value - 50.0).abs() <= 3.0 * c.std_err);
        let empty = weyl_counting(&harmonic(1), &z2, 0, (1.0, 1.0), 0.01, 1000, 1, Execution::Parallel).unwrap();
        assert_eq!(empty.value, 0.0);
    }

    #[test]
    fn weyl_term_harmonic() {
        let z2 = catalog_group("z2", 1).unwrap();
        let w = crate::qspec::build_windows(1.0, 0.1, 0.5, 0.0, 0.5, 0.005).unwrap();
        let opts = LiouvilleOptions { mc_samples: 400_000, ..LiouvilleOptions::default() };
        let t = weyl_term(&harmonic(1), &z2, 0, &w, 1.0, None, &opts, Execution::Parallel).unwrap();
        let expect = w.fhat(0.0) * PI / std::f64::consts::TAU;
        assert!((t.amplitude.re - expect).abs() <= 0.01 * expect);
        assert_eq!(t.h_power, 0.0);
        let p = weyl_term(&harmonic(1), &z2, 1, &w, 1.0, None, &opts, Execution::Parallel).unwrap();
        assert_eq!(p.amplitude.re, 0.0);
        let off = crate::qspec::build_windows(1.0, 0.1, 0.5, 2.0, 0.5, 0.005).unwrap();
        assert!(matches!(
            weyl_term(&harmonic(1), &z2, 0, &off, 1.0, None, &opts, Execution::Parallel),
            Err(Error::RegimeViolation(_))
        ));
    }
}
