//! Invariant Schrödinger-type Hamiltonians `H(x, ξ) = |ξ|² + V(x)`.
//!
//! Every catalog potential is a polynomial or a polynomial times a Gaussian
//! with hand-written gradient and Hessian.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symgroup::{symplectic_lift, FiniteGroupRep};

/// Model selection as it appears in a run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Potential {
    /// `(x² − 1)²`
    DoubleWell,
    /// `Σ x_i⁴ + c x² y²`
    Quartic { coupling: f64 },
    /// `w² |x|²`
    Harmonic { w: f64 },
    /// `(x² + a) e^{−x²}`
    WellOnIsland { a: f64 },
    /// `x⁴ + y⁴ + a x y + b (x + y)`
    SwapPair { a: f64, b: f64 },
    /// `½(x² + y²)² − x y² + ⅓ x³`
    Triangle,
    /// `½ x² y² + c (x² + y²)`
    SquareXY { c: f64 },
    /// `Σ w_j² x_j²`
    AnisoHarmonic { w: Vec<f64> },
    /// `Σ c_k x^k`, one dimension
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelHamiltonian {
    pub name: String,
    pub dim: usize,
    /// Catalog group under which the model is invariant.
    pub group_name: String,
    potential: Potential,
}

fn param(params: &[f64], k: usize, default: f64) -> f64 {
    params.get(k).copied().unwrap_or(default)
}

fn check_arity(name: &str, params: &[f64], max: usize) -> Result<()> {
    if params.len() > max {
        return Err(Error::BadParams(format!("{name} takes at most {max} parameters, got {}", params.len())));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::BadParams(format!("{name}: non-finite parameter")));
    }
    Ok(())
}

fn fixed_dim(name: &str, requested: Option<usize>, dim: usize) -> Result<usize> {
    match requested {
        Some(d) if d != dim => Err(Error::BadParams(format!("{name} is defined in dimension {dim}, not {d}"))),
        _ => Ok(dim),
    }
}

/// Build a catalog model.
///
/// Parameters by name: `quartic [c]` (d = 1 or 2), `harmonic [w]` (any d),
/// `well_on_island [a]`, `swap_pair [a, b]`, `square_xy [c]`,
/// `aniso_harmonic [w_1, …, w_d]` (pairwise distinct), `polynomial [c_0, …]`.
pub fn catalog(spec: &ModelSpec) -> Result<ModelHamiltonian> {
    let name = spec.name.as_str();
    let p = &spec.params;
    let (dim, potential, group) = match name {
        "double_well" => {
            check_arity(name, p, 0)?;
            (fixed_dim(name, spec.dim, 1)?, Potential::DoubleWell, "z2")
        }
        "quartic" => {
            check_arity(name, p, 1)?;
            let d = spec.dim.unwrap_or(1);
            if !(1..=2).contains(&d) {
                return Err(Error::BadParams("quartic is defined for d = 1 or 2".into()));
            }
            let coupling = param(p, 0, 0.0);
            if d == 2 && coupling <= -2.0 {
                return Err(Error::BadParams("quartic coupling must exceed -2 for confinement".into()));
            }
            (d, Potential::Quartic { coupling }, if d == 2 { "dihedral4" } else { "z2" })
        }
        "harmonic" => {
            check_arity(name, p, 1)?;
            let w = param(p, 0, 1.0);
            if w <= 0.0 {
                return Err(Error::BadParams("harmonic frequency must be positive".into()));
            }
            (spec.dim.unwrap_or(1).max(1), Potential::Harmonic { w }, "z2")
        }
        "well_on_island" => {
            check_arity(name, p, 1)?;
            let a = param(p, 0, 0.5);
            if a < 0.0 {
                return Err(Error::BadParams("well_on_island needs a ≥ 0".into()));
            }
            (fixed_dim(name, spec.dim, 1)?, Potential::WellOnIsland { a }, "z2")
        }
        "swap_pair" => {
            check_arity(name, p, 2)?;
            (fixed_dim(name, spec.dim, 2)?, Potential::SwapPair { a: param(p, 0, 0.5), b: param(p, 1, 0.0) }, "swap2")
        }
        "triangle" => {
            check_arity(name, p, 0)?;
            (fixed_dim(name, spec.dim, 2)?, Potential::Triangle, "dihedral3")
        }
        "square_xy" => {
            check_arity(name, p, 1)?;
            let c = param(p, 0, 0.0);
            if c < 0.0 {
                return Err(Error::BadParams("square_xy confinement coefficient must be ≥ 0".into()));
            }
            (fixed_dim(name, spec.dim, 2)?, Potential::SquareXY { c }, "dihedral4")
        }
        "aniso_harmonic" => {
            let w: Vec<f64> = if p.is_empty() { vec![1.0] } else { p.clone() };
            if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(Error::BadParams("frequencies must be positive".into()));
            }
            for i in 0..w.len() {
                for j in (i + 1)..w.len() {
                    if (w[i] * w[i] - w[j] * w[j]).abs() <= 1e-12 * w[i] * w[i] {
                        return Err(Error::BadParams(format!("repeated frequency {} (must be pairwise distinct)", w[i])));
                    }
                }
            }
            let d = fixed_dim(name, spec.dim, w.len())?;
            (d, Potential::AnisoHarmonic { w }, "z2^d")
        }
        "polynomial" => {
            if p.is_empty() || p.iter().any(|c| !c.is_finite()) {
                return Err(Error::BadParams("polynomial needs finite coefficients".into()));
            }
            (fixed_dim(name, spec.dim, 1)?, Potential::Polynomial { coeffs: p.clone() }, "trivial")
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(ModelHamiltonian { name: name.to_string(), dim, group_name: group.to_string(), potential })
}

impl ModelHamiltonian {
    pub fn from_name(name: &str, dim: Option<usize>, params: &[f64]) -> Result<Self> {
        catalog(&ModelSpec { name: name.into(), dim, params: params.to_vec() })
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        match &self.potential {
            Potential::DoubleWell => {
                let s = x[0] * x[0] - 1.0;
                s * s
            }
            Potential::Quartic { coupling } => {
                let mut v: f64 = x.iter().map(|q| q.powi(4)).sum();
                if self.dim == 2 {
                    v += coupling * x[0] * x[0] * x[1] * x[1];
                }
                v
            }
            Potential::Harmonic { w } => w * w * x.iter().map(|q| q * q).sum::<f64>(),
            Potential::WellOnIsland { a } => {
                let r2 = x[0] * x[0];
                (r2 + a) * (-r2).exp()
            }
            Potential::SwapPair { a, b } => {
                let (u, v) = (x[0], x[1]);
                u.powi(4) + v.powi(4) + a * u * v + b * (u + v)
            }
            Potential::Triangle => {
                let (u, v) = (x[0], x[1]);
                let r2 = u * u + v * v;
                0.5 * r2 * r2 - u * v * v + u * u * u / 3.0
            }
            Potential::SquareXY { c } => {
                let (u, v) = (x[0], x[1]);
                0.5 * u * u * v * v + c * (u * u + v * v)
            }
            Potential::AnisoHarmonic { w } => w.iter().zip(x).map(|(w, q)| w * w * q * q).sum(),
            Potential::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c),
        }
    }

    /// Writes `∇V(x)` into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.potential {
            Potential::DoubleWell => out[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0),
            Potential::Quartic { coupling } => {
                for (o, q) in out.iter_mut().zip(x) {
                    *o = 4.0 * q * q * q;
                }
                if self.dim == 2 {
                    out[0] += 2.0 * coupling * x[0] * x[1] * x[1];
                    out[1] += 2.0 * coupling * x[0] * x[0] * x[1];
                }
            }
            Potential::Harmonic { w } => {
                for (o, q) in out.iter_mut().zip(x) {
                    *o = 2.0 * w * w * q;
                }
            }
            Potential::WellOnIsland { a } => {
                let r2 = x[0] * x[0];
                out[0] = 2.0 * x[0] * (-r2).exp() * (1.0 - a - r2);
            }
            Potential::SwapPair { a, b } => {
                out[0] = 4.0 * x[0].powi(3) + a * x[1] + b;
                out[1] = 4.0 * x[1].powi(3) + a * x[0] + b;
            }
            Potential::Triangle => {
                let (u, v) = (x[0], x[1]);
                let r2 = u * u + v * v;
                out[0] = 2.0 * u * r2 - v * v + u * u;
                out[1] = 2.0 * v * r2 - 2.0 * u * v;
            }
            Potential::SquareXY { c } => {
                let (u, v) = (x[0], x[1]);
                out[0] = u * v * v + 2.0 * c * u;
                out[1] = u * u * v + 2.0 * c * v;
            }
            Potential::AnisoHarmonic { w } => {
                for ((o, w), q) in out.iter_mut().zip(w).zip(x) {
                    *o = 2.0 * w * w * q;
                }
            }
            Potential::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * x[0] + k as f64 * c;
                }
                out[0] = acc;
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        self.gradient_into(x, g.as_mut_slice());
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        match &self.potential {
            Potential::DoubleWell => h[(0, 0)] = 12.0 * x[0] * x[0] - 4.0,
            Potential::Quartic { coupling } => {
                for i in 0..d {
                    h[(i, i)] = 12.0 * x[i] * x[i];
                }
                if d == 2 {
                    h[(0, 0)] += 2.0 * coupling * x[1] * x[1];
                    h[(1, 1)] += 2.0 * coupling * x[0] * x[0];
                    h[(0, 1)] = 4.0 * coupling * x[0] * x[1];
                    h[(1, 0)] = h[(0, 1)];
                }
            }
            Potential::Harmonic { w } => h.fill_diagonal(2.0 * w * w),
            Potential::WellOnIsland { a } => {
                let r2 = x[0] * x[0];
                h[(0, 0)] = 2.0 * (-r2).exp() * (2.0 * r2 * r2 - (5.0 - 2.0 * a) * r2 + (1.0 - a));
            }
            Potential::SwapPair { a, .. } => {
                h[(0, 0)] = 12.0 * x[0] * x[0];
                h[(1, 1)] = 12.0 * x[1] * x[1];
                h[(0, 1)] = *a;
                h[(1, 0)] = *a;
            }
            Potential::Triangle => {
                let (u, v) = (x[0], x[1]);
                h[(0, 0)] = 6.0 * u * u + 2.0 * v * v + 2.0 * u;
                h[(1, 1)] = 2.0 * u * u + 6.0 * v * v - 2.0 * u;
                h[(0, 1)] = 4.0 * u * v - 2.0 * v;
                h[(1, 0)] = h[(0, 1)];
            }
            Potential::SquareXY { c } => {
                let (u, v) = (x[0], x[1]);
                h[(0, 0)] = v * v + 2.0 * c;
                h[(1, 1)] = u * u + 2.0 * c;
                h[(0, 1)] = 2.0 * u * v;
                h[(1, 0)] = h[(0, 1)];
            }
            Potential::AnisoHarmonic { w } => {
                for i in 0..d {
                    h[(i, i)] = 2.0 * w[i] * w[i];
                }
            }
            Potential::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().skip(2).rev() {
                    acc = acc * x[0] + (k * (k - 1)) as f64 * c;
                }
                h[(0, 0)] = acc;
            }
        }
        h
    }

    /// `H(z) = |ξ|² + V(x)` with `z = (x, ξ)`.
    pub fn hamiltonian(&self, z: &[f64]) -> f64 {
        let d = self.dim;
        z[d..2 * d].iter().map(|p| p * p).sum::<f64>() + self.potential(&z[..d])
    }

    /// `∇H = (∇V, 2ξ)`
    pub fn grad_h(&self, z: &[f64]) -> DVector<f64> {
        let d = self.dim;
        let mut g = DVector::zeros(2 * d);
        self.gradient_into(&z[..d], &mut g.as_mut_slice()[..d]);
        for i in 0..d {
            g[d + i] = 2.0 * z[d + i];
        }
        g
    }

    /// `Hess H = diag(Hess V, 2I)`
    pub fn hess_h(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(2 * d, 2 * d);
        h.view_mut((0, 0), (d, d)).copy_from(&self.hessian(&z[..d]));
        for i in 0..d {
            h[(d + i, d + i)] = 2.0;
        }
        h
    }

    /// Frequencies `w_j` of a quadratic model, for closed-form checks.
    pub fn harmonic_frequencies(&self) -> Option<Vec<f64>> {
        match &self.potential {
            Potential::Harmonic { w } => Some(vec![*w; self.dim]),
            Potential::AnisoHarmonic { w } => Some(w.clone()),
            _ => None,
        }
    }

    /// Lowest `count` exact eigenvalues `Σ_j h w_j (2 n_j + 1)` with
    /// multiplicity, for quadratic models.
    pub fn exact_levels(&self, h: f64, count: usize) -> Option<Vec<f64>> {
        let w = self.harmonic_frequencies()?;
        let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut levels = vec![0.0];
        for wj in &w {
            let cap = count.max(1) as f64 * 2.0 * h * wmin + w.iter().map(|x| h * x).sum::<f64>();
            let mut next = Vec::new();
            for base in &levels {
                let mut n = 0usize;
                loop {
                    let e = base + h * wj * (2 * n + 1) as f64;
                    if e > cap + 1e-12 {
                        break;
                    }
                    next.push(e);
                    n += 1;
                }
            }
            levels = next;
        }
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.truncate(count);
        Some(levels)
    }
}

/// Max over sampled phase points and group elements of `|H(M(g)z) − H(z)|`
/// and of the gradient equivariance defect `|∇H(M(g)z) − ᵗM(g⁻¹)∇H(z)|`.
pub fn check_invariance(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    n_samples: usize,
    radius: f64,
    tol: f64,
) -> Result<f64> {
    if group.dim != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: group.dim });
    }
    let d2 = 2 * model.dim;
    let lifts: Vec<DMatrix<f64>> =
        group.elements.iter().map(|g| symplectic_lift(g).map(|m| m.matrix)).collect::<Result<_>>()?;
    // ᵗM(g⁻¹) = ᵗ(M(g)⁻¹)
    let pullbacks: Vec<DMatrix<f64>> =
        lifts.iter().map(|m| m.clone().try_inverse().expect("lift is invertible").transpose()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a_7a_11);
    let mut worst = 0.0f64;
    for _ in 0..n_samples {
        let z = sample_ball(&mut rng, d2, radius);
        let hz = model.hamiltonian(z.as_slice());
        let gz = model.grad_h(z.as_slice());
        for (m, pb) in lifts.iter().zip(&pullbacks) {
            let mz = m * &z;
            worst = worst.max((model.hamiltonian(mz.as_slice()) - hz).abs());
            let defect = model.grad_h(mz.as_slice()) - pb * &gz;
            worst = worst.max(defect.amax());
        }
    }
    if worst > tol {
        return Err(Error::InvarianceViolation { residual: worst, tol });
    }
    Ok(worst)
}

/// Uniform point in the ball of radius `r` in `R^n`.
pub(crate) fn sample_ball<R: Rng>(rng: &mut R, n: usize, r: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return v * r;
        }
    }
}

/// Smallest sampled radius `R` such that `V > E + δE` on every sampled
/// sphere of radius `r ∈ [R, search_radius]`.
pub fn confinement_check(model: &ModelHamiltonian, e: f64, delta_e: f64, search_radius: f64) -> Result<f64> {
    if !(delta_e > 0.0) {
        return Err(Error::BadParams("δE must be positive".into()));
    }
    let level = e + delta_e;
    let directions = sphere_directions(model.dim);
    let steps = 4000;
    let dr = search_radius / steps as f64;
    let mut x = vec![0.0; model.dim];
    let mut bound = None;
    // scan inward; the first failing radius fixes the bound
    for k in (0..=steps).rev() {
        let r = k as f64 * dr;
        let min_v = directions
            .iter()
            .map(|u| {
                for (xi, ui) in x.iter_mut().zip(u) {
                    *xi = r * ui;
                }
                model.potential(&x)
            })
            .fold(f64::INFINITY, f64::min);
        if min_v <= level {
            if k == steps {
                return Err(Error::NotConfined { search_radius });
            }
            bound = Some((k + 1) as f64 * dr);
            break;
        }
    }
    // the whole ball is above the level: the sublevel set is empty
    Ok(bound.unwrap_or(0.0))
}

fn sphere_directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..1440)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 1440.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0xd1ec);
            let mut dirs: Vec<Vec<f64>> = (0..4000)
                .map(|_| {
                    let v = sample_ball(&mut rng, d, 1.0);
                    let n = v.norm().max(1e-300);
                    v.iter().map(|c| c / n).collect()
                })
                .collect();
            for i in 0..d {
                for s in [-1.0, 1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    dirs.push(e);
                }
            }
            dirs
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symgroup::catalog_group;

    const ALL: [(&str, usize, &[f64]); 9] = [
        ("double_well", 1, &[]),
        ("quartic", 1, &[]),
        ("quartic", 2, &[0.7]),
        ("harmonic", 2, &[1.3]),
        ("well_on_island", 1, &[0.4]),
        ("swap_pair", 2, &[0.5, 0.2]),
        ("triangle", 2, &[]),
        ("square_xy", 2, &[0.1]),
        ("aniso_harmonic", 2, &[1.0, std::f64::consts::SQRT_2]),
    ];

    fn model(name: &str, d: usize, p: &[f64]) -> ModelHamiltonian {
        ModelHamiltonian::from_name(name, Some(d), p).unwrap()
    }

    #[test]
    fn documented_values() {
        let dw = model("double_well", 1, &[]);
        assert_eq!(dw.potential(&[0.0]), 1.0);
        assert_eq!(dw.potential(&[1.0]), 0.0);
        assert_eq!(dw.potential(&[-1.0]), 0.0);
        assert_eq!(model("aniso_harmonic", 1, &[1.0]).potential(&[2.0]), 4.0);
        assert_eq!(model("square_xy", 2, &[]).potential(&[1.0, 2.0]), 2.0);
    }

    #[test]
    fn triangle_matches_polar_form() {
        let m = model("triangle", 2, &[]);
        for k in 0..20 {
            let (r, t) = (0.1 * k as f64, 0.37 * k as f64);
            let v = m.potential(&[r * t.cos(), r * t.sin()]);
            let polar = 0.5 * r.powi(4) + r.powi(3) * (3.0 * t).cos() / 3.0;
            assert!((v - polar).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (name, d, p) in ALL {
            let m = model(name, d, p);
            for _ in 0..20 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                let g = m.gradient(&x);
                let hs = m.hessian(&x);
                assert!((&hs - hs.transpose()).amax() == 0.0);
                let eps = 1e-5;
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += eps;
                    xm[i] -= eps;
                    let fd = (m.potential(&xp) - m.potential(&xm)) / (2.0 * eps);
                    assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{name} grad {i}");
                    let fdh = (m.gradient(&xp) - m.gradient(&xm)) / (2.0 * eps);
                    for j in 0..d {
                        assert!((fdh[j] - hs[(j, i)]).abs() <= 1e-5 * hs[(j, i)].abs().max(1.0), "{name} hess");
                    }
                }
            }
        }
    }

    #[test]
    fn catalog_models_are_invariant_under_their_groups() {
        for (name, d, p) in ALL {
            let m = model(name, d, p);
            let g = catalog_group(&m.group_name, d).unwrap();
            let r = check_invariance(&m, &g, 200, 2.0, 1e-10).unwrap();
            assert!(r <= 1e-10, "{name}: {r}");
        }
        let tri = model("triangle", 2, &[]);
        let r = check_invariance(&tri, &catalog_group("dihedral3", 2).unwrap(), 500, 2.0, 1e-12).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn parity_residual_is_zero_for_double_well() {
        let m = model("double_well", 1, &[]);
        let r = check_invariance(&m, &catalog_group("z2", 1).unwrap(), 100, 3.0, 1e-10).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn shifted_well_breaks_parity() {
        // (x - 1)² = 1 - 2x + x²
        let m = model("polynomial", 1, &[1.0, -2.0, 1.0]);
        let r = check_invariance(&m, &catalog_group("z2", 1).unwrap(), 100, 2.0, 1e-10);
        assert!(matches!(r, Err(Error::InvarianceViolation { .. })));
    }

    #[test]
    fn confinement_radii() {
        let h = model("harmonic", 1, &[]);
        let r = confinement_check(&h, 1.0, 0.2, 10.0).unwrap();
        assert!(r * r > 1.2 && r < 1.1);
        let dw = model("double_well", 1, &[]);
        let r = confinement_check(&dw, 0.5, 0.1, 10.0).unwrap();
        // (x² − 1)² = 0.6 at x² = 1 + √0.6
        let exact = (1.0 + 0.6f64.sqrt()).sqrt();
        assert!(r >= exact && r < exact + 0.01);
        let island = model("well_on_island", 1, &[0.5]);
        let rim = (-(1.0 - 0.5f64)).exp();
        assert!(matches!(confinement_check(&island, rim + 0.1, 0.05, 20.0), Err(Error::NotConfined { .. })));
    }

    #[test]
    fn bad_specs() {
        assert!(matches!(ModelHamiltonian::from_name("henon", None, &[]), Err(Error::UnknownModel(_))));
        assert!(matches!(
            ModelHamiltonian::from_name("aniso_harmonic", None, &[1.0, 1.0]),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(ModelHamiltonian::from_name("triangle", Some(3), &[]), Err(Error::BadParams(_))));
    }

    #[test]
    fn exact_levels_of_oscillators() {
        let h1 = model("harmonic", 1, &[]);
        assert_eq!(h1.exact_levels(0.1, 3).unwrap().len(), 3);
        let h2 = model("harmonic", 2, &[]);
        let l = h2.exact_levels(0.1, 6).unwrap();
        let expect = [0.2, 0.4, 0.4, 0.6, 0.6, 0.6];
        for (a, b) in l.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_gradient_layout() {
        let m = model("double_well", 1, &[]);
        let g = m.grad_h(&[0.5, 0.3]);
        assert!((g[0] - 4.0 * 0.5 * (0.25 - 1.0)).abs() < 1e-15);
        assert!((g[1] - 0.6).abs() < 1e-15);
    }
}
