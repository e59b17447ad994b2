//! Orbit contributions, assembled per group element and per quotient orbit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{SemiclassicalTerm, TermKind};
use crate::cdyn::{flow, flow_end, maslov_index, reduced_determinant_of, FlowOptions, TwistedOrbit};
use crate::error::{Error, Result};
use crate::models::ModelHamiltonian;
use crate::qspec::WindowPair;
use crate::symgroup::{symplectic_lift, FiniteGroupRep};

/// Relative agreement required between the two assemblies.
pub const DUAL_TOL: f64 = 1e-10;

pub(crate) fn check_oscillating_regime(windows: &WindowPair) -> Result<()> {
    if windows.fhat(0.0) != 0.0 {
        return Err(Error::RegimeViolation("oscillating mode needs 0 outside the support of f̂".into()));
    }
    Ok(())
}

/// One-sided sums are doubled in real part when `f̂` carries its mirror image.
fn finish(windows: &WindowPair, one_sided: Complex64) -> Complex64 {
    if windows.fhat.mirror {
        Complex64::new(2.0 * one_sided.re, 0.0)
    } else {
        one_sided
    }
}

fn character(group: &FiniteGroupRep, chi: usize) -> Result<f64> {
    if chi >= group.characters.len() {
        return Err(Error::UnknownCharacter(chi));
    }
    Ok(group.degree(chi) as f64)
}

/// Per-entry terms `class_size · (d_χ/|G|) · χ̄(g) · e^{iS/h} ψ(E) T* e^{iπσ/2} f̂(t₀) / (2π|D_red|^{1/2})`.
pub fn oscillating_terms(
    group: &FiniteGroupRep,
    chi: usize,
    orbits: &[TwistedOrbit],
    windows: &WindowPair,
    e: f64,
) -> Result<Vec<SemiclassicalTerm>> {
    check_oscillating_regime(windows)?;
    let dchi = character(group, chi)?;
    let weight = dchi / group.order() as f64;
    let mut out = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        let fhat = windows.fhat_bump(o.t0);
        if fhat == 0.0 {
            continue;
        }
        let d = match o.d_red {
            Some(d) if o.certificate.pass => d,
            _ => return Err(Error::DegenerateOrbit { t0: o.t0 }),
        };
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * o.sigma as f64);
        let amp = group.chi(chi, o.g).conj()
            * (o.class_size as f64 * weight * windows.psi(e) * o.primitive_period * fhat
                / (std::f64::consts::TAU * d.abs().sqrt()))
            * phase;
        out.push(SemiclassicalTerm {
            kind: TermKind::Oscillating,
            g: o.g,
            orbit: Some(i),
            amplitude: amp,
            action: Some(o.action),
            h_power: 0.0,
        });
    }
    Ok(out)
}

pub fn oscillating_sum(
    group: &FiniteGroupRep,
    chi: usize,
    orbits: &[TwistedOrbit],
    windows: &WindowPair,
    e: f64,
    h: f64,
) -> Result<Complex64> {
    let terms = oscillating_terms(group, chi, orbits, windows, e)?;
    Ok(finish(windows, terms.iter().map(|t| t.value(h)).sum()))
}

/// Quotient data of one geometric orbit class.
#[derive(Debug, Clone)]
pub struct ReducedOrbit {
    pub orbit_class: usize,
    /// Canonical element with `M(g)Φ_{T̄}(z) = z`.
    pub g: usize,
    /// `T̄ = T*/|Stab(γ)|`
    pub period: f64,
    pub action: f64,
    pub sigma: i64,
    /// `M(g)F(T̄)`
    pub monodromy: DMatrix<f64>,
}

/// Recomputes the quotient orbit from an anchor, `T*` and `Stab(γ)`.
pub fn reduce_orbit(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    o: &TwistedOrbit,
    opts: &FlowOptions,
) -> Result<ReducedOrbit> {
    let stab = o.stab_order();
    let period = o.primitive_period / stab as f64;
    let scale = o.z0.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    // free action: no nontrivial element fixes a sampled orbit point
    let track = flow(model, &o.z0, o.primitive_period, &FlowOptions { max_step: o.primitive_period / 400.0, ..*opts })?;
    let lifts = group.elements.iter().map(|g| symplectic_lift(g).map(|l| l.matrix)).collect::<Result<Vec<_>>>()?;
    for (a, m) in lifts.iter().enumerate().skip(1) {
        if track.states.iter().any(|z| (m * z - z).norm() <= 1e-8 * scale) {
            return Err(Error::NonFreeAction { element: a });
        }
    }
    let (zt, f, action) = flow_end(model, &o.z0, period, opts)?;
    let z0 = nalgebra::DVector::from_column_slice(&o.z0);
    let g = *o
        .stabilizer
        .iter()
        .min_by(|a, b| {
            let da = (&lifts[**a] * &zt - &z0).norm();
            let db = (&lifts[**b] * &zt - &z0).norm();
            da.partial_cmp(&db).unwrap()
        })
        .expect("stabilizer contains the identity");
    let closing = (&lifts[g] * &zt - &z0).norm();
    if closing > 1e-7 * scale {
        return Err(Error::ClassificationMismatch {
            reduced: format!("no stabilizer element closes the orbit at T*/{stab} (gap {closing:e})"),
            direct: format!("T* = {}", o.primitive_period),
        });
    }
    let (sigma, _) = maslov_index(model, &o.z0, period, &lifts[g], opts)?;
    Ok(ReducedOrbit { orbit_class: o.orbit_class, g, period, action, sigma, monodromy: &lifts[g] * f })
}

/// `d_χ ψ(E) Σ_γ̄ Σ_n f̂(nT̄) χ̄(g_γ̄ⁿ) e^{inS̄/h} T̄ e^{iπnσ̄/2} / (2π|det((dP̄)ⁿ − I)|^{1/2})`,
/// built from the quotient orbits alone.
pub fn reduced_sum_only(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    chi: usize,
    orbits: &[TwistedOrbit],
    windows: &WindowPair,
    e: f64,
    h: f64,
) -> Result<Complex64> {
    check_oscillating_regime(windows)?;
    let dchi = character(group, chi)?;
    let opts = FlowOptions::default();
    let mut classes: Vec<usize> = orbits.iter().map(|o| o.orbit_class).collect();
    classes.sort_unstable();
    classes.dedup();
    let (_, t_hi) = windows.fhat_support();
    let mut total = Complex64::default();
    for class in classes {
        let o = orbits.iter().find(|o| o.orbit_class == class).expect("class has an entry");
        let r = reduce_orbit(model, group, o, &opts)?;
        let mut power = r.monodromy.clone();
        let mut n = 1usize;
        while n as f64 * r.period < t_hi {
            let t = n as f64 * r.period;
            let fhat = windows.fhat_bump(t);
            if fhat != 0.0 {
                let (d, _) = reduced_determinant_of(&power)?;
                let gn = group.power(r.g, n as i64);
                let phase = n as f64 * r.action / h + std::f64::consts::FRAC_PI_2 * (n as i64 * r.sigma) as f64;
                total += group.chi(chi, gn).conj()
                    * Complex64::from_polar(1.0, phase)
                    * (dchi * windows.psi(e) * fhat * r.period / (std::f64::consts::TAU * d.abs().sqrt()));
            }
            power = &power * &r.monodromy;
            n += 1;
        }
    }
    Ok(finish(windows, total))
}

/// Quotient assembly, checked against the per-element assembly on the same
/// database.
pub fn reduced_sum(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    chi: usize,
    orbits: &[TwistedOrbit],
    windows: &WindowPair,
    e: f64,
    h: f64,
) -> Result<Complex64> {
    let reduced = reduced_sum_only(model, group, chi, orbits, windows, e, h)?;
    let direct = oscillating_sum(group, chi, orbits, windows, e, h)?;
    let scale = reduced.norm().max(direct.norm());
    if (reduced - direct).norm() > DUAL_TOL * scale {
        return Err(Error::ClassificationMismatch { reduced: format!("{reduced}"), direct: format!("{direct}") });
    }
    Ok(reduced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdyn::{find_twisted_orbits, OrbitSearchSpec};
    use crate::par::Execution;
    use crate::qspec::build_windows;
    use crate::symgroup::catalog_group;
    use std::f64::consts::PI;

    fn harmonic_db(window: (f64, f64)) -> (ModelHamiltonian, FiniteGroupRep, Vec<TwistedOrbit>) {
        let m = ModelHamiltonian::from_name("harmonic", Some(1), &[]).unwrap();
        let g = catalog_group("z2", 1).unwrap();
        let spec = OrbitSearchSpec { seed_count: 4, ..OrbitSearchSpec::new(1.0, window) };
        let db = find_twisted_orbits(&m, &g, &spec, Execution::Parallel).unwrap();
        (m, g, db.orbits)
    }

    #[test]
    fn parity_term_closed_form() {
        let (_, g, orbits) = harmonic_db((0.5, 2.5));
        let w = build_windows(1.0, 0.1, 0.5, PI / 2.0 + 0.1, 0.6, 0.002).unwrap();
        let h = 0.1;
        let plus = oscillating_sum(&g, 0, &orbits, &w, 1.0, h).unwrap();
        let minus = oscillating_sum(&g, 1, &orbits, &w, 1.0, h).unwrap();
        let modulus = PI * w.fhat(PI / 2.0) / (2.0 * std::f64::consts::TAU);
        assert!((plus.norm() - modulus).abs() < 1e-12);
        assert!((plus + minus).norm() < 1e-14);
        // Poisson summation of the even levels h(4k + 1): the parity part is
        // ½ · ½ e^{−iπ/2} e^{iπE/2h} f̂(π/2)
        let exact = Complex64::from_polar(0.25 * w.fhat(PI / 2.0), PI / (2.0 * h) - PI / 2.0);
        assert!((plus - exact).norm() < 1e-10 * exact.norm());
    }

    #[test]
    fn empty_support_is_zero() {
        let (_, g, orbits) = harmonic_db((0.5, 2.5));
        let w = build_windows(1.0, 0.1, 0.5, 1.0, 0.3, 0.002).unwrap();
        assert_eq!(oscillating_sum(&g, 0, &orbits, &w, 1.0, 0.1).unwrap(), Complex64::default());
    }

    #[test]
    fn dual_assembly_harmonic() {
        let (m, g, orbits) = harmonic_db((0.5, 3.5));
        let w = build_windows(1.0, 0.1, 0.5, 2.4, 1.3, 0.002).unwrap();
        for chi in 0..2 {
            for h in [0.2, 0.05] {
                let a = reduced_sum_only(&m, &g, chi, &orbits, &w, 1.0, h).unwrap();
                let b = oscillating_sum(&g, chi, &orbits, &w, 1.0, h).unwrap();
                assert!((a - b).norm() <= DUAL_TOL * a.norm().max(b.norm()), "{a} {b}");
                assert!(a.norm() > 0.0);
            }
        }
    }

    #[test]
    fn zero_in_support_is_rejected() {
        let (_, g, orbits) = harmonic_db((0.5, 2.5));
        let w = build_windows(1.0, 0.1, 0.5, 0.0, 0.6, 0.002).unwrap();
        assert!(matches!(oscillating_sum(&g, 0, &orbits, &w, 1.0, 0.1), Err(Error::RegimeViolation(_))));
    }
}
