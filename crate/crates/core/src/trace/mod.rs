//! Semiclassical side of the sector trace: Weyl terms, the counting law and
//! orbit sums, assembled with character weights `(d_χ/|G|) χ̄(g)`.

mod oscillating;
mod weyl;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use oscillating::{
    oscillating_sum, oscillating_terms, reduce_orbit, reduced_sum, reduced_sum_only, ReducedOrbit, DUAL_TOL,
};
pub use weyl::{
    fixed_set_data, liouville_factor, weyl_counting, weyl_term, CountPrediction, FixedSetData, LiouvilleEstimate,
    LiouvilleOptions, MC_REL_LIMIT,
};

use crate::cdyn::OrbitDatabase;
use crate::error::{Error, Result};
use crate::models::ModelHamiltonian;
use crate::par::Execution;
use crate::qspec::WindowPair;
use crate::symgroup::FiniteGroupRep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Weyl,
    Oscillating,
}

/// `amplitude · h^{h_power} · e^{i action/h}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalTerm {
    pub kind: TermKind,
    pub g: usize,
    /// Index into the orbit list, for oscillating terms.
    pub orbit: Option<usize>,
    pub amplitude: Complex64,
    pub action: Option<f64>,
    pub h_power: f64,
}

impl SemiclassicalTerm {
    pub fn value(&self, h: f64) -> Complex64 {
        let phase = self.action.map_or(Complex64::new(1.0, 0.0), |s| Complex64::from_polar(1.0, s / h));
        self.amplitude * h.powf(self.h_power) * phase
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Weyl,
    Oscillating,
}

/// Semiclassical `G_χ(h)` split into its smooth and oscillating parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub total: Complex64,
    pub weyl: Complex64,
    pub oscillating: Complex64,
}

/// Weyl terms per conjugacy class, computed once and reused across `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylTerms {
    /// `(class size, term)` per conjugacy class.
    pub classes: Vec<(usize, SemiclassicalTerm)>,
}

impl WeylTerms {
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        model: &ModelHamiltonian,
        group: &FiniteGroupRep,
        windows: &WindowPair,
        lambda: f64,
        orbits: Option<&OrbitDatabase>,
        liouville: &LiouvilleOptions,
        exec: Execution,
    ) -> Result<Self> {
        let mut classes = Vec::new();
        for class in &group.classes {
            let t = weyl_term(model, group, class[0], windows, lambda, orbits, liouville, exec)?;
            classes.push((class.len(), t));
        }
        Ok(Self { classes })
    }

    /// `(d_χ/|G|) Σ_g χ̄(g) I_g(h)`
    pub fn density(&self, group: &FiniteGroupRep, chi: usize, h: f64) -> Complex64 {
        let w = group.degree(chi) as f64 / group.order() as f64;
        self.classes.iter().map(|(n, t)| group.chi(chi, t.g).conj() * t.value(h) * (w * *n as f64)).sum()
    }
}

/// Checks that the orbit search window covers the support of `f̂`.
pub fn check_coverage(windows: &WindowPair, db: &OrbitDatabase) -> Result<()> {
    let (a, b) = windows.fhat_support();
    let (lo, hi) = db.spec.t_window;
    if a.max(0.0) < lo || b > hi {
        return Err(Error::MissingOrbitCoverage(format!(
            "orbit search window ({lo}, {hi}) does not cover the support ({a}, {b}) of f̂"
        )));
    }
    Ok(())
}

/// Dispatches to the Weyl or the orbit assembly.
///
/// In Weyl mode `weyl` must hold precomputed terms; in oscillating mode the
/// orbit database must cover the support of `f̂`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_density(
    group: &FiniteGroupRep,
    chi: usize,
    e: f64,
    h: f64,
    windows: &WindowPair,
    orbit_db: &OrbitDatabase,
    mode: Mode,
    weyl: Option<&WeylTerms>,
) -> Result<Density> {
    if chi >= group.characters.len() {
        return Err(Error::UnknownCharacter(chi));
    }
    match mode {
        Mode::Weyl => {
            weyl::check_weyl_regime(windows, Some(orbit_db))?;
            let terms = weyl.ok_or_else(|| Error::Config("Weyl mode needs precomputed Weyl terms".into()))?;
            let v = terms.density(group, chi, h);
            Ok(Density { total: v, weyl: v, oscillating: Complex64::default() })
        }
        Mode::Oscillating => {
            oscillating::check_oscillating_regime(windows)?;
            check_coverage(windows, orbit_db)?;
            let v = oscillating_sum(group, chi, &orbit_db.orbits, windows, e, h)?;
            Ok(Density { total: v, weyl: Complex64::default(), oscillating: v })
        }
    }
}

/// One comparison row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub h: f64,
    pub e: f64,
    pub chi: usize,
    pub quantum: Complex64,
    pub semi: Complex64,
    pub weyl: Complex64,
    pub oscillating: Complex64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl TraceRow {
    pub fn new(h: f64, e: f64, chi: usize, quantum: Complex64, d: Density) -> Self {
        let abs_err = (quantum - d.total).norm();
        let scale = quantum.norm().max(d.total.norm());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        Self { h, e, chi, quantum, semi: d.total, weyl: d.weyl, oscillating: d.oscillating, abs_err, rel_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub rows: Vec<TraceRow>,
    pub metadata: std::collections::BTreeMap<String, String>,
}

impl TraceReport {
    /// Rows sorted by `h` descending, then by character.
    pub fn new(mut rows: Vec<TraceRow>, metadata: std::collections::BTreeMap<String, String>) -> Self {
        rows.sort_by(|a, b| b.h.partial_cmp(&a.h).unwrap().then(a.chi.cmp(&b.chi)));
        Self { rows, metadata }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdyn::{find_twisted_orbits, OrbitSearchSpec};
    use crate::qspec::build_windows;
    use crate::symgroup::catalog_group;

    #[test]
    fn empty_database_gives_zero() {
        let g = catalog_group("z2", 1).unwrap();
        let w = build_windows(1.0, 0.1, 0.5, 1.6, 0.6, 0.002).unwrap();
        let db = OrbitDatabase {
            model: "harmonic".into(),
            group: "z2".into(),
            spec: OrbitSearchSpec::new(1.0, (0.5, 2.5)),
            orbits: vec![],
            failures: 0,
            warnings: vec![],
        };
        let d = assemble_density(&g, 0, 1.0, 0.1, &w, &db, Mode::Oscillating, None).unwrap();
        assert_eq!(d.total, Complex64::default());
        let narrow = OrbitDatabase { spec: OrbitSearchSpec::new(1.0, (1.5, 2.0)), ..db };
        assert!(matches!(
            assemble_density(&g, 0, 1.0, 0.1, &w, &narrow, Mode::Oscillating, None),
            Err(Error::MissingOrbitCoverage(_))
        ));
    }

    #[test]
    fn character_sum_keeps_identity_term() {
        // Σ_χ d_χ G_χ only sees g = Id by column orthogonality
        let m = ModelHamiltonian::from_name("harmonic", Some(1), &[]).unwrap();
        let g = catalog_group("z2", 1).unwrap();
        let spec = OrbitSearchSpec { seed_count: 4, ..OrbitSearchSpec::new(1.0, (0.5, 4.0)) };
        let db = find_twisted_orbits(&m, &g, &spec, Execution::Parallel).unwrap();
        let w = build_windows(1.0, 0.1, 0.5, 2.4, 1.3, 0.002).unwrap();
        let h = 0.07;
        let total: Complex64 = (0..g.characters.len())
            .map(|chi| assemble_density(&g, chi, 1.0, h, &w, &db, Mode::Oscillating, None).unwrap().total * g.degree(chi) as f64)
            .sum();
        let id_only: Vec<_> = db.orbits.iter().filter(|o| o.g == 0).cloned().collect();
        let trivial = catalog_group("trivial", 1).unwrap();
        let direct = oscillating_sum(&trivial, 0, &id_only, &w, 1.0, h).unwrap();
        assert!((total - direct).norm() <= 1e-10 * direct.norm(), "{total} {direct}");
    }

    #[test]
    fn weyl_mode_trivial_group() {
        let m = ModelHamiltonian::from_name("harmonic", Some(1), &[]).unwrap();
        let g = catalog_group("trivial", 1).unwrap();
        let w = build_windows(1.0, 0.1, 0.5, 0.0, 0.5, 0.002).unwrap();
        let opts = LiouvilleOptions { mc_samples: 200_000, ..LiouvilleOptions::default() };
        let terms = WeylTerms::compute(&m, &g, &w, 1.0, None, &opts, Execution::Parallel).unwrap();
        let db = OrbitDatabase {
            model: "harmonic".into(),
            group: "trivial".into(),
            spec: OrbitSearchSpec::new(1.0, (0.0, 0.0)),
            orbits: vec![],
            failures: 0,
            warnings: vec![],
        };
        let d = assemble_density(&g, 0, 1.0, 0.1, &w, &db, Mode::Weyl, Some(&terms)).unwrap();
        assert_eq!(d.total, terms.classes[0].1.value(0.1));
    }
}
