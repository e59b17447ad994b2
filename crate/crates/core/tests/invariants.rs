//! Property tests for the structural invariants.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use symtrace::cdyn::{
    find_twisted_orbits, flow, flow_end, maslov_index, reduced_determinant_of, twisted_residual, FlowOptions,
    OrbitDatabase, OrbitSearchSpec,
};
use symtrace::models::ModelHamiltonian;
use symtrace::qspec::{
    build_grid, build_windows, classify_sectors, discretize, eigensolve, grid_actions, sector_projector,
    spectral_density,
};
use symtrace::symgroup::{catalog_group, standard_symplectic, symplectic_lift, FiniteGroupRep};
use symtrace::Execution;

fn square_xy() -> (ModelHamiltonian, FiniteGroupRep) {
    (ModelHamiltonian::from_name("square_xy", Some(2), &[0.5]).unwrap(), catalog_group("dihedral4", 2).unwrap())
}

fn lift(g: &FiniteGroupRep, k: usize) -> DMatrix<f64> {
    symplectic_lift(&g.elements[k]).unwrap().matrix
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn monodromy_stays_symplectic(
        q in prop::array::uniform2(-1.2f64..1.2),
        p in prop::array::uniform2(-1.0f64..1.0),
        t in 0.1f64..3.0,
    ) {
        let m = ModelHamiltonian::from_name("quartic", Some(2), &[0.5]).unwrap();
        let (_, f, _) = flow_end(&m, &[q[0], q[1], p[0], p[1]], t, &FlowOptions::default()).unwrap();
        let j = standard_symplectic(2);
        let defect = (f.transpose() * &j * &f - j).amax();
        prop_assert!(defect <= 1e-8, "{defect}");
    }

    #[test]
    fn flow_commutes_with_the_group(
        q in prop::array::uniform2(-1.5f64..1.5),
        p in prop::array::uniform2(-1.0f64..1.0),
        t in 0.1f64..2.5,
        k in 0usize..8,
    ) {
        let (m, g) = square_xy();
        let z = DVector::from_column_slice(&[q[0], q[1], p[0], p[1]]);
        let l = lift(&g, k);
        let opts = FlowOptions::default();
        let (a, _, sa) = flow_end(&m, (&l * &z).as_slice(), t, &opts).unwrap();
        let (b, _, sb) = flow_end(&m, z.as_slice(), t, &opts).unwrap();
        prop_assert!((a - &l * b).amax() <= 1e-8);
        prop_assert!((sa - sb).abs() <= 1e-8);
    }

    #[test]
    fn energy_is_conserved(q in -1.6f64..1.6, p in -1.5f64..1.5, t in 0.1f64..4.0) {
        let m = ModelHamiltonian::from_name("double_well", Some(1), &[]).unwrap();
        let r = flow(&m, &[q, p], t, &FlowOptions::default()).unwrap();
        prop_assert!(r.energy_drift <= 1e-9);
    }

    #[test]
    fn projectors_resolve_identity(values in prop::collection::vec(-1.0f64..1.0, 256), k in 0usize..8) {
        let (_, g) = square_xy();
        let grid = build_grid(2, 1.0, 16).unwrap();
        let f: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.5 * x)).collect();
        let mut sum = vec![Complex64::default(); f.len()];
        for chi in 0..g.characters.len() {
            let p = sector_projector(&g, chi, &grid).unwrap();
            let pf = p.apply(&f);
            // P_χ commutes with the group action
            let act = &p.actions[k];
            let mut a = vec![Complex64::default(); f.len()];
            act.apply(&pf, &mut a);
            let mut gf = vec![Complex64::default(); f.len()];
            act.apply(&f, &mut gf);
            let b = p.apply(&gf);
            let d = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(d <= 1e-12);
            for (s, v) in sum.iter_mut().zip(&pf) {
                *s += v;
            }
        }
        let d = sum.iter().zip(&f).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-12);
    }
}

// A twisted orbit for g and its image under b solve the problem for b g b⁻¹
// with the same period, action, index and determinant.
fn orbit_db() -> &'static (ModelHamiltonian, FiniteGroupRep, OrbitDatabase) {
    static DB: OnceLock<(ModelHamiltonian, FiniteGroupRep, OrbitDatabase)> = OnceLock::new();
    DB.get_or_init(|| {
        let (m, g) = square_xy();
        let spec = OrbitSearchSpec { seed_count: 8, ..OrbitSearchSpec::new(1.0, (0.5, 3.0)) };
        let db = find_twisted_orbits(&m, &g, &spec, Execution::Parallel).unwrap();
        (m, g, db)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn conjugate_orbits_share_invariants(pick in 0usize..1000, b in 0usize..8) {
        let (m, g, db) = orbit_db();
        prop_assume!(!db.orbits.is_empty());
        let o = &db.orbits[pick % db.orbits.len()];
        let opts = FlowOptions::default();
        let conj = g.conjugate(b, o.g);
        let lb = lift(g, b);
        let z = &lb * DVector::from_column_slice(&o.z0);
        let (psi, _) = twisted_residual(m, &lift(g, conj), o.t0, z.as_slice(), &opts).unwrap();
        prop_assert!(psi.norm() <= 1e-8, "{}", psi.norm());
        let (_, f, action) = flow_end(m, z.as_slice(), o.t0, &opts).unwrap();
        prop_assert!((action - o.action).abs() <= 1e-8);
        let (sigma, _) = maslov_index(m, z.as_slice(), o.t0, &lift(g, conj), &opts).unwrap();
        prop_assert_eq!(sigma, o.sigma);
        if let Some(d) = o.d_red {
            let (dc, _) = reduced_determinant_of(&(lift(g, conj) * f)).unwrap();
            prop_assert!((dc - d).abs() <= 1e-6 * d.abs().max(1.0), "{dc} {d}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    // Σ_χ G_χ is the density of the full operator.
    #[test]
    fn sector_densities_add_up(h in 0.05f64..0.2, t_c in 1.2f64..2.0) {
        let m = ModelHamiltonian::from_name("double_well", Some(1), &[]).unwrap();
        let grid = build_grid(1, 3.0, 1500).unwrap();
        let op = discretize(&m, &grid, h, 8, Some(2.5)).unwrap();
        let window = (1.5, 2.5);
        let pairs = eigensolve(&op, window.0, window.1, Execution::Parallel).unwrap();
        let w = build_windows(2.0, 0.1, 0.4, t_c, 0.5, 0.002).unwrap();
        let mut sum = Complex64::default();
        let z2 = catalog_group("z2", 1).unwrap();
        for s in classify_sectors(&pairs, &z2, &grid_actions(&z2, &grid).unwrap(), 1e-7, window, h).unwrap() {
            sum += spectral_density(&s, &w, 2.0, h).unwrap();
        }
        let trivial = catalog_group("trivial", 1).unwrap();
        let all = classify_sectors(&pairs, &trivial, &grid_actions(&trivial, &grid).unwrap(), 1e-7, window, h).unwrap();
        let full = spectral_density(&all[0], &w, 2.0, h).unwrap();
        prop_assert!((sum - full).norm() <= 1e-10 * full.norm().max(1e-3));
    }
}
