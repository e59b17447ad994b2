//! Group action on grid functions, sector projectors and classification of
//! eigenvalue clusters by character.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::EigenPair;
use super::operator::Grid;
use crate::error::{Error, Result};
use crate::symgroup::{projector_weights, FiniteGroupRep};

/// `(M̃(g) f)(x_i) = f(g⁻¹ x_i)` on grid values.
#[derive(Debug, Clone)]
pub enum GridAction {
    /// `out[i] = f[perm[i]]`
    Permutation(Vec<usize>),
    /// Linear/bilinear interpolation; off-grid neighbours count as zero.
    Interpolation { rows: Vec<Vec<(usize, f64)>>, unitarity_deviation: f64 },
}

impl GridAction {
    pub fn is_exact(&self) -> bool {
        matches!(self, GridAction::Permutation(_))
    }

    pub fn unitarity_deviation(&self) -> f64 {
        match self {
            GridAction::Permutation(_) => 0.0,
            GridAction::Interpolation { unitarity_deviation, .. } => *unitarity_deviation,
        }
    }

    pub fn apply<T: Copy + Default + std::ops::Mul<f64, Output = T> + std::ops::AddAssign>(&self, f: &[T], out: &mut [T]) {
        match self {
            GridAction::Permutation(p) => {
                for (o, &j) in out.iter_mut().zip(p) {
                    *o = f[j];
                }
            }
            GridAction::Interpolation { rows, .. } => {
                for (o, row) in out.iter_mut().zip(rows) {
                    let mut acc = T::default();
                    for &(j, w) in row {
                        acc += f[j] * w;
                    }
                    *o = acc;
                }
            }
        }
    }

    fn apply_transpose(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self {
            GridAction::Permutation(p) => {
                for (i, &j) in p.iter().enumerate() {
                    out[j] += f[i];
                }
            }
            GridAction::Interpolation { rows, .. } => {
                for (i, row) in rows.iter().enumerate() {
                    for &(j, w) in row {
                        out[j] += w * f[i];
                    }
                }
            }
        }
    }
}

pub fn grid_action(g: &DMatrix<f64>, grid: &Grid) -> Result<GridAction> {
    if g.nrows() != grid.dim {
        return Err(Error::DimensionMismatch { expected: grid.dim, got: g.nrows() });
    }
    let dx = grid.spacing();
    let l = grid.half_width;
    let n = grid.n;
    let g_inv = g.transpose();
    let len = grid.len();
    let mut fractional = Vec::with_capacity(len);
    let mut exact = true;
    for idx in 0..len {
        let x = nalgebra::DVector::from_vec(grid.point(idx));
        let y = &g_inv * x;
        let u: Vec<f64> = y.iter().map(|c| (c + l) / dx - 1.0).collect();
        if u.iter().any(|c| (c - c.round()).abs() > 1e-9 || c.round() < 0.0 || c.round() > (n - 1) as f64) {
            exact = false;
        }
        fractional.push(u);
    }
    if exact {
        let perm = fractional
            .iter()
            .map(|u| {
                let mut ij = [0usize; 2];
                for (a, c) in u.iter().enumerate() {
                    ij[a] = c.round() as usize;
                }
                grid.flatten(ij)
            })
            .collect();
        return Ok(GridAction::Permutation(perm));
    }
    let rows: Vec<Vec<(usize, f64)>> = fractional
        .iter()
        .map(|u| {
            let mut row = Vec::new();
            let base: Vec<f64> = u.iter().map(|c| c.floor()).collect();
            let corners = 1usize << grid.dim;
            for corner in 0..corners {
                let mut w = 1.0;
                let mut ij = [0usize; 2];
                let mut inside = true;
                for a in 0..grid.dim {
                    let up = (corner >> a) & 1 == 1;
                    let t = u[a] - base[a];
                    let k = base[a] + if up { 1.0 } else { 0.0 };
                    w *= if up { t } else { 1.0 - t };
                    if k < 0.0 || k > (n - 1) as f64 {
                        inside = false;
                    } else {
                        ij[a] = k as usize;
                    }
                }
                if inside && w.abs() > 1e-15 {
                    row.push((grid.flatten(ij), w));
                }
            }
            row
        })
        .collect();
    let mut action = GridAction::Interpolation { rows, unitarity_deviation: 0.0 };
    let dev = unitarity_deviation(&action, len);
    if let GridAction::Interpolation { unitarity_deviation, .. } = &mut action {
        *unitarity_deviation = dev;
    }
    Ok(action)
}

/// `‖PᵀP − I‖₂` by power iteration.
fn unitarity_deviation(action: &GridAction, len: usize) -> f64 {
    let mut v: Vec<f64> = (0..len).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let mut pv = vec![0.0; len];
    let mut ptpv = vec![0.0; len];
    let mut estimate = 0.0;
    for _ in 0..60 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        action.apply(&v, &mut pv);
        action.apply_transpose(&pv, &mut ptpv);
        for (y, x) in ptpv.iter_mut().zip(&v) {
            *y -= x;
        }
        estimate = ptpv.iter().map(|x| x * x).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut ptpv);
    }
    estimate
}

pub fn grid_actions(group: &FiniteGroupRep, grid: &Grid) -> Result<Vec<GridAction>> {
    group.elements.iter().map(|g| grid_action(g, grid)).collect()
}

/// `P_χ = (d_χ/|G|) Σ_g conj χ(g) M̃(g)` as an operator on grid vectors.
#[derive(Debug, Clone)]
pub struct SectorProjector {
    pub chi: usize,
    pub weights: Vec<Complex64>,
    pub actions: Vec<GridAction>,
    /// False when some element needed interpolation.
    pub exact: bool,
}

pub fn sector_projector(group: &FiniteGroupRep, chi: usize, grid: &Grid) -> Result<SectorProjector> {
    let weights = projector_weights(group, chi)?.weights;
    let actions = grid_actions(group, grid)?;
    let exact = actions.iter().all(GridAction::is_exact);
    Ok(SectorProjector { chi, weights, actions, exact })
}

impl SectorProjector {
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); f.len()];
        let mut tmp = vec![Complex64::default(); f.len()];
        for (w, a) in self.weights.iter().zip(&self.actions) {
            a.apply(f, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += w * t;
            }
        }
        out
    }

    /// Dense matrix, for small grids.
    pub fn dense(&self, len: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(len, len);
        let mut e = vec![Complex64::default(); len];
        for j in 0..len {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            for i in 0..len {
                m[(i, j)] = col[i];
            }
            e[j] = Complex64::default();
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SectorLevel {
    pub energy: f64,
    pub multiplicity: usize,
    pub residual: f64,
}

/// Eigenvalues of `Ĥ_χ` found in `window`, with multiplicities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorSpectrum {
    pub chi: usize,
    pub degree: usize,
    pub levels: Vec<SectorLevel>,
    /// Energy window that was fully resolved.
    pub window: (f64, f64),
    pub h: f64,
    /// Largest distance of a cluster projector trace from an integer.
    pub max_trace_defect: f64,
    /// Levels whose multiplicity is not a multiple of `degree`.
    pub non_multiples: usize,
    pub exact_action: bool,
}

pub const DEGEN_TOL: f64 = 1e-7;
pub const TRACE_TOL: f64 = 1e-3;

/// Cluster eigenvalues within `degen_tol·max(|E|, 1)` and split each cluster
/// over sectors by `tr(P_χ |cluster)`.
pub fn classify_sectors(
    pairs: &[EigenPair],
    group: &FiniteGroupRep,
    actions: &[GridAction],
    degen_tol: f64,
    window: (f64, f64),
    h: f64,
) -> Result<Vec<SectorSpectrum>> {
    let nchi = group.characters.len();
    let exact = actions.iter().all(GridAction::is_exact);
    let mut spectra: Vec<SectorSpectrum> = (0..nchi)
        .map(|chi| SectorSpectrum {
            chi,
            degree: group.degree(chi),
            levels: Vec::new(),
            window,
            h,
            max_trace_defect: 0.0,
            non_multiples: 0,
            exact_action: exact,
        })
        .collect();
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len()
            && pairs[end].value - pairs[end - 1].value <= degen_tol * pairs[end].value.abs().max(1.0)
        {
            end += 1;
        }
        let cluster = &pairs[start..end];
        let energy = cluster.iter().map(|p| p.value).sum::<f64>() / cluster.len() as f64;
        let residual = cluster.iter().map(|p| p.residual).fold(0.0, f64::max);
        // t_g = Σ_k ⟨v_k, M̃(g) v_k⟩
        let len = cluster[0].vector.len();
        let mut image = vec![0.0; len];
        let traces: Vec<f64> = actions
            .iter()
            .map(|a| {
                cluster
                    .iter()
                    .map(|p| {
                        a.apply(&p.vector, &mut image);
                        p.vector.iter().zip(&image).map(|(x, y)| x * y).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let mut total = 0usize;
        for chi in 0..nchi {
            let scale = group.degree(chi) as f64 / group.order() as f64;
            let tr: Complex64 =
                traces.iter().enumerate().map(|(g, t)| group.chi(chi, g).conj() * *t).sum::<Complex64>() * scale;
            let rounded = tr.re.round();
            let defect = (tr.re - rounded).abs().max(tr.im.abs());
            if defect > TRACE_TOL || rounded < 0.0 {
                return Err(Error::SectorLeak { energy, chi, trace: tr.re });
            }
            let spec = &mut spectra[chi];
            spec.max_trace_defect = spec.max_trace_defect.max(defect);
            let mult = rounded as usize;
            total += mult;
            if mult > 0 {
                if !mult.is_multiple_of(spec.degree) {
                    spec.non_multiples += 1;
                }
                spec.levels.push(SectorLevel { energy, multiplicity: mult, residual });
            }
        }
        if total != cluster.len() {
            return Err(Error::SectorLeak { energy, chi: usize::MAX, trace: total as f64 });
        }
        start = end;
    }
    Ok(spectra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelHamiltonian;
    use crate::par::Execution;
    use crate::qspec::{build_grid, discretize, eigensolve};
    use crate::symgroup::catalog_group;

    #[test]
    fn parity_is_reversal() {
        let g = catalog_group("z2", 1).unwrap();
        let grid = build_grid(1, 2.0, 20).unwrap();
        match grid_action(&g.elements[1], &grid).unwrap() {
            GridAction::Permutation(p) => assert_eq!(p, (0..20).rev().collect::<Vec<_>>()),
            _ => panic!("parity must be exact"),
        }
    }

    #[test]
    fn quarter_turn_is_a_permutation_and_third_turn_is_not() {
        let grid = build_grid(2, 2.0, 17).unwrap();
        let d4 = catalog_group("dihedral4", 2).unwrap();
        assert!(grid_actions(&d4, &grid).unwrap().iter().all(GridAction::is_exact));
        let d3 = catalog_group("dihedral3", 2).unwrap();
        let acts = grid_actions(&d3, &grid).unwrap();
        assert!(acts.iter().any(|a| !a.is_exact()));
        assert!(acts.iter().any(|a| a.unitarity_deviation() > 0.0));
    }

    #[test]
    fn parity_projector_averages() {
        let g = catalog_group("z2", 1).unwrap();
        let grid = build_grid(1, 2.0, 16).unwrap();
        let p = sector_projector(&g, 0, &grid).unwrap();
        let f: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let pf = p.apply(&f);
        for i in 0..16 {
            assert!((pf[i].re - 0.5 * (f[i].re + f[15 - i].re)).abs() < 1e-13);
        }
    }

    #[test]
    fn trivial_group_projector_is_identity() {
        let g = catalog_group("trivial", 1).unwrap();
        let grid = build_grid(1, 2.0, 16).unwrap();
        let p = sector_projector(&g, 0, &grid).unwrap().dense(16);
        assert!((p - DMatrix::<Complex64>::identity(16, 16)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn harmonic_parity_classification() {
        let m = ModelHamiltonian::from_name("harmonic", Some(1), &[]).unwrap();
        let grid = build_grid(1, 6.0, 600).unwrap();
        let op = discretize(&m, &grid, 0.1, 4, None).unwrap();
        let pairs = eigensolve(&op, 0.0, 1.0, Execution::Sequential).unwrap();
        let g = catalog_group("z2", 1).unwrap();
        let acts = grid_actions(&g, &grid).unwrap();
        let s = classify_sectors(&pairs, &g, &acts, DEGEN_TOL, (0.0, 1.0), 0.1).unwrap();
        let even: Vec<f64> = s[0].levels.iter().map(|l| l.energy).collect();
        let odd: Vec<f64> = s[1].levels.iter().map(|l| l.energy).collect();
        assert!((even[0] - 0.1).abs() < 1e-5 && (odd[0] - 0.3).abs() < 1e-5);
        assert_eq!(even.len() + odd.len(), 5);
    }

    #[test]
    fn isotropic_pair_lands_in_two_dim_irrep() {
        let m = ModelHamiltonian::from_name("harmonic", Some(2), &[]).unwrap();
        let grid = build_grid(2, 5.0, 64).unwrap();
        let op = discretize(&m, &grid, 0.1, 8, None).unwrap();
        let pairs = eigensolve(&op, 0.0, 0.5, Execution::Sequential).unwrap();
        let g = catalog_group("dihedral4", 2).unwrap();
        let acts = grid_actions(&g, &grid).unwrap();
        let s = classify_sectors(&pairs, &g, &acts, DEGEN_TOL, (0.0, 0.5), 0.1).unwrap();
        let two = s.iter().find(|sp| sp.degree == 2).unwrap();
        assert_eq!(two.levels.len(), 1);
        assert_eq!(two.levels[0].multiplicity, 2);
        assert!((two.levels[0].energy - 0.4).abs() < 1e-3);
        assert_eq!(s[0].levels.len(), 1);
    }
}
