use nalgebra::DMatrix;
use num_complex::Complex64;

use super::FiniteGroupRep;
use crate::error::{Error, Result};

/// Phase-space action `M(g)(x, ξ) = (g x, ᵗg⁻¹ ξ)`.
#[derive(Debug, Clone)]
pub struct SymplecticLift {
    pub matrix: DMatrix<f64>,
}

/// `J = [[0, I], [-I, 0]]` on `R^{2d}`.
pub fn standard_symplectic(d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    j
}

pub fn symplectic_lift(g: &DMatrix<f64>) -> Result<SymplecticLift> {
    let d = g.nrows();
    let det = g.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::SingularGenerator { index: 0, det });
    }
    let inv_t = g.clone().try_inverse().ok_or(Error::SingularGenerator { index: 0, det })?.transpose();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(g);
    m.view_mut((d, d), (d, d)).copy_from(&inv_t);
    Ok(SymplecticLift { matrix: m })
}

impl SymplecticLift {
    /// `‖ᵗM J M − J‖∞`
    pub fn symplectic_residual(&self) -> f64 {
        let j = standard_symplectic(self.matrix.nrows() / 2);
        let r = self.matrix.transpose() * &j * &self.matrix - j;
        r.amax()
    }
}

/// Weights `(d_χ/|G|) conj(χ(g))` of the sector projector.
#[derive(Debug, Clone)]
pub struct ProjectorWeights {
    pub chi: usize,
    pub weights: Vec<Complex64>,
}

pub fn projector_weights(group: &FiniteGroupRep, chi: usize) -> Result<ProjectorWeights> {
    if chi >= group.characters.len() {
        return Err(Error::UnknownCharacter(chi));
    }
    let scale = group.degree(chi) as f64 / group.order() as f64;
    let weights = (0..group.order()).map(|g| group.chi(chi, g).conj() * scale).collect();
    Ok(ProjectorWeights { chi, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symgroup::catalog_group;

    #[test]
    fn lift_of_minus_identity() {
        let m = symplectic_lift(&DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert_eq!(m.matrix, -DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn lift_of_rotation_is_block_rotation() {
        let t = 0.7f64;
        let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let m = symplectic_lift(&r).unwrap();
        let mut expect = DMatrix::zeros(4, 4);
        expect.view_mut((0, 0), (2, 2)).copy_from(&r);
        expect.view_mut((2, 2), (2, 2)).copy_from(&r);
        assert!((m.matrix - expect).amax() < 1e-15);
    }

    #[test]
    fn lift_is_symplectic_for_catalog_groups() {
        for name in ["dihedral3", "dihedral4", "swap2"] {
            let g = catalog_group(name, 2).unwrap();
            for e in &g.elements {
                assert!(symplectic_lift(e).unwrap().symplectic_residual() <= 1e-13);
            }
        }
    }

    #[test]
    fn singular_lift_rejected() {
        assert!(symplectic_lift(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn parity_weights() {
        let g = catalog_group("z2", 1).unwrap();
        let plus = projector_weights(&g, 0).unwrap();
        let minus = projector_weights(&g, 1).unwrap();
        assert!((plus.weights[0] - 0.5).norm() < 1e-15 && (plus.weights[1] - 0.5).norm() < 1e-15);
        assert!((minus.weights[0] - 0.5).norm() < 1e-15 && (minus.weights[1] + 0.5).norm() < 1e-15);
        assert!(matches!(projector_weights(&g, 2), Err(Error::UnknownCharacter(2))));
    }

    #[test]
    fn two_dim_irrep_weight_at_identity() {
        let g = catalog_group("dihedral4", 2).unwrap();
        let chi = g.characters.iter().position(|c| c.degree == 2).unwrap();
        let w = projector_weights(&g, chi).unwrap();
        assert!((w.weights[0] - 0.5).norm() < 1e-12);
    }
}
