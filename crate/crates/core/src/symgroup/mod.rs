//! Finite matrix groups acting on configuration space.
//!
//! A [`FiniteGroupRep`] holds the elements as orthogonal `d×d` matrices with
//! identity first, the multiplication and inverse tables, conjugacy classes
//! and the irreducible character table. Groups are built either by closing a
//! generator set ([`build_group`]) or by conjugating a raw finite matrix
//! group onto the orthogonal group ([`orthogonalize_group`]).

mod catalog;
mod characters;
mod lift;

pub use catalog::{catalog_group, custom_group, GroupSpec};
pub use characters::{character_table, Character};
pub use lift::{projector_weights, standard_symplectic, symplectic_lift, ProjectorWeights, SymplecticLift};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entrywise tolerance used when matching products to known elements.
pub const MATCH_TOL: f64 = 1e-10;

/// A finite subgroup of `O(d)` with its tables and character table.
#[derive(Debug, Clone)]
pub struct FiniteGroupRep {
    pub name: String,
    pub dim: usize,
    pub elements: Vec<DMatrix<f64>>,
    pub mul_table: Vec<Vec<usize>>,
    pub inv_table: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    pub characters: Vec<Character>,
}

impl FiniteGroupRep {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul_table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv_table[a]
    }

    /// `a b a⁻¹`
    pub fn conjugate(&self, a: usize, b: usize) -> usize {
        self.mul(self.mul(a, b), self.inv(a))
    }

    /// χ(g) for character index `chi` and element index `g`.
    pub fn chi(&self, chi: usize, g: usize) -> Complex64 {
        self.characters[chi].values[self.class_of[g]]
    }

    pub fn degree(&self, chi: usize) -> usize {
        self.characters[chi].degree
    }

    /// Smallest `k > 0` with `g^k = Id`.
    pub fn element_order(&self, g: usize) -> usize {
        let mut k = 1;
        let mut p = g;
        while p != 0 {
            p = self.mul(p, g);
            k += 1;
        }
        k
    }

    /// `g^n` for any integer `n` (negative powers use the inverse).
    pub fn power(&self, g: usize, n: i64) -> usize {
        let base = if n < 0 { self.inv(g) } else { g };
        let mut acc = 0;
        for _ in 0..n.unsigned_abs() {
            acc = self.mul(acc, base);
        }
        acc
    }

    /// Index of the element matching `m` within [`MATCH_TOL`], if any.
    pub fn find(&self, m: &DMatrix<f64>) -> Option<usize> {
        nearest(&self.elements, m, MATCH_TOL)
    }

    /// One representative per conjugacy class (the smallest index).
    pub fn class_representatives(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c[0]).collect()
    }

    /// `max_{i,j} |e_i e_j - e_{mul[i][j]}|`
    pub fn closure_residual(&self) -> f64 {
        let n = self.order();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let p = &self.elements[i] * &self.elements[j];
                worst = worst.max(max_abs_diff(&p, &self.elements[self.mul_table[i][j]]));
            }
        }
        worst
    }

    /// `max_g ‖ᵗg g − I‖∞`
    pub fn orthogonality_residual(&self) -> f64 {
        self.elements.iter().map(orthogonality_deviation).fold(0.0, f64::max)
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(crate) fn orthogonality_deviation(g: &DMatrix<f64>) -> f64 {
    let d = g.nrows();
    max_abs_diff(&(g.transpose() * g), &DMatrix::identity(d, d))
}

fn nearest(set: &[DMatrix<f64>], m: &DMatrix<f64>, tol: f64) -> Option<usize> {
    let mut best = None;
    let mut best_dist = f64::INFINITY;
    for (i, e) in set.iter().enumerate() {
        let dist = max_abs_diff(e, m);
        if dist < best_dist {
            best_dist = dist;
            best = Some(i);
        }
    }
    best.filter(|_| best_dist <= tol)
}

/// Nearest orthogonal matrix (polar factor).
fn polish_orthogonal(g: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = g.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Close `generators` under multiplication and build the group tables.
///
/// Generators must be orthogonal up to rounding noise (deviation ≤ 1e-9);
/// the enumerated elements are polished onto `O(d)`. Use
/// [`orthogonalize_group`] for a non-orthogonal finite group.
pub fn build_group(name: &str, generators: &[DMatrix<f64>], max_order: usize, tol: f64) -> Result<FiniteGroupRep> {
    let dim = match generators.first() {
        Some(g) => g.nrows(),
        None => return Err(Error::Config("at least one generator is required".into())),
    };
    for (index, g) in generators.iter().enumerate() {
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: g.nrows().max(g.ncols()) });
        }
        let det = g.determinant();
        if det.abs() < tol {
            return Err(Error::SingularGenerator { index, det });
        }
    }
    let elements = enumerate_closure(generators, max_order)?;
    for (index, e) in elements.iter().enumerate() {
        let deviation = orthogonality_deviation(e);
        if deviation > 1e-9 {
            return Err(Error::NotOrthogonal { index, deviation });
        }
    }
    let polished: Vec<_> = elements.iter().map(polish_orthogonal).collect();
    from_elements(name, polished)
}

/// Breadth-first closure; identity is element 0.
fn enumerate_closure(generators: &[DMatrix<f64>], max_order: usize) -> Result<Vec<DMatrix<f64>>> {
    let dim = generators[0].nrows();
    let mut elements = vec![DMatrix::<f64>::identity(dim, dim)];
    let mut cursor = 0;
    while cursor < elements.len() {
        let current = elements[cursor].clone();
        for g in generators {
            let p = &current * g;
            let scale = p.amax().max(1.0);
            if nearest(&elements, &p, MATCH_TOL * scale).is_none() {
                if elements.len() >= max_order {
                    return Err(Error::NonClosure { max_order });
                }
                elements.push(p);
            }
        }
        cursor += 1;
    }
    Ok(elements)
}

/// Build tables for a complete list of orthogonal elements.
pub(crate) fn from_elements(name: &str, mut elements: Vec<DMatrix<f64>>) -> Result<FiniteGroupRep> {
    let dim = elements[0].nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let id_pos = nearest(&elements, &id, MATCH_TOL).ok_or(Error::NotAGroup)?;
    elements.swap(0, id_pos);
    elements[0] = id;
    let n = elements.len();

    let mut mul_table = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in 0..n {
            let p = &elements[i] * &elements[j];
            mul_table[i][j] = nearest(&elements, &p, MATCH_TOL).ok_or(Error::NotAGroup)?;
        }
    }
    let mut inv_table = vec![0usize; n];
    for i in 0..n {
        inv_table[i] = (0..n).find(|&j| mul_table[i][j] == 0).ok_or(Error::NotAGroup)?;
    }

    let mut class_of = vec![usize::MAX; n];
    let mut classes = Vec::new();
    for x in 0..n {
        if class_of[x] != usize::MAX {
            continue;
        }
        let mut class: Vec<usize> = (0..n).map(|g| mul_table[mul_table[g][x]][inv_table[g]]).collect();
        class.sort_unstable();
        class.dedup();
        for &c in &class {
            class_of[c] = classes.len();
        }
        classes.push(class);
    }

    let mut group = FiniteGroupRep {
        name: name.to_string(),
        dim,
        elements,
        mul_table,
        inv_table,
        classes,
        class_of,
        characters: Vec::new(),
    };
    group.characters = character_table(&group)?;
    Ok(group)
}

/// Conjugate a finite group of invertible matrices into `O(d)`.
///
/// Returns `S0 = Q^{-1/2}` with `Q = (1/|G|) Σ ᵗg g` and the group of
/// elements `S0⁻¹ g S0`.
pub fn orthogonalize_group(raw: &[DMatrix<f64>]) -> Result<(DMatrix<f64>, FiniteGroupRep)> {
    if raw.is_empty() {
        return Err(Error::NotAGroup);
    }
    let dim = raw[0].nrows();
    for a in raw {
        for b in raw {
            let p = a * b;
            let scale = p.amax().max(1.0);
            if nearest(raw, &p, MATCH_TOL * scale).is_none() {
                return Err(Error::NotAGroup);
            }
        }
    }
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    for g in raw {
        q += g.transpose() * g;
    }
    q /= raw.len() as f64;
    let eig = q.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let s0 = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let s0_inv = s0.clone().try_inverse().ok_or(Error::NotAGroup)?;
    let conjugated: Vec<_> = raw.iter().map(|g| polish_orthogonal(&(&s0_inv * g * &s0))).collect();
    let group = from_elements("orthogonalized", conjugated)?;
    Ok((s0, group))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(d: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(d, d, v)
    }

    #[test]
    fn parity_group_has_order_two() {
        let g = build_group("z2", &[m(1, &[-1.0])], 16, 1e-12).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.elements[0][(0, 0)], 1.0);
        assert_eq!(g.inv_table, vec![0, 1]);
    }

    #[test]
    fn rotation_and_reflection_close_to_eight_elements() {
        let rot = m(2, &[0.0, -1.0, 1.0, 0.0]);
        let refl = m(2, &[1.0, 0.0, 0.0, -1.0]);
        let g = build_group("d4", &[rot, refl], 64, 1e-12).unwrap();
        assert_eq!(g.order(), 8);
        assert_eq!(g.classes.len(), 5);
        assert!(g.closure_residual() <= 1e-12);
        assert!(g.orthogonality_residual() <= 1e-12);
    }

    #[test]
    fn identity_generator_gives_trivial_group() {
        let g = build_group("trivial", &[m(1, &[1.0])], 4, 1e-12).unwrap();
        assert_eq!(g.order(), 1);
        assert_eq!(g.characters.len(), 1);
    }

    #[test]
    fn infinite_order_generator_fails_closure() {
        let t = 1.0f64;
        let rot = m(2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(matches!(build_group("x", &[rot], 50, 1e-12), Err(Error::NonClosure { max_order: 50 })));
    }

    #[test]
    fn singular_generator_rejected() {
        let r = build_group("x", &[m(2, &[1.0, 0.0, 0.0, 0.0])], 10, 1e-12);
        assert!(matches!(r, Err(Error::SingularGenerator { index: 0, .. })));
    }

    #[test]
    fn non_orthogonal_generator_rejected() {
        let r = build_group("x", &[m(2, &[0.0, 2.0, 0.5, 0.0])], 10, 1e-12);
        assert!(matches!(r, Err(Error::NotOrthogonal { .. })));
    }

    #[test]
    fn orthogonalize_already_orthogonal_is_identity() {
        let raw = vec![m(1, &[1.0]), m(1, &[-1.0])];
        let (s0, g) = orthogonalize_group(&raw).unwrap();
        assert_abs_diff_eq!(s0[(0, 0)], 1.0, epsilon = 1e-14);
        assert_eq!(g.order(), 2);
    }

    #[test]
    fn orthogonalize_scaled_swap() {
        let g = m(2, &[0.0, 2.0, 0.5, 0.0]);
        let raw = vec![DMatrix::identity(2, 2), g.clone()];
        let (s0, grp) = orthogonalize_group(&raw).unwrap();
        // Q = diag(5/8, 5/2) by hand; S0 = Q^{-1/2}
        let q = (s0.clone() * s0.clone()).try_inverse().unwrap();
        assert_abs_diff_eq!(q[(0, 0)], 5.0 / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[(1, 1)], 5.0 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[(0, 1)], 0.0, epsilon = 1e-12);
        let conj = s0.clone().try_inverse().unwrap() * g * s0;
        assert!(orthogonality_deviation(&conj) <= 1e-12);
        assert!(grp.orthogonality_residual() <= 1e-12);
    }

    #[test]
    fn orthogonalize_trivial_group() {
        let (s0, g) = orthogonalize_group(&[DMatrix::identity(3, 3)]).unwrap();
        assert!(max_abs_diff(&s0, &DMatrix::identity(3, 3)) < 1e-14);
        assert_eq!(g.order(), 1);
    }

    #[test]
    fn orthogonalize_rejects_open_set() {
        let raw = vec![DMatrix::identity(1, 1), m(1, &[2.0])];
        assert!(matches!(orthogonalize_group(&raw), Err(Error::NotAGroup)));
    }

    #[test]
    fn powers_and_orders() {
        let rot = m(2, &[0.0, -1.0, 1.0, 0.0]);
        let g = build_group("c4", &[rot], 8, 1e-12).unwrap();
        assert_eq!(g.element_order(1), 4);
        assert_eq!(g.power(1, 4), 0);
        assert_eq!(g.power(1, -1), g.inv(1));
    }
}
