//! Irreducible characters from class multiplication coefficients.
//!
//! The class sums `C_i` span the centre of the group algebra and satisfy
//! `C_i C_j = Σ_k c_ijk C_k`. For each irreducible character the central
//! character `ω_k = |C_k| χ_k / d_χ` is a common eigenvector of the matrices
//! `(A_i)_{jk} = c_ijk`. A random real combination of the `A_i` separates all
//! of them at once; degrees follow from `Σ_g |χ(g)|² = |G|`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FiniteGroupRep;
use crate::error::{Error, Result};

/// One irreducible character, one value per conjugacy class.
#[derive(Debug, Clone)]
pub struct Character {
    pub degree: usize,
    pub values: Vec<Complex64>,
}

const MAX_ATTEMPTS: usize = 12;

pub fn character_table(group: &FiniteGroupRep) -> Result<Vec<Character>> {
    let n = group.elements.len();
    let r = group.classes.len();
    let class_sizes: Vec<f64> = group.classes.iter().map(|c| c.len() as f64).collect();

    // c[i][j][k] = #{(x, y) ∈ C_i × C_j : x y = rep(C_k)}
    let mut coeff = vec![vec![vec![0.0f64; r]; r]; r];
    for x in 0..n {
        let ci = group.class_of[x];
        for y in 0..n {
            let z = group.mul_table[x][y];
            let ck = group.class_of[z];
            if group.classes[ck][0] == z {
                coeff[ci][group.class_of[y]][ck] += 1.0;
            }
        }
    }

    let id_class = group.class_of[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c1a5);
    for _ in 0..MAX_ATTEMPTS {
        let a: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut mix = DMatrix::<f64>::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    mix[(j, k)] += a[i] * coeff[i][j][k];
                }
            }
        }
        let eigenvalues = mix.complex_eigenvalues();
        let scale = eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut separated = true;
        for p in 0..r {
            for q in (p + 1)..r {
                if (eigenvalues[p] - eigenvalues[q]).norm() < 1e-6 * scale {
                    separated = false;
                }
            }
        }
        if !separated {
            continue;
        }
        let mix_c = mix.map(|v| Complex64::new(v, 0.0));
        let mut table = Vec::with_capacity(r);
        let mut ok = true;
        for &lambda in eigenvalues.iter() {
            let shifted = &mix_c - DMatrix::<Complex64>::identity(r, r) * lambda;
            let omega = null_vector(shifted);
            let pivot = omega[id_class];
            if pivot.norm() < 1e-8 {
                ok = false;
                break;
            }
            let omega: Vec<Complex64> = omega.iter().map(|w| w / pivot).collect();
            let norm2: f64 = omega.iter().zip(&class_sizes).map(|(w, s)| w.norm_sqr() / s).sum();
            let degree = (n as f64 / norm2).sqrt();
            let rounded = degree.round();
            if (degree - rounded).abs() > 1e-6 || rounded < 1.0 {
                ok = false;
                break;
            }
            let values = omega.iter().zip(&class_sizes).map(|(w, s)| w * rounded / s).collect();
            table.push(Character { degree: rounded as usize, values });
        }
        if !ok {
            continue;
        }
        let total: usize = table.iter().map(|c| c.degree * c.degree).sum();
        if total != n {
            continue;
        }
        sort_table(&mut table, id_class);
        return Ok(table);
    }
    Err(Error::DegenerateSplit { attempts: MAX_ATTEMPTS })
}

/// Right singular vector of the smallest singular value.
fn null_vector(m: DMatrix<Complex64>) -> Vec<Complex64> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    v_t.row(k).iter().map(|z| z.conj()).collect()
}

/// Trivial character first, then by degree, then by real parts of the values.
fn sort_table(table: &mut [Character], id_class: usize) {
    let is_trivial = |c: &Character| c.values.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    table.sort_by(|a, b| {
        is_trivial(b)
            .cmp(&is_trivial(a))
            .then(a.degree.cmp(&b.degree))
            .then_with(|| {
                for (x, y) in a.values.iter().zip(&b.values) {
                    let ord = y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal);
                    if (x.re - y.re).abs() > 1e-8 {
                        return ord;
                    }
                    if (x.im - y.im).abs() > 1e-8 {
                        return y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal);
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    debug_assert!(table.iter().all(|c| (c.values[id_class].re - c.degree as f64).abs() < 1e-8));
}
