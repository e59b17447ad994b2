use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_group, orthogonalize_group, FiniteGroupRep};
use crate::error::{Error, Result};

const MAX_ORDER: usize = 1024;

/// A group given by explicit generators (row-major `dim × dim` each).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub dim: usize,
    pub generators: Vec<Vec<f64>>,
    /// Conjugate onto `O(d)` before building, for non-orthogonal generators.
    #[serde(default)]
    pub orthogonalize: bool,
}

/// Named groups: `trivial`, `z2` (`±I`), `z2^d` (independent sign flips),
/// and in two dimensions `swap2`, `dihedral3`, `dihedral4`.
pub fn catalog_group(name: &str, dim: usize) -> Result<FiniteGroupRep> {
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let id = DMatrix::<f64>::identity(dim, dim);
    let generators = match name {
        "trivial" => vec![id],
        "z2" => vec![-id],
        "z2^d" => (0..dim)
            .map(|k| {
                let mut g = id.clone();
                g[(k, k)] = -1.0;
                g
            })
            .collect(),
        "swap2" | "dihedral3" | "dihedral4" => {
            if dim != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: dim });
            }
            let reflect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
            match name {
                "swap2" => vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
                "dihedral3" => {
                    let t = 2.0 * std::f64::consts::PI / 3.0;
                    vec![DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]), reflect]
                }
                _ => vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), reflect],
            }
        }
        other => return Err(Error::UnknownGroup(other.to_string())),
    };
    build_group(name, &generators, MAX_ORDER, 1e-12)
}

pub fn custom_group(spec: &GroupSpec) -> Result<FiniteGroupRep> {
    let d = spec.dim;
    let mut generators = Vec::with_capacity(spec.generators.len());
    for g in &spec.generators {
        if g.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: g.len() });
        }
        generators.push(DMatrix::from_row_slice(d, d, g));
    }
    if generators.is_empty() {
        return Err(Error::Config("custom group needs at least one generator".into()));
    }
    if spec.orthogonalize {
        let raw = close_raw(&generators)?;
        let (_, mut group) = orthogonalize_group(&raw)?;
        group.name = spec.name.clone();
        Ok(group)
    } else {
        build_group(&spec.name, &generators, MAX_ORDER, 1e-12)
    }
}

/// Closure without the orthogonality requirement.
fn close_raw(generators: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let d = generators[0].nrows();
    let mut elements = vec![DMatrix::<f64>::identity(d, d)];
    let mut cursor = 0;
    while cursor < elements.len() {
        let current = elements[cursor].clone();
        for g in generators {
            let p = &current * g;
            let scale = p.amax().max(1.0);
            let known = elements.iter().any(|e| super::max_abs_diff(e, &p) <= super::MATCH_TOL * scale);
            if !known {
                if elements.len() >= MAX_ORDER {
                    return Err(Error::NonClosure { max_order: MAX_ORDER });
                }
                elements.push(p);
            }
        }
        cursor += 1;
    }
    Ok(elements)
}
