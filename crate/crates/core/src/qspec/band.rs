//! Symmetric band matrices: `LDLᵀ` factorization, inertia and solves.
//!
//! No pivoting is performed. Tiny pivots are nudged to `±PIVOT_FLOOR·scale`,
//! which keeps the inertia count usable as a spectrum-slicing oracle and is
//! harmless for inverse iteration.

/// Lower band of a symmetric `n × n` matrix with half-bandwidth `kd`.
/// `row(i)[m] = A[i][i − kd + m]` for `m < kd`, `row(i)[kd] = A[i][i]`.
#[derive(Debug, Clone)]
pub struct SymBand {
    pub n: usize,
    pub kd: usize,
    data: Vec<f64>,
}

const PIVOT_FLOOR: f64 = 1e-300;

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self { n, kd, data: vec![0.0; n * (kd + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.kd);
        i * (self.kd + 1) + self.kd - (i - j)
    }

    /// Entry `A[i][j]`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.kd {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Sets `A[i][j] = A[j][i] = v`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = self.kd + 1;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let j0 = i.saturating_sub(self.kd);
            let mut acc = row[self.kd] * x[i];
            for j in j0..i {
                let a = row[self.kd - (i - j)];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// `‖A‖∞`
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.kd)..=i {
                let a = self.get(i, j).abs();
                rows[i] += a;
                if j != i {
                    rows[j] += a;
                }
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Factor `A − σ I`.
    pub fn ldlt_shifted(&self, sigma: f64) -> BandLdlt {
        let n = self.n;
        let kd = self.kd;
        let w = kd + 1;
        let scale = self.norm_inf().max(1.0);
        let floor = PIVOT_FLOOR.max(f64::EPSILON * 1e-3 * scale);
        // l rows share the band layout; the diagonal slot holds d_i
        let mut l = self.data.clone();
        for i in 0..n {
            l[i * w + kd] -= sigma;
        }
        let mut dl = vec![0.0f64; kd];
        for i in 0..n {
            let j0 = i.saturating_sub(kd);
            for j in j0..i {
                // L_ij = (a_ij − Σ_k L_ik d_k L_jk) / d_j over k in [max(i,j)−kd, j)
                let k0 = i.saturating_sub(kd);
                let mut s = l[i * w + kd - (i - j)];
                for k in k0..j {
                    s -= dl[k - k0] * l[j * w + kd - (j - k)];
                }
                let dj = l[j * w + kd];
                let lij = s / dj;
                l[i * w + kd - (i - j)] = lij;
                dl[j - k0] = lij * dj;
            }
            let mut di = l[i * w + kd];
            for k in j0..i {
                di -= dl[k - j0] * l[i * w + kd - (i - k)];
            }
            if di.abs() < floor {
                di = if di < 0.0 { -floor } else { floor };
            }
            l[i * w + kd] = di;
        }
        BandLdlt { n, kd, l }
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        self.ldlt_shifted(sigma).negative_pivots()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// `A − σI = L D Lᵀ` with unit lower band `L`.
#[derive(Debug, Clone)]
pub struct BandLdlt {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandLdlt {
    pub fn negative_pivots(&self) -> usize {
        let w = self.kd + 1;
        (0..self.n).filter(|&i| self.l[i * w + self.kd] < 0.0).count()
    }

    /// Solve `(A − σI) x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, kd, w) = (self.n, self.kd, self.kd + 1);
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(kd)..i {
                s -= self.l[i * w + kd - (i - j)] * x[j];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.l[i * w + kd];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            for j in i.saturating_sub(kd)..i {
                x[j] -= self.l[i * w + kd - (i - j)] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn random_band(n: usize, kd: usize, seed: u64) -> SymBand {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBand::zeros(n, kd);
        for i in 0..n {
            for j in i.saturating_sub(kd)..=i {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn apply_matches_dense() {
        let a = random_band(30, 3, 1);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let mut y = vec![0.0; 30];
        a.apply(&x, &mut y);
        let yd = a.to_dense() * DVector::from_vec(x);
        for i in 0..30 {
            assert!((y[i] - yd[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn inertia_matches_dense_eigenvalues() {
        let a = random_band(40, 4, 2);
        let eig = a.to_dense().symmetric_eigenvalues();
        for sigma in [-2.0, -0.5, 0.1, 0.7, 1.9] {
            let expect = eig.iter().filter(|&&l| l < sigma).count();
            assert_eq!(a.count_below(sigma), expect, "sigma {sigma}");
        }
    }

    #[test]
    fn solve_matches_dense() {
        let a = random_band(25, 2, 3);
        let sigma = 0.3;
        let f = a.ldlt_shifted(sigma);
        let b: Vec<f64> = (0..25).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let m = a.to_dense() - DMatrix::identity(25, 25) * sigma;
        let r = m * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.amax() < 1e-9);
    }
}
