//! Hamiltonian flow `ż = J∇H(z)` with the variational system and actions.
//!
//! State layout: `z` (2d), `F` column-major (4d²), `∫ p·q̇`, `∫ (p·q̇ − H)`.
//! For `H = |ξ|² + V`, `q̇ = 2p`, `ṗ = −∇V`, and `J·Hess H = [[0, 2I], [−Hess V, 0]]`.

use nalgebra::{DMatrix, DVector};
use ode_solvers::dop853::Dop853;
use ode_solvers::dop_shared::{OutputType, System};

use crate::error::{Error, Result};
use crate::models::ModelHamiltonian;
use crate::symgroup::standard_symplectic;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step, which also sets the sample density.
    pub max_step: f64,
    /// Integration stops with `Escape` when `‖z‖` exceeds this.
    pub escape_radius: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { rtol: 1e-13, atol: 1e-13, max_step: 0.05, escape_radius: f64::INFINITY }
    }
}

/// Samples of the flow from `z(0)` up to `t_end` (last sample is exact).
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub monodromy: Vec<DMatrix<f64>>,
    /// `∫₀ᵗ p·q̇ ds`
    pub action_pq: Vec<f64>,
    /// `∫₀ᵗ (p·q̇ − H) ds`
    pub action: Vec<f64>,
    /// `max_t |H(z(t)) − H(z(0))|`
    pub energy_drift: f64,
    /// `max_t ‖ᵗF J F − J‖∞`
    pub symplectic_residual: f64,
}

impl FlowResult {
    pub fn end_state(&self) -> &DVector<f64> {
        self.states.last().expect("flow has at least one sample")
    }

    pub fn end_monodromy(&self) -> &DMatrix<f64> {
        self.monodromy.last().expect("flow has at least one sample")
    }

    pub fn end_action_pq(&self) -> f64 {
        *self.action_pq.last().expect("flow has at least one sample")
    }
}

struct Hamiltonian<'a> {
    model: &'a ModelHamiltonian,
    escape_radius: f64,
    escaped: bool,
}

impl System<f64, DVector<f64>> for Hamiltonian<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let d = self.model.dim;
        let n = 2 * d;
        let x = &y.as_slice()[..d];
        let p = &y.as_slice()[d..n];
        let mut grad = [0.0f64; 8];
        self.model.gradient_into(x, &mut grad[..d]);
        let hess = self.model.hessian(x);
        let p2: f64 = p.iter().map(|v| v * v).sum();
        for i in 0..d {
            dy[i] = 2.0 * p[i];
            dy[d + i] = -grad[i];
        }
        // F columns
        for c in 0..n {
            let col = n + c * n;
            for i in 0..d {
                dy[col + i] = 2.0 * y[col + d + i];
                let mut acc = 0.0;
                for k in 0..d {
                    acc += hess[(i, k)] * y[col + k];
                }
                dy[col + d + i] = -acc;
            }
        }
        let base = n + n * n;
        dy[base] = 2.0 * p2;
        dy[base + 1] = 2.0 * p2 - (p2 + self.model.potential(x));
    }

    fn solout(&mut self, _t: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        let n = 2 * self.model.dim;
        let r2: f64 = y.as_slice()[..n].iter().map(|v| v * v).sum();
        if r2.sqrt() > self.escape_radius || !r2.is_finite() {
            self.escaped = true;
            return true;
        }
        false
    }
}

/// Integrate from `z0` to `t_end ≥ 0`.
pub fn flow(model: &ModelHamiltonian, z0: &[f64], t_end: f64, opts: &FlowOptions) -> Result<FlowResult> {
    let d = model.dim;
    let n = 2 * d;
    if z0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z0.len() });
    }
    if !(t_end >= 0.0) {
        return Err(Error::StepFailure(format!("negative or non-finite end time {t_end}")));
    }
    let mut y0 = DVector::zeros(n + n * n + 2);
    y0.as_mut_slice()[..n].copy_from_slice(z0);
    for i in 0..n {
        y0[n + i * n + i] = 1.0;
    }
    let samples: Vec<(f64, DVector<f64>)> = if t_end == 0.0 {
        vec![(0.0, y0)]
    } else {
        let system = Hamiltonian { model, escape_radius: opts.escape_radius, escaped: false };
        let mut stepper = Dop853::from_param(
            system,
            0.0,
            t_end,
            0.0,
            y0.clone(),
            opts.rtol,
            opts.atol,
            0.9,
            0.0,
            0.333,
            6.0,
            opts.max_step.min(t_end),
            0.0,
            1_000_000,
            1000,
            OutputType::Sparse,
        );
        stepper.integrate().map_err(|e| Error::StepFailure(e.to_string()))?;
        let (ts, ys) = stepper.results().get();
        let mut out = Vec::with_capacity(ts.len() + 1);
        out.push((0.0, y0));
        for (t, y) in ts.iter().zip(ys) {
            if *t > 0.0 {
                out.push((*t, y.clone()));
            }
        }
        let last_t = out.last().map(|s| s.0).unwrap_or(0.0);
        if last_t < t_end * (1.0 - 1e-12) {
            let radius = opts.escape_radius;
            return Err(Error::Escape { time: last_t, radius });
        }
        out
    };
    let j = standard_symplectic(d);
    let e0 = model.hamiltonian(z0);
    let mut res = FlowResult {
        dim: d,
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        monodromy: Vec::with_capacity(samples.len()),
        action_pq: Vec::with_capacity(samples.len()),
        action: Vec::with_capacity(samples.len()),
        energy_drift: 0.0,
        symplectic_residual: 0.0,
    };
    for (t, y) in samples {
        let z = DVector::from_column_slice(&y.as_slice()[..n]);
        let f = DMatrix::from_column_slice(n, n, &y.as_slice()[n..n + n * n]);
        res.energy_drift = res.energy_drift.max((model.hamiltonian(z.as_slice()) - e0).abs());
        res.symplectic_residual = res.symplectic_residual.max((f.transpose() * &j * &f - &j).amax());
        res.times.push(t);
        res.states.push(z);
        res.monodromy.push(f);
        res.action_pq.push(y[n + n * n]);
        res.action.push(y[n + n * n + 1]);
    }
    Ok(res)
}

/// End state only, without keeping samples.
pub fn flow_end(model: &ModelHamiltonian, z0: &[f64], t_end: f64, opts: &FlowOptions) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let opts = FlowOptions { max_step: opts.max_step.max(t_end), ..*opts };
    let r = flow(model, z0, t_end, &opts)?;
    Ok((r.end_state().clone(), r.end_monodromy().clone(), r.end_action_pq()))
}

/// `Ψ_g(t, z) = M(g) Φ_t(z) − z` and its Jacobian `[M(g) J∇H(Φ_t z) | M(g) F − I]`.
pub fn twisted_residual(
    model: &ModelHamiltonian,
    lift: &DMatrix<f64>,
    t: f64,
    z: &[f64],
    opts: &FlowOptions,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = 2 * model.dim;
    let (zt, f, _) = flow_end(model, z, t, opts)?;
    let z0 = DVector::from_column_slice(z);
    let psi = lift * &zt - &z0;
    let mut jac = DMatrix::zeros(n, n + 1);
    let vel = standard_symplectic(model.dim) * model.grad_h(zt.as_slice());
    jac.column_mut(0).copy_from(&(lift * vel));
    jac.view_mut((0, 1), (n, n)).copy_from(&(lift * f - DMatrix::identity(n, n)));
    Ok((psi, jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symgroup::{catalog_group, symplectic_lift};
    use std::f64::consts::PI;

    fn harmonic() -> ModelHamiltonian {
        ModelHamiltonian::from_name("harmonic", Some(1), &[]).unwrap()
    }

    #[test]
    fn harmonic_flow_is_rotation() {
        let m = harmonic();
        let t = 0.7;
        let r = flow(&m, &[0.3, 0.8], t, &FlowOptions::default()).unwrap();
        let (c, s) = ((2.0 * t).cos(), (2.0 * t).sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let expect = &rot * DVector::from_vec(vec![0.3, 0.8]);
        assert!((r.end_state() - expect).amax() < 1e-12);
        assert!((r.end_monodromy() - rot).amax() < 1e-12);
        assert!(r.symplectic_residual < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let m = harmonic();
        let r = flow(&m, &[0.3, 0.8], 0.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.end_monodromy(), &DMatrix::identity(2, 2));
        assert_eq!(r.end_action_pq(), 0.0);
    }

    #[test]
    fn full_period_action_is_enclosed_area() {
        let m = harmonic();
        // E = 1: circle of radius 1 in (q, p), area π
        let r = flow(&m, &[1.0, 0.0], PI, &FlowOptions::default()).unwrap();
        assert!((r.end_action_pq() - PI).abs() < 1e-8);
        // ∫(p·q̇ − H) = π − π E
        assert!(r.action.last().unwrap().abs() < 1e-8);
    }

    #[test]
    fn twisted_residual_examples() {
        let m = harmonic();
        let opts = FlowOptions::default();
        let minus = symplectic_lift(&DMatrix::from_element(1, 1, -1.0)).unwrap().matrix;
        let (psi, _) = twisted_residual(&m, &minus, PI / 2.0, &[0.4, -0.2], &opts).unwrap();
        assert!(psi.amax() < 1e-12);
        let id = DMatrix::identity(2, 2);
        let (psi, _) = twisted_residual(&m, &id, 0.0, &[0.4, -0.2], &opts).unwrap();
        assert_eq!(psi.amax(), 0.0);
        let (psi, jac) = twisted_residual(&m, &id, PI / 4.0, &[1.0, 0.0], &opts).unwrap();
        assert!((psi[0] + 1.0).abs() < 1e-12 && (psi[1] + 1.0).abs() < 1e-12);
        // d/dt column is J∇H at Φ_t(z) = (0, −1): (2p, −2q) = (−2, 0)
        assert!((jac[(0, 0)] + 2.0).abs() < 1e-12 && jac[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn flow_commutes_with_symmetries() {
        let m = ModelHamiltonian::from_name("triangle", Some(2), &[]).unwrap();
        let g = catalog_group("dihedral3", 2).unwrap();
        let z = [0.2, -0.1, 0.3, 0.25];
        let opts = FlowOptions::default();
        let base = flow(&m, &z, 2.0, &opts).unwrap();
        for e in &g.elements {
            let lift = symplectic_lift(e).unwrap().matrix;
            let mz = &lift * DVector::from_column_slice(&z);
            let moved = flow(&m, mz.as_slice(), 2.0, &opts).unwrap();
            let diff = moved.end_state() - &lift * base.end_state();
            assert!(diff.amax() < 1e-8);
        }
        assert!(base.energy_drift < 1e-9);
        assert!(base.symplectic_residual < 1e-8);
    }

    #[test]
    fn escape_is_reported() {
        let m = ModelHamiltonian::from_name("well_on_island", Some(1), &[0.5]).unwrap();
        let opts = FlowOptions { escape_radius: 5.0, ..FlowOptions::default() };
        let r = flow(&m, &[0.0, 2.0], 50.0, &opts);
        assert!(matches!(r, Err(Error::Escape { .. })));
    }
}
