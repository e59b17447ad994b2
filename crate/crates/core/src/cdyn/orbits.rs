//! Search for twisted periodic orbits `M(g)Φ_t(z) = z` on `Σ_E`.
//!
//! Gauss–Newton runs on the augmented system `{Ψ_g = 0, H = E, section}` from
//! three seed families (symmetry sections, random energy-surface points and
//! continuation from found orbits). Solutions are deduplicated up to time
//! shift and up to the centralizer of `g`; one entry is kept per class
//! representative of `g` and per `G`-orbit of `(γ, g, t₀)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flow::{flow, flow_end, twisted_residual, FlowOptions};
use super::monodromy::{maslov_index, nondegeneracy_certificate, reduced_determinant_of, Certificate};
use crate::error::{Error, Result};
use crate::models::{confinement_check, sample_ball, ModelHamiltonian};
use crate::par::{map_slice, Execution};
use crate::symgroup::{standard_symplectic, symplectic_lift, FiniteGroupRep};

/// Geometric identification tolerance (relative to `max(1, ‖z‖)`).
const SAME_ORBIT_TOL: f64 = 1e-6;
/// Samples per period on orbit tracks.
const TRACK_SAMPLES: f64 = 2000.0;
/// Largest repetition count scanned for the primitive period.
const MAX_DIVISOR: usize = 64;
const MAX_NEWTON: usize = 40;
const POLISH_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSearchSpec {
    pub energy: f64,
    pub t_window: (f64, f64),
    pub seed_count: usize,
    pub rng_seed: u64,
    /// Newton target on `‖Ψ‖ / max(1, ‖z‖)`.
    pub tol: f64,
}

impl OrbitSearchSpec {
    pub fn new(energy: f64, t_window: (f64, f64)) -> Self {
        Self { energy, t_window, seed_count: 32, rng_seed: 0x0b17_5eed, tol: 1e-10 }
    }
}

/// A converged twisted orbit with its linearized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistedOrbit {
    /// Element index (always a conjugacy class representative).
    pub g: usize,
    pub g_class: usize,
    pub t0: f64,
    pub z0: Vec<f64>,
    pub energy: f64,
    /// `‖M(g)Φ_{t₀}(z₀) − z₀‖`
    pub residual: f64,
    /// Primitive period `T*` of the geometric orbit.
    pub primitive_period: f64,
    /// Element indices `a` with `M(a)γ = γ`.
    pub stabilizer: Vec<usize>,
    /// `|G| / |{a ∈ Stab(γ) : ag = ga}|`: number of `(γ', g')` pairs this
    /// entry stands for.
    pub class_size: usize,
    /// Shared by entries whose geometric orbits are `G`-related.
    pub orbit_class: usize,
    /// `∫₀^{t₀} p·q̇ ds`
    pub action: f64,
    /// `M(g)F(t₀)`, row-major.
    pub twisted_monodromy: Vec<f64>,
    /// `None` when the eigenvalue-1 block is larger than 2.
    pub d_red: Option<f64>,
    pub eigen_one_dim: usize,
    pub sigma: i64,
    pub sigma_residual: f64,
    pub certificate: Certificate,
    /// Rank of the augmented Newton matrix at convergence (full is `2d + 1`).
    pub jacobian_rank: usize,
    /// `‖(M(g)F − I)J∇H(z₀)‖`
    pub eigvec_residual: f64,
    /// `‖ᵗW J W − J‖∞` for the twisted monodromy `W`.
    pub symplectic_residual: f64,
}

impl TwistedOrbit {
    pub fn twisted_monodromy_matrix(&self) -> DMatrix<f64> {
        let n = self.z0.len();
        DMatrix::from_row_slice(n, n, &self.twisted_monodromy)
    }

    pub fn stab_order(&self) -> usize {
        self.stabilizer.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDatabase {
    pub model: String,
    pub group: String,
    pub spec: OrbitSearchSpec,
    pub orbits: Vec<TwistedOrbit>,
    /// Seeds whose Newton iteration failed (not fatal).
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// `D_red` of a converged orbit.
pub fn reduced_determinant(orbit: &TwistedOrbit) -> Result<f64> {
    reduced_determinant_of(&orbit.twisted_monodromy_matrix()).map(|(d, _)| d)
}

/// Nondegeneracy certificate of a converged orbit.
pub fn nondegeneracy_check(model: &ModelHamiltonian, orbit: &TwistedOrbit) -> Certificate {
    nondegeneracy_certificate(model, &orbit.z0, &orbit.twisted_monodromy_matrix())
}

fn scale(z: &DVector<f64>) -> f64 {
    z.norm().max(1.0)
}

/// Samples of a closed orbit over one period, for point-to-orbit distances.
struct Track {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
}

impl Track {
    fn new(model: &ModelHamiltonian, z: &[f64], period: f64, opts: &FlowOptions) -> Result<Self> {
        let o = FlowOptions { max_step: period / TRACK_SAMPLES, ..*opts };
        let r = flow(model, z, period, &o)?;
        Ok(Self { times: r.times, states: r.states })
    }

    fn nearest(&self, w: &DVector<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, s) in self.states.iter().enumerate() {
            let d = (s - w).norm();
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    /// `min_s ‖Φ_s(z) − w‖`, refined between samples by golden section.
    fn distance(&self, model: &ModelHamiltonian, w: &DVector<f64>, opts: &FlowOptions) -> f64 {
        let (k, coarse) = self.nearest(w);
        let last = self.states.len() - 1;
        if last < 2 {
            return coarse;
        }
        // the first and last samples coincide on a closed orbit
        let base = if k == 0 || k == last { last - 1 } else { k - 1 };
        let span = if base + 2 <= last {
            self.times[base + 2] - self.times[base]
        } else {
            2.0 * (self.times[last] - self.times[last - 1])
        };
        let z = self.states[base].as_slice();
        let f = |s: f64| -> f64 {
            match flow_end(model, z, s, opts) {
                Ok((zs, _, _)) => (zs - w).norm(),
                Err(_) => f64::INFINITY,
            }
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, span);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..50 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        coarse.min(fc).min(fd)
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    g: usize,
    t: f64,
    z: DVector<f64>,
    rank: usize,
}

/// Gauss–Newton with SVD minimum-norm steps and backtracking.
#[allow(clippy::too_many_arguments)]
fn newton(
    model: &ModelHamiltonian,
    lift: &DMatrix<f64>,
    energy: f64,
    t_seed: f64,
    z_seed: &DVector<f64>,
    tol: f64,
    t_max: f64,
    opts: &FlowOptions,
) -> Result<(f64, DVector<f64>, usize)> {
    let n = z_seed.len();
    let jv = standard_symplectic(model.dim) * model.grad_h(z_seed.as_slice());
    let vn = jv.norm();
    if vn < 1e-12 {
        return Err(Error::NoConvergence { residual: f64::INFINITY });
    }
    let section = jv / vn;
    let system = |t: f64, z: &DVector<f64>| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (psi, jac) = twisted_residual(model, lift, t, z.as_slice(), opts)?;
        let mut r = DVector::zeros(n + 2);
        r.rows_mut(0, n).copy_from(&psi);
        r[n] = model.hamiltonian(z.as_slice()) - energy;
        r[n + 1] = section.dot(&(z - z_seed));
        let mut j = DMatrix::zeros(n + 2, n + 1);
        j.view_mut((0, 0), (n, n + 1)).copy_from(&jac);
        let gh = model.grad_h(z.as_slice());
        for i in 0..n {
            j[(n, i + 1)] = gh[i];
            j[(n + 1, i + 1)] = section[i];
        }
        Ok((r, j))
    };
    let converged = |r: &DVector<f64>, z: &DVector<f64>| {
        r.rows(0, n).norm() <= tol * scale(z) && r[n].abs() <= tol * energy.abs().max(1.0)
    };
    let (mut t, mut z) = (t_seed, z_seed.clone());
    let (mut r, mut j) = system(t, &z)?;
    let mut polish = 0;
    for _ in 0..MAX_NEWTON {
        let svd = j.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-8 * smax).count();
        if converged(&r, &z) {
            // extra steps take t and z to rounding level; actions are read at 1/h
            if polish == POLISH_STEPS {
                return Ok((t, z, rank));
            }
            polish += 1;
        }
        let step = svd.solve(&(-&r), 1e-12 * smax).map_err(|e| Error::ConvergenceFailure(e.to_string()))?;
        let norm0 = r.norm();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let tn = t + lambda * step[0];
            let zn = &z + step.rows(1, n) * lambda;
            if tn > 0.0 && tn <= t_max {
                if let Ok((rn, jn)) = system(tn, &zn) {
                    if rn.norm() < norm0 {
                        t = tn;
                        z = zn;
                        r = rn;
                        j = jn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if converged(&r, &z) {
        let sv = j.singular_values();
        let smax = sv.max();
        return Ok((t, z, sv.iter().filter(|s| **s > 1e-8 * smax).count()));
    }
    Err(Error::NoConvergence { residual: r.rows(0, n).norm() })
}

/// Phase-space radius beyond which a trajectory counts as escaped.
fn escape_radius(model: &ModelHamiltonian, energy: f64) -> Result<f64> {
    let delta = 0.05 * energy.abs().max(1.0);
    let rx = confinement_check(model, energy, delta, 50.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut vmin = model.potential(&vec![0.0; model.dim]);
    for _ in 0..4000 {
        let x = sample_ball(&mut rng, model.dim, rx);
        vmin = vmin.min(model.potential(x.as_slice()));
    }
    let r = (rx * rx + (energy + delta - vmin).max(0.0)).sqrt();
    Ok(2.0 * r.max(1e-3))
}

/// Directions fixed or reversed by some group element, plus the axes.
fn symmetry_directions(group: &FiniteGroupRep) -> Vec<DVector<f64>> {
    let d = group.dim;
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    let mut push = |v: DVector<f64>| {
        let n = v.norm();
        if n < 1e-12 {
            return;
        }
        let v = v / n;
        if !dirs.iter().any(|u| (u - &v).norm() < 1e-8 || (u + &v).norm() < 1e-8) {
            dirs.push(v);
        }
    };
    for i in 0..d {
        push(DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 }));
    }
    for g in &group.elements {
        let sym = (g + g.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        for (k, l) in eig.eigenvalues.iter().enumerate() {
            if (l.abs() - 1.0).abs() < 1e-8 {
                push(eig.eigenvectors.column(k).into_owned());
            }
        }
    }
    dirs
}

fn seeds(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    energy: f64,
    radius: f64,
    count: usize,
    rng_seed: u64,
) -> Vec<DVector<f64>> {
    let d = model.dim;
    let mut out = Vec::new();
    let phase = |x: &DVector<f64>, p: &DVector<f64>| {
        let mut z = DVector::zeros(2 * d);
        z.rows_mut(0, d).copy_from(x);
        z.rows_mut(d, d).copy_from(p);
        z
    };
    let origin = DVector::zeros(d);
    let v0 = model.potential(origin.as_slice());
    for u in symmetry_directions(group) {
        for u in [u.clone(), -u] {
            // turning points along the ray
            let steps = 400;
            let f = |r: f64| model.potential((&u * r).as_slice()) - energy;
            let mut prev = f(0.0);
            for k in 1..=steps {
                let r1 = radius * k as f64 / steps as f64;
                let cur = f(r1);
                if prev.signum() != cur.signum() {
                    let (mut a, mut b) = (radius * (k - 1) as f64 / steps as f64, r1);
                    for _ in 0..80 {
                        let m = 0.5 * (a + b);
                        if f(m).signum() == f(a).signum() {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    out.push(phase(&(&u * (0.5 * (a + b))), &origin));
                }
                prev = cur;
            }
            if v0 < energy {
                out.push(phase(&origin, &(&u * (energy - v0).sqrt())));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut found = 0;
    let mut tries = 0;
    while found < count && tries < 200 * count.max(1) {
        tries += 1;
        let x = sample_ball(&mut rng, d, radius);
        let v = model.potential(x.as_slice());
        if v >= energy {
            continue;
        }
        let mut u = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        if u.norm() < 1e-3 {
            continue;
        }
        u /= u.norm();
        out.push(phase(&x, &(u * (energy - v).sqrt())));
        found += 1;
    }
    out
}

/// Local minima of `‖M(g)Φ_s z − z‖` over the window, best first.
fn candidate_times(
    model: &ModelHamiltonian,
    lift: &DMatrix<f64>,
    z: &DVector<f64>,
    window: (f64, f64),
    opts: &FlowOptions,
) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    let t_end = hi * 1.02 + 1e-3;
    let o = FlowOptions { max_step: (t_end / TRACK_SAMPLES).min(0.01), ..*opts };
    let r = flow(model, z.as_slice(), t_end, &o)?;
    let d: Vec<f64> = r.states.iter().map(|s| (lift * s - z).norm()).collect();
    let mut mins: Vec<(f64, f64)> = Vec::new();
    for k in 1..d.len().saturating_sub(1) {
        let t = r.times[k];
        if d[k] <= d[k - 1] && d[k] <= d[k + 1] && t >= lo * 0.98 - 1e-3 {
            mins.push((d[k], t));
        }
    }
    mins.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(mins.into_iter().take(3).map(|m| m.1).collect())
}

/// Smallest period `m t₀ / j`, `j ≤ MAX_DIVISOR`, that closes the orbit.
fn primitive_period(model: &ModelHamiltonian, z: &DVector<f64>, closed: f64, opts: &FlowOptions) -> Result<f64> {
    let track = Track::new(model, z.as_slice(), closed, opts)?;
    let speed = track
        .states
        .iter()
        .map(|s| (standard_symplectic(model.dim) * model.grad_h(s.as_slice())).norm())
        .fold(0.0, f64::max);
    let spacing = track.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let coarse_tol = 2.0 * speed * spacing + 1e-6 * scale(z);
    for j in (2..=MAX_DIVISOR).rev() {
        let s = closed / j as f64;
        let k = track.times.partition_point(|t| *t < s).min(track.times.len() - 1);
        let near = [k.saturating_sub(1), k].iter().map(|i| (&track.states[*i] - z).norm()).fold(f64::INFINITY, f64::min);
        if near > coarse_tol {
            continue;
        }
        let (zs, _, _) = flow_end(model, z.as_slice(), s, opts)?;
        if (zs - z).norm() <= 1e-7 * scale(z) {
            return Ok(s);
        }
    }
    Ok(closed)
}

struct Unique {
    cand: Candidate,
    period: f64,
    stabilizer: Vec<usize>,
    track: Track,
}

/// `b` with `b r b⁻¹ = e`, where `r` is the representative of `e`'s class.
fn conjugator(group: &FiniteGroupRep, e: usize) -> (usize, usize) {
    let r = group.classes[group.class_of[e]][0];
    let b = (0..group.order()).find(|b| group.conjugate(*b, r) == e).expect("class representative is conjugate");
    (r, b)
}

struct Search<'a> {
    model: &'a ModelHamiltonian,
    group: &'a FiniteGroupRep,
    lifts: Vec<DMatrix<f64>>,
    spec: OrbitSearchSpec,
    opts: FlowOptions,
    uniques: Vec<Unique>,
}

impl Search<'_> {
    fn in_window(&self, t: f64) -> bool {
        let (lo, hi) = self.spec.t_window;
        t >= lo - 1e-9 * lo.max(1.0) && t <= hi + 1e-9 * hi.max(1.0)
    }

    fn t_max(&self) -> f64 {
        self.spec.t_window.1 * 1.5 + 1.0
    }

    fn is_known(&self, c: &Candidate) -> bool {
        let tol = SAME_ORBIT_TOL * scale(&c.z);
        self.uniques.iter().any(|u| {
            u.cand.g == c.g
                && (u.cand.t - c.t).abs() <= 1e-6 * c.t.max(1.0)
                && (0..self.group.order())
                    .filter(|a| self.group.mul(*a, c.g) == self.group.mul(c.g, *a))
                    .any(|a| u.track.distance(self.model, &(&self.lifts[a] * &c.z), &self.opts) <= tol)
        })
    }

    fn admit(&mut self, c: Candidate) -> Result<bool> {
        if !self.in_window(c.t) || self.is_known(&c) {
            return Ok(false);
        }
        let m = self.group.element_order(c.g) as f64;
        let period = primitive_period(self.model, &c.z, m * c.t, &self.opts)?;
        let track = Track::new(self.model, c.z.as_slice(), period, &self.opts)?;
        let tol = SAME_ORBIT_TOL * scale(&c.z);
        let stabilizer = (0..self.group.order())
            .filter(|a| *a == 0 || track.distance(self.model, &(&self.lifts[*a] * &c.z), &self.opts) <= tol)
            .collect();
        self.uniques.push(Unique { cand: c, period, stabilizer, track });
        Ok(true)
    }

    /// Seeds `(element, time, point)` implied by a known orbit.
    fn continuation_seeds(&self, u: &Unique) -> Vec<(usize, f64, DVector<f64>)> {
        let (lo, hi) = self.spec.t_window;
        let c = &u.cand;
        let mut out = Vec::new();
        let mut n = 2;
        while n as f64 * c.t <= hi * (1.0 + 1e-9) {
            out.push((self.group.power(c.g, n as i64), n as f64 * c.t, c.z.clone()));
            n += 1;
        }
        for &a in &u.stabilizer {
            // first twisted return of `a` along the track
            let mut best = (f64::INFINITY, 0.0);
            for (k, s) in u.track.states.iter().enumerate().skip(1) {
                let d = (&self.lifts[a] * s - &c.z).norm();
                if d < best.0 {
                    best = (d, u.track.times[k]);
                }
            }
            let mut t = best.1;
            while t <= hi * (1.0 + 1e-9) {
                if t >= lo * (1.0 - 1e-9) {
                    out.push((a, t, c.z.clone()));
                }
                t += u.period;
            }
        }
        out
    }

    fn run_newton(&self, g: usize, t: f64, z: &DVector<f64>) -> Result<Candidate> {
        let (t, z, rank) =
            newton(self.model, &self.lifts[g], self.spec.energy, t, z, self.spec.tol, self.t_max(), &self.opts)?;
        Ok(Candidate { g, t, z, rank })
    }
}

fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        a.g.cmp(&b.g).then(a.t.partial_cmp(&b.t).unwrap()).then_with(|| {
            a.z.iter().zip(b.z.iter()).map(|(x, y)| x.partial_cmp(y).unwrap()).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

pub fn find_twisted_orbits(
    model: &ModelHamiltonian,
    group: &FiniteGroupRep,
    spec: &OrbitSearchSpec,
    exec: Execution,
) -> Result<OrbitDatabase> {
    if group.dim != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: group.dim });
    }
    let (lo, hi) = spec.t_window;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0) {
        return Err(Error::Config(format!("bad orbit time window ({lo}, {hi})")));
    }
    let mut db = OrbitDatabase {
        model: model.name.clone(),
        group: group.name.clone(),
        spec: *spec,
        orbits: Vec::new(),
        failures: 0,
        warnings: Vec::new(),
    };
    if hi <= lo {
        return Ok(db);
    }
    let radius = escape_radius(model, spec.energy)?;
    let opts = FlowOptions { escape_radius: radius, ..FlowOptions::default() };
    let lifts = group.elements.iter().map(|g| symplectic_lift(g).map(|l| l.matrix)).collect::<Result<Vec<_>>>()?;
    let reps = group.class_representatives();
    let seed_points = seeds(model, group, spec.energy, radius / 2.0, spec.seed_count, spec.rng_seed);
    let mut search = Search { model, group, lifts, spec: *spec, opts, uniques: Vec::new() };

    let tasks: Vec<(usize, usize)> = reps.iter().flat_map(|g| (0..seed_points.len()).map(move |s| (*g, s))).collect();
    let results = map_slice(exec, &tasks, |&(g, s)| -> Vec<Result<Candidate>> {
        let z = &seed_points[s];
        match candidate_times(model, &search.lifts[g], z, spec.t_window, &opts) {
            Ok(times) => times.into_iter().map(|t| search.run_newton(g, t, z)).collect(),
            Err(e) => vec![Err(e)],
        }
    });
    let mut found = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(c) => found.push(c),
            Err(_) => db.failures += 1,
        }
    }
    sort_candidates(&mut found);
    for c in found {
        search.admit(c)?;
    }

    // continuation until nothing new turns up
    let mut start = 0;
    for _ in 0..4 {
        let end = search.uniques.len();
        if start == end {
            break;
        }
        let mut pending: Vec<(usize, f64, DVector<f64>)> = Vec::new();
        for u in &search.uniques[start..end] {
            for (e, t, z) in search.continuation_seeds(u) {
                let (r, b) = conjugator(group, e);
                let z = &search.lifts[group.inv(b)] * z;
                pending.push((r, t, z));
            }
        }
        let polished = map_slice(exec, &pending, |(g, t, z)| search.run_newton(*g, *t, z));
        let mut fresh: Vec<Candidate> = Vec::new();
        for p in polished {
            match p {
                Ok(c) => fresh.push(c),
                Err(_) => db.failures += 1,
            }
        }
        sort_candidates(&mut fresh);
        for c in fresh {
            search.admit(c)?;
        }
        start = end;
    }

    let classes = orbit_classes(&search);
    let entries: Vec<(usize, usize)> = classes.iter().copied().enumerate().collect();
    let orbits = map_slice(exec, &entries, |&(i, class)| finish(&search, i, class));
    for o in orbits {
        db.orbits.push(o?);
    }
    for (k, r) in reps.iter().enumerate() {
        if !db.orbits.iter().any(|o| o.g == *r) {
            db.warnings.push(format!("no orbit found for class {k} in ({lo}, {hi})"));
        }
    }
    let deficient = db.orbits.iter().filter(|o| o.jacobian_rank < 2 * model.dim + 1).count();
    if deficient > 0 {
        db.warnings.push(format!("{deficient} orbit(s) with rank-deficient Newton matrix"));
    }
    db.orbits.sort_by(|a, b| {
        a.g_class.cmp(&b.g_class).then(a.t0.partial_cmp(&b.t0).unwrap()).then(a.orbit_class.cmp(&b.orbit_class))
    });
    Ok(db)
}

/// Class ids for geometric orbits up to `G`.
fn orbit_classes(search: &Search) -> Vec<usize> {
    let mut ids: Vec<usize> = Vec::with_capacity(search.uniques.len());
    let mut next = 0;
    for (i, u) in search.uniques.iter().enumerate() {
        let tol = SAME_ORBIT_TOL * scale(&u.cand.z);
        let same = (0..i).find(|&j| {
            let v = &search.uniques[j];
            (v.period - u.period).abs() <= 1e-6 * u.period.max(1.0)
                && (0..search.group.order())
                    .any(|a| v.track.distance(search.model, &(&search.lifts[a] * &u.cand.z), &search.opts) <= tol)
        });
        match same {
            Some(j) => ids.push(ids[j]),
            None => {
                ids.push(next);
                next += 1;
            }
        }
    }
    ids
}

fn finish(search: &Search, i: usize, orbit_class: usize) -> Result<TwistedOrbit> {
    let u = &search.uniques[i];
    let (model, group) = (search.model, search.group);
    let c = &u.cand;
    let lift = &search.lifts[c.g];
    let (zt, f, action) = flow_end(model, c.z.as_slice(), c.t, &search.opts)?;
    let w = lift * f;
    let n = w.nrows();
    let residual = (lift * zt - &c.z).norm();
    let (d_red, eigen_one_dim) = match reduced_determinant_of(&w) {
        Ok((d, k)) => (Some(d), k),
        Err(Error::NondegeneracyViolation { dimension }) => (None, dimension),
        Err(e) => return Err(e),
    };
    let certificate = nondegeneracy_certificate(model, c.z.as_slice(), &w);
    let (sigma, sigma_residual) = maslov_index(model, c.z.as_slice(), c.t, lift, &search.opts)?;
    let j = standard_symplectic(model.dim);
    let vel = &j * model.grad_h(c.z.as_slice());
    let eigvec_residual = ((&w - DMatrix::identity(n, n)) * vel).norm();
    let symplectic_residual = (w.transpose() * &j * &w - &j).amax();
    let commuting = u.stabilizer.iter().filter(|a| group.mul(**a, c.g) == group.mul(c.g, **a)).count();
    let mut twisted = Vec::with_capacity(n * n);
    for r in 0..n {
        for k in 0..n {
            twisted.push(w[(r, k)]);
        }
    }
    Ok(TwistedOrbit {
        g: c.g,
        g_class: group.class_of[c.g],
        t0: c.t,
        z0: c.z.iter().copied().collect(),
        energy: search.spec.energy,
        residual,
        primitive_period: u.period,
        stabilizer: u.stabilizer.clone(),
        class_size: group.order() / commuting,
        orbit_class,
        action,
        twisted_monodromy: twisted,
        d_red,
        eigen_one_dim,
        sigma,
        sigma_residual,
        certificate,
        jacobian_rank: c.rank,
        eigvec_residual,
        symplectic_residual,
    })
}
