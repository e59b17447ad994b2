//! Energy cutoff `ψ`, time window `f̂` and the smoothed density
//! `G_χ(h) = Σ_n mult_n ψ(E_n) f((E − E_n)/h)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sectors::SectorSpectrum;
use crate::error::{Error, Result};

/// `ψ = 1` on `|E − center| ≤ plateau`, `0` beyond `delta_e`, smooth between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub center: f64,
    pub plateau: f64,
    pub delta_e: f64,
}

/// `f̂(t) = exp(−1/(1 − u²))`, `u = (t − t_c)/τ`, on `|u| < 1`.
///
/// With `mirror`, the reflected bump `f̂(−t)` is added so that `f` is real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FhatSpec {
    pub t_c: f64,
    pub tau: f64,
    #[serde(default)]
    pub mirror: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    pub psi: PsiSpec,
    pub fhat: FhatSpec,
    /// Base trapezoid step for the inverse Fourier integral.
    pub quad_step: f64,
}

pub fn build_windows(e0: f64, plateau: f64, delta_e: f64, t_c: f64, tau: f64, quad_step: f64) -> Result<WindowPair> {
    if !(plateau >= 0.0 && plateau < delta_e) {
        return Err(Error::BadWindow(format!("need 0 ≤ plateau < δE, got {plateau} and {delta_e}")));
    }
    if !(tau > 0.0) {
        return Err(Error::BadWindow(format!("τ must be positive, got {tau}")));
    }
    if !(quad_step > 0.0 && quad_step < tau) {
        return Err(Error::BadWindow(format!("quadrature step must lie in (0, τ), got {quad_step}")));
    }
    if ![e0, t_c].iter().all(|x| x.is_finite()) {
        return Err(Error::BadWindow("non-finite window centre".into()));
    }
    Ok(WindowPair { psi: PsiSpec { center: e0, plateau, delta_e }, fhat: FhatSpec { t_c, tau, mirror: false }, quad_step })
}

/// `e^{−1/x} / (e^{−1/x} + e^{−1/(1−x)})`, a smooth step from 0 to 1 on `[0, 1]`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// `exp(−1/(1 − u²))` on `|u| < 1`, zero outside.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

impl WindowPair {
    pub fn with_mirror(mut self, mirror: bool) -> Self {
        self.fhat.mirror = mirror;
        self
    }

    pub fn psi(&self, e: f64) -> f64 {
        let PsiSpec { center, plateau, delta_e } = self.psi;
        let r = (e - center).abs();
        if r <= plateau {
            1.0
        } else if r >= delta_e {
            0.0
        } else {
            smooth_step((delta_e - r) / (delta_e - plateau))
        }
    }

    /// One-sided bump, without the mirror image.
    pub fn fhat_bump(&self, t: f64) -> f64 {
        bump((t - self.fhat.t_c) / self.fhat.tau)
    }

    pub fn fhat(&self, t: f64) -> f64 {
        let v = self.fhat_bump(t);
        if self.fhat.mirror {
            v + self.fhat_bump(-t)
        } else {
            v
        }
    }

    /// Support of `ψ`.
    pub fn psi_support(&self) -> (f64, f64) {
        (self.psi.center - self.psi.delta_e, self.psi.center + self.psi.delta_e)
    }

    /// Support of the one-sided `f̂`.
    pub fn fhat_support(&self) -> (f64, f64) {
        (self.fhat.t_c - self.fhat.tau, self.fhat.t_c + self.fhat.tau)
    }

    /// `f(s) = (1/2π) ∫ f̂(t) e^{ist} dt` by the trapezoid rule.
    pub fn f(&self, s: f64) -> Complex64 {
        self.f_with_step(s, self.quad_step)
    }

    pub fn f_with_step(&self, s: f64, step: f64) -> Complex64 {
        let one = self.f_one_sided(s, step);
        if self.fhat.mirror {
            Complex64::new(2.0 * one.re, 0.0)
        } else {
            one
        }
    }

    fn f_one_sided(&self, s: f64, step: f64) -> Complex64 {
        let (a, b) = self.fhat_support();
        let tau = self.fhat.tau;
        // resolve both the bump spectrum (≈ 600/τ) and the oscillation e^{ist}
        let needed = ((b - a) * (s.abs() + 600.0 / tau) / std::f64::consts::TAU).ceil() as usize;
        let n = (((b - a) / step).ceil() as usize).max(needed).max(8);
        let dt = (b - a) / n as f64;
        let mut acc = Complex64::default();
        for k in 1..n {
            let t = a + k as f64 * dt;
            acc += Complex64::from_polar(self.fhat_bump(t), s * t);
        }
        acc * dt / std::f64::consts::TAU
    }
}

/// `Σ_n mult_n ψ(E_n) f((E − E_n)/h)` over a sector spectrum.
pub fn spectral_density(sector: &SectorSpectrum, windows: &WindowPair, e: f64, h: f64) -> Result<Complex64> {
    let (lo, hi) = windows.psi_support();
    let (wlo, whi) = sector.window;
    if lo < wlo || hi > whi {
        return Err(Error::WindowOverflow { support_lo: lo, support_hi: hi, window_lo: wlo, window_hi: whi });
    }
    Ok(sector
        .levels
        .iter()
        .map(|l| {
            let w = windows.psi(l.energy);
            if w == 0.0 {
                Complex64::default()
            } else {
                windows.f((e - l.energy) / h) * (w * l.multiplicity as f64)
            }
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qspec::sectors::SectorLevel;

    fn windows() -> WindowPair {
        build_windows(1.0, 0.1, 0.5, 1.6, 0.6, 0.6 / 400.0).unwrap()
    }

    #[test]
    fn psi_shape() {
        let w = windows();
        assert_eq!(w.psi(1.0), 1.0);
        assert_eq!(w.psi(1.1), 1.0);
        assert_eq!(w.psi(1.5), 0.0);
        assert_eq!(w.psi(0.4), 0.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = w.psi(1.1 + 0.004 * k as f64);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn fhat_vanishes_at_support_ends() {
        let w = windows();
        let (a, b) = w.fhat_support();
        assert_eq!(w.fhat(a), 0.0);
        assert_eq!(w.fhat(b), 0.0);
        assert!(w.fhat(a + 1e-3) < 1e-100);
        assert!((w.fhat(1.6) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn f_at_zero_self_converges() {
        let w = windows();
        let coarse = w.f_with_step(0.0, 0.6 / 200.0);
        let fine = w.f_with_step(0.0, 0.6 / 800.0);
        assert!((coarse - fine).norm() <= 1e-8 * fine.norm());
        // Simpson cross-check of ∫ f̂ / 2π
        let n = 20_000;
        let (a, b) = w.fhat_support();
        let dt = (b - a) / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let c = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += c * w.fhat(a + k as f64 * dt);
        }
        s *= dt / 3.0 / std::f64::consts::TAU;
        assert!((fine.re - s).abs() <= 1e-8 * s);
    }

    #[test]
    fn mirror_makes_f_real() {
        let w = windows().with_mirror(true);
        let v = w.f(3.7);
        assert_eq!(v.im, 0.0);
        let one = windows().f(3.7);
        assert!((v.re - 2.0 * one.re).abs() < 1e-15);
    }

    #[test]
    fn bad_windows() {
        assert!(build_windows(1.0, 0.5, 0.5, 1.0, 0.5, 0.01).is_err());
        assert!(build_windows(1.0, 0.1, 0.5, 1.0, 0.0, 0.01).is_err());
    }

    fn sector(levels: Vec<SectorLevel>) -> SectorSpectrum {
        SectorSpectrum {
            chi: 0,
            degree: 1,
            levels,
            window: (0.0, 2.0),
            h: 0.1,
            max_trace_defect: 0.0,
            non_multiples: 0,
            exact_action: true,
        }
    }

    #[test]
    fn trivial_densities() {
        let w = windows();
        assert_eq!(spectral_density(&sector(vec![]), &w, 1.0, 0.1).unwrap(), Complex64::default());
        let one = sector(vec![SectorLevel { energy: 1.0, multiplicity: 2, residual: 0.0 }]);
        let g = spectral_density(&one, &w, 1.0, 0.1).unwrap();
        assert!((g - w.f(0.0) * 2.0).norm() < 1e-15);
        let mut narrow = one.clone();
        narrow.window = (0.8, 2.0);
        assert!(matches!(spectral_density(&narrow, &w, 1.0, 0.1), Err(Error::WindowOverflow { .. })));
    }
}
