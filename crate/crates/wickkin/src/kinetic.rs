//! Four-wave Boltzmann-Peierls collision operator on the periodic dual grid,
//!
//! ```text
//! 𝒞(W)(k) = 4π L^{−2d} Σ_{k₁,k₂} δ(Ω) [W₁W₂W₃ + WW₂W₃ − WW₁W₃ − WW₁W₂],
//! Ω = ω + ω₁ − ω₂ − ω₃,  k₃ = k + k₁ − k₂,
//! ```
//!
//! with a broadened energy delta, and the kinetic quantities derived from it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wickkin_core::quadrature;

use crate::dnls::{PropagatorFit, Spectrum};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Past this many widths the Gaussian delta is below `e^{−40}` of its peak.
const GAUSSIAN_CUTOFF: f64 = 9.0;

/// Finite-width surrogate for `δ(Ω)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeltaModel {
    /// `e^{−Ω²/2ε²} / (√(2π) ε)`
    Gaussian { eps: f64 },
    /// `(1 − cos TΩ) / (π T Ω²)` with `T = τ/λ²`, unit mass and value `T/2π` at 0.
    Fejer { tau: f64, lambda: f64 },
}

impl DeltaModel {
    pub fn eval(&self, om: f64) -> f64 {
        match *self {
            DeltaModel::Gaussian { eps } => (-0.5 * (om / eps).powi(2)).exp() / ((2.0 * PI).sqrt() * eps),
            DeltaModel::Fejer { tau, lambda } => {
                let t = tau / (lambda * lambda);
                let x = 0.5 * t * om;
                if x.abs() < 1e-6 {
                    t / (2.0 * PI) * (1.0 - x * x / 3.0)
                } else {
                    2.0 * x.sin().powi(2) / (PI * t * om * om)
                }
            }
        }
    }

    fn cutoff(&self) -> f64 {
        match *self {
            DeltaModel::Gaussian { eps } => GAUSSIAN_CUTOFF * eps,
            DeltaModel::Fejer { .. } => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DeltaModel::Gaussian { eps } => eps > 0.0 && eps.is_finite(),
            DeltaModel::Fejer { tau, lambda } => tau > 0.0 && lambda > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid delta model {self:?}")))
        }
    }
}

/// `4 ×` the mean gap between the distinct values of `ω` on the grid.
pub fn default_eps(omega: &[f64]) -> f64 {
    let mut v = omega.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    if v.len() < 2 {
        return 1.0;
    }
    4.0 * (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
}

/// Grid, dispersion and energy-delta model for the collision sums.
#[derive(Clone, Debug)]
pub struct CollisionConfig {
    lattice: Lattice,
    omega: Vec<f64>,
    delta: DeltaModel,
    add: Vec<u32>,
    sub: Vec<u32>,
}

impl CollisionConfig {
    pub fn new(lattice: Lattice, omega: Vec<f64>, delta: DeltaModel) -> Result<Self> {
        let v = lattice.volume();
        if omega.len() != v {
            return Err(Error::Mismatch(format!("ω has {} entries for {v} modes", omega.len())));
        }
        delta.validate()?;
        let mut add = vec![0u32; v * v];
        let mut sub = vec![0u32; v * v];
        for a in 0..v {
            for b in 0..v {
                add[a * v + b] = lattice.add(a, b) as u32;
                sub[a * v + b] = lattice.sub(a, b) as u32;
            }
        }
        Ok(CollisionConfig {
            lattice,
            omega,
            delta,
            add,
            sub,
        })
    }

    /// Gaussian delta of width [`default_eps`].
    pub fn with_default_delta(lattice: Lattice, omega: Vec<f64>) -> Result<Self> {
        let eps = default_eps(&omega);
        CollisionConfig::new(lattice, omega, DeltaModel::Gaussian { eps })
    }

    pub fn with_delta(&self, delta: DeltaModel) -> Result<Self> {
        delta.validate()?;
        let mut c = self.clone();
        c.delta = delta;
        Ok(c)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn delta(&self) -> DeltaModel {
        self.delta
    }

    fn check(&self, w: &Spectrum) -> Result<()> {
        if w.lattice != self.lattice {
            return Err(Error::Mismatch("spectrum and collision grids differ".into()));
        }
        w.check_nonnegative()
    }

    /// `Σ_{k₁,k₂} kernel(Ω) · f(k₁,k₂,k₃)` for a fixed `k`, in a fixed order.
    fn resonant_sum<K, F>(&self, k: usize, kernel: &K, f: F) -> f64
    where
        K: Fn(f64) -> f64,
        F: Fn(usize, usize, usize) -> f64,
    {
        let v = self.lattice.volume();
        let cut = self.delta.cutoff();
        let om = &self.omega;
        let mut acc = 0.0;
        for k1 in 0..v {
            let s = self.add[k * v + k1] as usize;
            let base = om[k] + om[k1];
            let row = &self.sub[s * v..(s + 1) * v];
            for (k2, &k3) in row.iter().enumerate() {
                let k3 = k3 as usize;
                let o = base - om[k2] - om[k3];
                if o.abs() > cut {
                    continue;
                }
                acc += kernel(o) * f(k1, k2, k3);
            }
        }
        acc
    }

    fn per_mode<F: Fn(usize) -> f64 + Sync + Send>(&self, f: F) -> Vec<f64> {
        (0..self.lattice.volume()).into_par_iter().map(f).collect()
    }

    fn spectrum(&self, values: Vec<f64>) -> Spectrum {
        Spectrum {
            lattice: self.lattice,
            values,
            stderr: None,
        }
    }
}

fn bracket(w: &[f64], k: usize, k1: usize, k2: usize, k3: usize) -> f64 {
    let (w0, w1, w2, w3) = (w[k], w[k1], w[k2], w[k3]);
    w1 * w2 * w3 + w0 * (w2 * w3 - w1 * w3 - w1 * w2)
}

fn collision_values(w: &[f64], cfg: &CollisionConfig) -> Vec<f64> {
    let s = 4.0 * PI / (cfg.lattice.volume() as f64).powi(2);
    let delta = cfg.delta;
    let kernel = move |o: f64| delta.eval(o);
    cfg.per_mode(|k| s * cfg.resonant_sum(k, &kernel, |k1, k2, k3| bracket(w, k, k1, k2, k3)))
}

/// `𝒞(W)` on the grid.
pub fn collision_operator(w: &Spectrum, cfg: &CollisionConfig) -> Result<Spectrum> {
    cfg.check(w)?;
    Ok(cfg.spectrum(collision_values(&w.values, cfg)))
}

/// The gain part `4π L^{−2d} Σ δ(Ω) W₁W₂W₃`; `𝒞 = gain − 2WΓ`.
pub fn collision_gain(w: &Spectrum, cfg: &CollisionConfig) -> Result<Spectrum> {
    cfg.check(w)?;
    let s = 4.0 * PI / (cfg.lattice.volume() as f64).powi(2);
    let delta = cfg.delta;
    let kernel = move |o: f64| delta.eval(o);
    let v = &w.values;
    Ok(cfg.spectrum(cfg.per_mode(|k| s * cfg.resonant_sum(k, &kernel, |k1, k2, k3| v[k1] * v[k2] * v[k3]))))
}

/// `Γ(W)(k) = −2π L^{−2d} Σ δ(Ω) [W₂W₃ − W₁W₃ − W₁W₂]`, the real part of the
/// one-sided time integral; the principal-value part is not included.
pub fn gamma_rate(w: &Spectrum, cfg: &CollisionConfig) -> Result<Spectrum> {
    cfg.check(w)?;
    Ok(cfg.spectrum(gamma_values(&w.values, cfg)))
}

fn gamma_values(v: &[f64], cfg: &CollisionConfig) -> Vec<f64> {
    let s = -2.0 * PI / (cfg.lattice.volume() as f64).powi(2);
    let delta = cfg.delta;
    let kernel = move |o: f64| delta.eval(o);
    cfg.per_mode(|k| s * cfg.resonant_sum(k, &kernel, |k1, k2, k3| v[k2] * v[k3] - v[k1] * v[k3] - v[k1] * v[k2]))
}

/// `∫_{|r|≤T} (τ − λ²|r|) e^{irΩ} dr = 2λ²(1 − cos TΩ)/Ω²`, `T = τ/λ²`.
pub fn window(om: f64, tau: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let t = tau / l2;
    let x = 0.5 * t * om;
    if x.abs() < 1e-6 {
        tau * tau / l2 * (1.0 - x * x / 3.0)
    } else {
        4.0 * l2 * x.sin().powi(2) / (om * om)
    }
}

/// First-pairing-order increment `W_t − W₀` at `t = τλ^{−2}`:
/// `2 L^{−2d} Σ_{k₁,k₂} window(Ω) [bracket]`.
pub fn prelimit_kernel(w: &Spectrum, lambda: f64, tau: f64, cfg: &CollisionConfig) -> Result<Spectrum> {
    if !(lambda > 0.0 && tau > 0.0) {
        return Err(Error::Config(format!("need λ, τ > 0, got λ = {lambda}, τ = {tau}")));
    }
    cfg.check(w)?;
    let unbounded = cfg.with_delta(DeltaModel::Fejer { tau, lambda })?;
    let s = 2.0 / (cfg.lattice.volume() as f64).powi(2);
    let kernel = move |o: f64| window(o, tau, lambda);
    let v = &w.values;
    Ok(cfg.spectrum(
        unbounded.per_mode(|k| s * unbounded.resonant_sum(k, &kernel, |k1, k2, k3| bracket(v, k, k1, k2, k3))),
    ))
}

/// `L^{−d} Σ_k W(k)`.
pub fn number(w: &[f64]) -> f64 {
    w.iter().sum::<f64>() / w.len() as f64
}

/// `L^{−d} Σ_k ω(k) W(k)`.
pub fn energy(w: &[f64], omega: &[f64]) -> f64 {
    w.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() / w.len() as f64
}

/// `L^{−d} Σ_k ln W(k)`.
pub fn entropy(w: &[f64]) -> f64 {
    w.iter().map(|x| x.ln()).sum::<f64>() / w.len() as f64
}

/// A kinetic trajectory with its conserved functionals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    pub spectra: Vec<Vec<f64>>,
    pub number: Vec<f64>,
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
}

impl Trajectory {
    fn start(w0: &[f64], omega: &[f64]) -> Self {
        Trajectory {
            taus: vec![0.0],
            spectra: vec![w0.to_vec()],
            number: vec![number(w0)],
            energy: vec![energy(w0, omega)],
            entropy: vec![entropy(w0)],
        }
    }

    fn push(&mut self, tau: f64, w: Vec<f64>, omega: &[f64]) {
        self.number.push(number(&w));
        self.energy.push(energy(&w, omega));
        self.entropy.push(entropy(&w));
        self.taus.push(tau);
        self.spectra.push(w);
    }

    /// `W_τ = W` at every `τ`.
    pub fn constant(w: &[f64], omega: &[f64], taus: &[f64]) -> Self {
        let mut t = Trajectory::start(w, omega);
        t.taus[0] = taus.first().copied().unwrap_or(0.0);
        for &tau in taus.iter().skip(1) {
            t.push(tau, w.to_vec(), omega);
        }
        t
    }

    pub fn last(&self) -> &[f64] {
        self.spectra.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Clamp threshold and rejection threshold of [`bp_solve`].
pub const CLAMP_BELOW: f64 = -1e-12;
pub const REJECT_BELOW: f64 = -1e-9;

/// `∂_τ W = 𝒞(W)` by fixed-step RK4.
pub fn bp_solve(w0: &Spectrum, cfg: &CollisionConfig, tau_end: f64, dtau: f64) -> Result<Trajectory> {
    cfg.check(w0)?;
    if !(dtau > 0.0) || !(tau_end >= 0.0) {
        return Err(Error::Config(format!("need Δτ > 0 and τ_end ≥ 0, got {dtau}, {tau_end}")));
    }
    let steps = (tau_end / dtau).round() as usize;
    let mut traj = Trajectory::start(&w0.values, &cfg.omega);
    let mut w = w0.values.clone();
    let axpy = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    for n in 0..steps {
        let k1 = collision_values(&w, cfg);
        let k2 = collision_values(&axpy(&w, &k1, 0.5 * dtau), cfg);
        let k3 = collision_values(&axpy(&w, &k2, 0.5 * dtau), cfg);
        let k4 = collision_values(&axpy(&w, &k3, dtau), cfg);
        let mut next: Vec<f64> = (0..w.len())
            .map(|i| w[i] + dtau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        for (i, x) in next.iter_mut().enumerate() {
            if *x < REJECT_BELOW {
                return Err(Error::Guard(format!(
                    "step {n} rejected: W({i}) = {x} < {REJECT_BELOW}; reduce Δτ"
                )));
            }
            if *x < 0.0 && *x >= CLAMP_BELOW {
                *x = 0.0;
            }
        }
        traj.push(dtau * (n + 1) as f64, next.clone(), &cfg.omega);
        w = next;
    }
    Ok(traj)
}

/// Time-correlation spectra `A_τ` along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDecay {
    pub taus: Vec<f64>,
    pub gammas: Vec<Vec<f64>>,
    pub closed: Vec<Vec<f64>>,
}

fn trajectory_gammas(traj: &Trajectory, cfg: &CollisionConfig) -> Result<Vec<Vec<f64>>> {
    let v = cfg.lattice.volume();
    if traj.spectra.is_empty() || traj.spectra.len() != traj.taus.len() {
        return Err(Error::Mismatch("trajectory is empty or has unmatched times".into()));
    }
    traj.spectra
        .iter()
        .map(|w| {
            if w.len() != v {
                Err(Error::Mismatch(format!("trajectory spectrum has {} modes, grid has {v}", w.len())))
            } else {
                Ok(gamma_values(w, cfg))
            }
        })
        .collect()
}

/// `A_τ(k) = W₀(k) exp(−∫_0^τ Γ(W_s)(k) ds)`, trapezoid over the stored times.
pub fn correlation_decay(traj: &Trajectory, cfg: &CollisionConfig) -> Result<CorrelationDecay> {
    let gammas = trajectory_gammas(traj, cfg)?;
    let w0 = &traj.spectra[0];
    let mut integral = vec![0.0; w0.len()];
    let mut closed = vec![w0.clone()];
    for n in 1..traj.taus.len() {
        let h = traj.taus[n] - traj.taus[n - 1];
        for (k, acc) in integral.iter_mut().enumerate() {
            *acc += 0.5 * h * (gammas[n - 1][k] + gammas[n][k]);
        }
        closed.push(w0.iter().zip(&integral).map(|(w, g)| w * (-g).exp()).collect());
    }
    Ok(CorrelationDecay {
        taus: traj.taus.clone(),
        gammas,
        closed,
    })
}

/// `∂_τ A = −A Γ(W_τ)` by RK4 with `substeps` per stored interval, `Γ`
/// linearly interpolated in `τ`.
pub fn correlation_decay_ode(traj: &Trajectory, cfg: &CollisionConfig, substeps: usize) -> Result<Vec<Vec<f64>>> {
    let gammas = trajectory_gammas(traj, cfg)?;
    let m = substeps.max(1);
    let mut a = traj.spectra[0].clone();
    let mut out = vec![a.clone()];
    for n in 1..traj.taus.len() {
        let h = (traj.taus[n] - traj.taus[n - 1]) / m as f64;
        let (g0, g1) = (&gammas[n - 1], &gammas[n]);
        for (k, ak) in a.iter_mut().enumerate() {
            let rate = |s: f64| g0[k] + (g1[k] - g0[k]) * s;
            let mut y = *ak;
            for j in 0..m {
                let s0 = j as f64 / m as f64;
                let ds = 1.0 / m as f64;
                let f1 = -y * rate(s0);
                let f2 = -(y + 0.5 * h * f1) * rate(s0 + 0.5 * ds);
                let f3 = -(y + 0.5 * h * f2) * rate(s0 + 0.5 * ds);
                let f4 = -(y + h * f3) * rate(s0 + ds);
                y += h / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
            }
            *ak = y;
        }
        out.push(a.clone());
    }
    Ok(out)
}

fn bound_exponent(fit: &PropagatorFit) -> Result<f64> {
    if !(fit.delta > 0.0) {
        return Err(Error::Guard(format!("fitted δ = {} ≤ 0: bound not applicable", fit.delta)));
    }
    Ok(0.5 * (1.0 + fit.delta))
}

/// `λ ‖κ₄‖₁ C ∫_0^t (1+s²)^{−(1+δ)/2} ds`.
pub fn cumulant_growth_bound(fit: &PropagatorFit, kappa4_norm: f64, lambda: f64, t: f64) -> Result<f64> {
    let a = bound_exponent(fit)?;
    let i = quadrature::integrate(|s| Complex64::new((1.0 + s * s).powf(-a), 0.0), 0.0, t, 1e-12)?;
    Ok(lambda * kappa4_norm * fit.c * i.re)
}

/// The `t → ∞` value of [`cumulant_growth_bound`], using
/// `∫_0^∞ (1+s²)^{−a} ds = √π Γ(a−½) / (2Γ(a))`.
pub fn cumulant_growth_bound_limit(fit: &PropagatorFit, kappa4_norm: f64, lambda: f64) -> Result<f64> {
    let a = bound_exponent(fit)?;
    let i = PI.sqrt() * libm::tgamma(a - 0.5) / (2.0 * libm::tgamma(a));
    Ok(lambda * kappa4_norm * fit.c * i)
}
