//! Discrete nonlinear Schrödinger equation on a periodic lattice,
//!
//! ```text
//! i ∂_t ψ(x) = Σ_y α(x−y) ψ(y) + λ |ψ(x)|² ψ(x),
//! ```
//!
//! random gauge- and translation-invariant initial ensembles, and the
//! spectral and cumulant diagnostics built on them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Dispersion, Lattice, LatticeFft};
use crate::stats::mean_stderr;

/// Largest admissible `Δt · max|ω|`.
pub const STEP_GUARD: f64 = 0.5;

/// A real function on the dual grid, optionally with standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.volume() {
            return Err(Error::Mismatch(format!(
                "spectrum has {} entries, lattice has {} modes",
                values.len(),
                lattice.volume()
            )));
        }
        Ok(Spectrum {
            lattice,
            values,
            stderr: None,
        })
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..lattice.volume()).map(|i| f(lattice.momentum(i))).collect();
        Spectrum {
            lattice,
            values,
            stderr: None,
        }
    }

    /// `∫ W dk = L^{−d} Σ_k W(k)`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.lattice.volume() as f64
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            Some((mode, &value)) => Err(Error::NegativeSpectrum { mode, value }),
            None => Ok(()),
        }
    }
}

/// `W^eql(k) = β^{−1} / (ω(k) − μ)`.
pub fn equilibrium(lattice: Lattice, omega: &[f64], beta: f64, mu: f64) -> Result<Spectrum> {
    let wmin = omega.iter().copied().fold(f64::INFINITY, f64::min);
    if beta <= 0.0 || mu >= wmin {
        return Err(Error::Config(format!("need β > 0 and μ < min ω = {wmin}, got β = {beta}, μ = {mu}")));
    }
    Spectrum::new(lattice, omega.iter().map(|w| 1.0 / (beta * (w - mu))).collect())
}

/// Lattice, dispersion and coupling of one DNLS model.
#[derive(Clone, Debug)]
pub struct Dnls {
    lattice: Lattice,
    omega: Vec<f64>,
    lambda: f64,
    fft: LatticeFft,
}

impl Dnls {
    pub fn new(lattice: Lattice, dispersion: &Dispersion, lambda: f64) -> Result<Self> {
        dispersion.validate()?;
        Ok(Dnls {
            lattice,
            omega: dispersion.omega(&lattice),
            lambda,
            fft: LatticeFft::new(lattice),
        })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn fft(&self) -> &LatticeFft {
        &self.fft
    }

    pub fn fourier(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut h = psi.to_vec();
        self.fft.forward(&mut h);
        h
    }

    /// `∂_t ψ = −i(αψ + λ|ψ|²ψ)`, hopping applied in Fourier space.
    pub fn rhs(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut h = self.fourier(psi);
        for (z, w) in h.iter_mut().zip(&self.omega) {
            *z *= *w;
        }
        self.fft.inverse(&mut h);
        let mi = Complex64::new(0.0, -1.0);
        h.iter()
            .zip(psi)
            .map(|(hop, p)| mi * (hop + p * (self.lambda * p.norm_sqr())))
            .collect()
    }

    pub fn mass(psi: &[Complex64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `H = L^{−d} Σ_k ω(k)|ψ̂(k)|² + (λ/2) Σ_x |ψ(x)|⁴`.
    pub fn hamiltonian(&self, psi: &[Complex64]) -> f64 {
        let h = self.fourier(psi);
        let kin: f64 = h.iter().zip(&self.omega).map(|(z, w)| w * z.norm_sqr()).sum::<f64>()
            / self.lattice.volume() as f64;
        let pot: f64 = psi.iter().map(|z| z.norm_sqr().powi(2)).sum();
        kin + 0.5 * self.lambda * pot
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        let wmax = self.omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        if !(dt > 0.0) || dt * wmax > STEP_GUARD {
            return Err(Error::Guard(format!("Δt·max|ω| = {} exceeds {STEP_GUARD}", dt * wmax)));
        }
        Ok(())
    }

    fn nonlinear(&self, psi: &mut [Complex64], h: f64) {
        for z in psi.iter_mut() {
            *z *= Complex64::new(0.0, -self.lambda * z.norm_sqr() * h).exp();
        }
    }

    /// One Strang step: half nonlinear, full linear, half nonlinear.
    pub fn step(&self, psi: &mut [Complex64], phases: &[Complex64], dt: f64) {
        self.nonlinear(psi, 0.5 * dt);
        self.fft.forward(psi);
        for (z, p) in psi.iter_mut().zip(phases) {
            *z *= p;
        }
        self.fft.inverse(psi);
        self.nonlinear(psi, 0.5 * dt);
    }

    fn linear_phases(&self, dt: f64) -> Vec<Complex64> {
        self.omega.iter().map(|w| Complex64::new(0.0, -w * dt).exp()).collect()
    }

    pub fn integrate(&self, state: &FieldState, dt: f64, steps: usize) -> Result<FieldState> {
        self.check_step(dt)?;
        let phases = self.linear_phases(dt);
        let mut psi = state.psi.clone();
        for _ in 0..steps {
            self.step(&mut psi, &phases, dt);
        }
        Ok(FieldState {
            psi,
            t: state.t + dt * steps as f64,
        })
    }
}

/// One field configuration `ψ(x)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub psi: Vec<Complex64>,
    pub t: f64,
}

/// Initial-law families for [`sample_initial`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    FixedModulus,
}

/// Independent realizations with a shared time, reproducible from
/// `(seed, index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub lattice: Lattice,
    pub seed: u64,
    pub t: f64,
    pub fields: Vec<Vec<Complex64>>,
    /// `(t, R_t)` with `R_t = 2E|ψ_t(x)|²`, one entry per accepted step.
    pub history: Vec<(f64, f64)>,
}

/// The generator of realization `index` under master seed `seed`.
pub fn realization_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One realization of the initial law; see [`sample_initial`].
pub fn sample_realization(fft: &LatticeFft, w0: &Spectrum, seed: u64, index: usize, family: Family) -> Vec<Complex64> {
    let vol = w0.lattice.volume() as f64;
    let mut rng = realization_rng(seed, index);
    let mut hat: Vec<Complex64> = w0
        .values
        .iter()
        .map(|&w| match family {
            Family::Gaussian => {
                let s = (0.5 * vol * w).sqrt();
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                Complex64::new(s * a, s * b)
            }
            Family::FixedModulus => {
                let th: f64 = rng.random::<f64>() * 2.0 * PI;
                Complex64::from_polar((vol * w).sqrt(), th)
            }
        })
        .collect();
    fft.inverse(&mut hat);
    hat
}

/// Fourier modes independent with `E|ψ̂(k)|² = L^d W₀(k)`: circular Gaussian,
/// or fixed modulus `(L^d W₀)^{1/2}` with uniform phases.
pub fn sample_initial(lattice: Lattice, w0: &Spectrum, n: usize, seed: u64, family: Family) -> Result<Ensemble> {
    if w0.lattice != lattice {
        return Err(Error::Mismatch("spectrum lattice differs from ensemble lattice".into()));
    }
    w0.check_nonnegative()?;
    let fft = LatticeFft::new(lattice);
    let fields: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| sample_realization(&fft, w0, seed, i, family))
        .collect();
    let mut ens = Ensemble {
        lattice,
        seed,
        t: 0.0,
        fields,
        history: Vec::new(),
    };
    ens.history.push((0.0, ens.r_value()));
    Ok(ens)
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// `R = 2E|ψ(x)|²` estimated over realizations and sites.
    pub fn r_value(&self) -> f64 {
        let vol = self.lattice.volume() as f64;
        let per: Vec<f64> = self.fields.iter().map(|f| Dnls::mass(f) / vol).collect();
        2.0 * per.iter().sum::<f64>() / per.len().max(1) as f64
    }

    /// Evolve every realization by `steps` Strang steps, recording `R_t`.
    pub fn evolve(&mut self, model: &Dnls, dt: f64, steps: usize) -> Result<()> {
        model.check_step(dt)?;
        if model.lattice() != self.lattice {
            return Err(Error::Mismatch("model lattice differs from ensemble lattice".into()));
        }
        let phases = model.linear_phases(dt);
        let vol = self.lattice.volume() as f64;
        let masses: Vec<Vec<f64>> = self
            .fields
            .par_iter_mut()
            .map(|psi| {
                let mut m = Vec::with_capacity(steps);
                for _ in 0..steps {
                    model.step(psi, &phases, dt);
                    m.push(Dnls::mass(psi) / vol);
                }
                m
            })
            .collect();
        let n = masses.len().max(1) as f64;
        for s in 0..steps {
            let r = 2.0 * masses.iter().map(|m| m[s]).sum::<f64>() / n;
            self.history.push((self.t + dt * (s + 1) as f64, r));
        }
        self.t += dt * steps as f64;
        Ok(())
    }

    pub fn fourier_fields(&self) -> Vec<Vec<Complex64>> {
        let fft = LatticeFft::new(self.lattice);
        self.fields
            .par_iter()
            .map(|f| {
                let mut h = f.clone();
                fft.forward(&mut h);
                h
            })
            .collect()
    }
}

/// `W(k) = E|ψ̂(k)|² / L^d` with standard errors of the ensemble mean.
pub fn estimate_w(ens: &Ensemble) -> Result<Spectrum> {
    if ens.len() < 2 {
        return Err(Error::DegenerateEnsemble(ens.len()));
    }
    let vol = ens.lattice.volume();
    let hats = ens.fourier_fields();
    let mut values = vec![0.0; vol];
    let mut errs = vec![0.0; vol];
    let mut col = vec![0.0; hats.len()];
    for k in 0..vol {
        for (c, h) in col.iter_mut().zip(&hats) {
            *c = h[k].norm_sqr() / vol as f64;
        }
        let (m, e) = mean_stderr(&col);
        values[k] = m;
        errs[k] = e;
    }
    Ok(Spectrum {
        lattice: ens.lattice,
        values,
        stderr: Some(errs),
    })
}

/// `∫_0^t ω^λ_s(k) ds = tω(k) + λ∫_0^t R_s ds`, trapezoid over the history.
pub fn accumulated_phase(omega: &[f64], lambda: f64, history: &[(f64, f64)]) -> Result<Vec<f64>> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Config("renormalization needs a recorded R history".into())),
    };
    let t = last.0 - first.0;
    let int_r: f64 = history.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    Ok(omega.iter().map(|w| w * t + lambda * int_r).collect())
}

/// `a_t(k,σ) = ψ̂_t(k,σ) exp(iσ∫_0^t ω^λ_s(k) ds)` with `ψ̂(k,−1) = ψ̂(−k)*`.
pub fn renormalize_a(
    lattice: Lattice,
    psi_hat: &[Complex64],
    sigma: i8,
    omega: &[f64],
    lambda: f64,
    history: &[(f64, f64)],
) -> Result<Vec<Complex64>> {
    let phase = accumulated_phase(omega, lambda, history)?;
    let n = lattice.volume();
    if psi_hat.len() != n || omega.len() != n {
        return Err(Error::Mismatch("field and dispersion grids differ".into()));
    }
    Ok((0..n)
        .map(|k| {
            let base = if sigma >= 0 { psi_hat[k] } else { psi_hat[lattice.neg(k)].conj() };
            let s = if sigma >= 0 { 1.0 } else { -1.0 };
            base * Complex64::new(0.0, s * phase[k]).exp()
        })
        .collect())
}

/// One non-σ-balanced moment tested by [`gauge_audit`].
#[derive(Clone, Debug, PartialEq)]
pub struct AuditEntry {
    /// `(site, σ)` factors; sites index the probe set `{0, e₁}`.
    pub factors: Vec<(usize, i8)>,
    pub mean: Complex64,
    pub z: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeReport {
    pub entries: Vec<AuditEntry>,
    pub threshold: f64,
}

impl GaugeReport {
    pub fn flagged(&self) -> usize {
        self.entries.iter().filter(|e| e.flagged).count()
    }
}

fn factor_multisets(types: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, types: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for t in start..types {
            cur.push(t);
            rec(t, types, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(0, types, max_order, &mut cur, &mut out);
    out
}

/// Flag every non-σ-balanced moment up to `max_order` on the probe sites
/// `{0, e₁}` whose translation-averaged ensemble mean lies beyond 4 standard
/// errors from zero.
pub fn gauge_audit(ens: &Ensemble, max_order: usize) -> Result<GaugeReport> {
    if ens.len() < 2 {
        return Err(Error::DegenerateEnsemble(ens.len()));
    }
    let threshold = 4.0;
    let lat = ens.lattice;
    let vol = lat.volume();
    let e1 = lat.unit(0);
    let probe = [0usize, e1];
    let mut entries = Vec::new();
    for ms in factor_multisets(4, max_order) {
        let factors: Vec<(usize, i8)> = ms.iter().map(|t| (t / 2, if t % 2 == 0 { 1 } else { -1 })).collect();
        let balance: i32 = factors.iter().map(|f| f.1 as i32).sum();
        if balance == 0 {
            continue;
        }
        let per: Vec<Complex64> = ens
            .fields
            .par_iter()
            .map(|psi| {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..vol {
                    let mut p = Complex64::new(1.0, 0.0);
                    for &(s, sg) in &factors {
                        let z = psi[lat.add(x, probe[s])];
                        p *= if sg > 0 { z } else { z.conj() };
                    }
                    acc += p;
                }
                acc / vol as f64
            })
            .collect();
        let re: Vec<f64> = per.iter().map(|z| z.re).collect();
        let im: Vec<f64> = per.iter().map(|z| z.im).collect();
        let (mr, er) = mean_stderr(&re);
        let (mi, ei) = mean_stderr(&im);
        let zr = if er > 0.0 { mr.abs() / er } else if mr == 0.0 { 0.0 } else { f64::INFINITY };
        let zi = if ei > 0.0 { mi.abs() / ei } else if mi == 0.0 { 0.0 } else { f64::INFINITY };
        let z = zr.max(zi);
        entries.push(AuditEntry {
            factors,
            mean: Complex64::new(mr, mi),
            z,
            flagged: z > threshold,
        });
    }
    Ok(GaugeReport { entries, threshold })
}

/// Empirical `L^{−d} E[ψ̂(p)* ψ̂(q)]` for all mode pairs, with standard errors
/// of the real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCovariance {
    pub modes: usize,
    pub mean: Vec<Complex64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
}

impl ModeCovariance {
    pub fn at(&self, p: usize, q: usize) -> (Complex64, f64, f64) {
        let i = p * self.modes + q;
        (self.mean[i], self.stderr_re[i], self.stderr_im[i])
    }
}

pub fn mode_covariance(ens: &Ensemble) -> Result<ModeCovariance> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::DegenerateEnsemble(n));
    }
    let v = ens.lattice.volume();
    let hats = ens.fourier_fields();
    let s = 1.0 / v as f64;
    let mut sum = vec![Complex64::new(0.0, 0.0); v * v];
    let mut sq_re = vec![0.0; v * v];
    let mut sq_im = vec![0.0; v * v];
    for h in &hats {
        for p in 0..v {
            let cp = h[p].conj() * s;
            let row = p * v;
            for q in 0..v {
                let z = cp * h[q];
                sum[row + q] += z;
                sq_re[row + q] += z.re * z.re;
                sq_im[row + q] += z.im * z.im;
            }
        }
    }
    let nf = n as f64;
    let se = |sq: f64, m: f64| (((sq - nf * m * m) / (nf - 1.0)).max(0.0) / nf).sqrt();
    let mean: Vec<Complex64> = sum.iter().map(|z| z / nf).collect();
    let stderr_re = (0..v * v).map(|i| se(sq_re[i], mean[i].re)).collect();
    let stderr_im = (0..v * v).map(|i| se(sq_im[i], mean[i].im)).collect();
    Ok(ModeCovariance {
        modes: v,
        mean,
        stderr_re,
        stderr_im,
    })
}

/// `p_t(x) = L^{−d} Σ_k e^{i2πk·x} e^{−itω(k)}`.
pub fn free_propagator(lattice: Lattice, omega: &[f64], t: f64) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = omega.iter().map(|w| Complex64::new(0.0, -t * w).exp()).collect();
    LatticeFft::new(lattice).inverse(&mut p);
    p
}

/// `‖p‖₃³ = Σ_x |p(x)|³`.
pub fn l3_cubed(p: &[Complex64]) -> f64 {
    p.iter().map(|z| z.norm().powi(3)).sum()
}

/// Constants of the decay bound `‖p_t‖₃³ ≤ C (1+t²)^{−(1+δ)/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorFit {
    pub c: f64,
    pub delta: f64,
}

/// Least-squares slope of `ln ‖p_t‖₃³` against `ln(1+t²)` gives `δ`; `C` is
/// then the smallest constant for which the bound holds at every sample.
pub fn fit_propagator_decay(ts: &[f64], norms: &[f64]) -> Result<PropagatorFit> {
    if ts.len() != norms.len() || ts.len() < 2 {
        return Err(Error::Config("need at least two (t, norm) samples".into()));
    }
    if norms.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Guard("non-positive propagator norm".into()));
    }
    let xs: Vec<f64> = ts.iter().map(|t| (1.0 + t * t).ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("degenerate time grid".into()));
    }
    let a = -sxy / sxx;
    let delta = 2.0 * a - 1.0;
    let c = xs.iter().zip(&ys).map(|(x, y)| (y + a * x).exp()).fold(0.0, f64::max);
    Ok(PropagatorFit { c, delta })
}

/// A cumulant `κ_n(ψ(0,σ₁), ψ(x₂,σ₂), …)` with the first argument pinned at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct PinnedCumulant {
    pub sigmas: Vec<i8>,
    /// `x₂, …, x_n` as flat lattice indices.
    pub sites: Vec<usize>,
    pub value: Complex64,
}

/// `sup_σ Σ_{x₂..x_n} |κ_n|` over the order-`n` entries.
pub fn clustering_norm(table: &[PinnedCumulant], n: usize) -> f64 {
    let mut sums: std::collections::BTreeMap<&[i8], f64> = Default::default();
    for e in table.iter().filter(|e| e.sigmas.len() == n) {
        *sums.entry(&e.sigmas).or_default() += e.value.norm();
    }
    sums.values().copied().fold(0.0, f64::max)
}

/// `κ(ψ(0)*, ψ(x)) = W̌(x)` and its conjugate, for a gauge-invariant field with spectrum `W`.
pub fn covariance_table(w: &Spectrum) -> Vec<PinnedCumulant> {
    let lat = w.lattice;
    let mut c: Vec<Complex64> = w.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    LatticeFft::new(lat).inverse(&mut c);
    pair_table(&c)
}

fn pair_table(c: &[Complex64]) -> Vec<PinnedCumulant> {
    let mut out = Vec::with_capacity(2 * c.len());
    for (x, &v) in c.iter().enumerate() {
        out.push(PinnedCumulant {
            sigmas: vec![-1, 1],
            sites: vec![x],
            value: v,
        });
        out.push(PinnedCumulant {
            sigmas: vec![1, -1],
            sites: vec![x],
            value: v.conj(),
        });
    }
    out
}

/// Translation-averaged empirical `κ(ψ(0)*, ψ(x))`.
pub fn empirical_covariance_table(ens: &Ensemble) -> Result<Vec<PinnedCumulant>> {
    if ens.len() < 2 {
        return Err(Error::DegenerateEnsemble(ens.len()));
    }
    let lat = ens.lattice;
    let vol = lat.volume() as f64;
    let fft = LatticeFft::new(lat);
    let mut acc = vec![Complex64::new(0.0, 0.0); lat.volume()];
    for f in &ens.fields {
        let mut h = f.clone();
        fft.forward(&mut h);
        let mut pw: Vec<Complex64> = h.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
        fft.inverse(&mut pw);
        for (a, p) in acc.iter_mut().zip(&pw) {
            *a += p / vol;
        }
    }
    let n = ens.len() as f64;
    let acc: Vec<Complex64> = acc.iter().map(|z| z / n).collect();
    Ok(pair_table(&acc))
}

/// Empirical `κ₄(ψ(0)*, ψ(x₂)*, ψ(x₃), ψ(x₄))` over all `x₂, x₃, x₄`, using
/// that σ-unbalanced moments vanish. Cost is `L^{3d}` per realization.
pub fn empirical_kappa4_table(ens: &Ensemble) -> Result<Vec<PinnedCumulant>> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::DegenerateEnsemble(n));
    }
    let v = ens.lattice.volume();
    if v > 64 {
        return Err(Error::Guard(format!("fourth-order table on {v} sites is too large")));
    }
    let mut pair = vec![Complex64::new(0.0, 0.0); v * v];
    let mut four = vec![Complex64::new(0.0, 0.0); v * v * v];
    for f in &ens.fields {
        let c0 = f[0].conj();
        for a in 0..v {
            for b in 0..v {
                pair[a * v + b] += f[a].conj() * f[b];
            }
        }
        for x2 in 0..v {
            let c02 = c0 * f[x2].conj();
            for x3 in 0..v {
                let c = c02 * f[x3];
                for x4 in 0..v {
                    four[(x2 * v + x3) * v + x4] += c * f[x4];
                }
            }
        }
    }
    let nf = n as f64;
    let e2 = |a: usize, b: usize| pair[a * v + b] / nf;
    let mut out = Vec::with_capacity(v * v * v);
    for x2 in 0..v {
        for x3 in 0..v {
            for x4 in 0..v {
                let m = four[(x2 * v + x3) * v + x4] / nf;
                let k = m - e2(0, x3) * e2(x2, x4) - e2(0, x4) * e2(x2, x3);
                out.push(PinnedCumulant {
                    sigmas: vec![-1, -1, 1, 1],
                    sites: vec![x2, x3, x4],
                    value: k,
                });
            }
        }
    }
    Ok(out)
}

/// Translation-averaged `κ₄(ψ*,ψ*,ψ,ψ)` at coinciding sites with its standard error.
pub fn site_kappa4(ens: &Ensemble) -> Result<(f64, f64)> {
    let n = ens.len();
    if n < 3 {
        return Err(Error::DegenerateEnsemble(n));
    }
    let vol = ens.lattice.volume() as f64;
    let m2: Vec<f64> = ens.fields.iter().map(|f| f.iter().map(|z| z.norm_sqr()).sum::<f64>() / vol).collect();
    let m4: Vec<f64> = ens
        .fields
        .iter()
        .map(|f| f.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() / vol)
        .collect();
    let (s2, s4): (f64, f64) = (m2.iter().sum(), m4.iter().sum());
    let nf = n as f64;
    let kappa = |s2: f64, s4: f64, cnt: f64| s4 / cnt - 2.0 * (s2 / cnt).powi(2);
    let full = kappa(s2, s4, nf);
    let loo: Vec<f64> = (0..n).map(|i| kappa(s2 - m2[i], s4 - m4[i], nf - 1.0)).collect();
    let mean_loo = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|x| (x - mean_loo).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    Ok((full, var.sqrt()))
}
