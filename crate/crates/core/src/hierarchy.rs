//! Cumulant dynamics for evolution equations written in Wick form,
//!
//! ```text
//! ∂_t y_j = Σ_{I ∈ 𝓘_j} M^I_j(t) ⟨⟨y^I⟩⟩ ,
//! ```
//!
//! with deterministic amplitudes. The cumulant hierarchy is closed by
//! setting every cumulant above the truncation order to zero.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::cumulants::{binomial, multisets, moments_from_cumulants, CumulantSource, CumulantTable, Provenance};
use crate::error::{Error, Result};
use crate::indexing::{Key, Label, LabeledSeq, Var};
use crate::quadrature;
use crate::wick::wick_product_expectation_from;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Time dependence of one interaction amplitude `M^I_j(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Amplitude {
    Constant(Complex64),
    /// `coeff · e^{iΩt}`
    Phase { coeff: Complex64, omega: f64 },
    /// Piecewise-linear interpolation of `(t, value)` knots, constant outside.
    Table(Vec<(f64, Complex64)>),
    /// `Σ c · E[y^monomial]` over the current state's moments.
    StateMoments(Vec<(Complex64, Vec<Var>)>),
}

impl Amplitude {
    pub fn eval<S: CumulantSource + ?Sized>(&self, t: f64, state: &S) -> Result<Complex64> {
        match self {
            Amplitude::Constant(c) => Ok(*c),
            Amplitude::Phase { coeff, omega } => Ok(coeff * Complex64::new(0.0, omega * t).exp()),
            Amplitude::Table(knots) => Ok(interpolate(knots, t)),
            Amplitude::StateMoments(terms) => {
                let mut acc = ZERO;
                for (c, mono) in terms {
                    acc += c * moments_from_cumulants(state, &LabeledSeq::from_vars(mono))?;
                }
                Ok(acc)
            }
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        matches!(self, Amplitude::StateMoments(_))
    }
}

fn interpolate(knots: &[(f64, Complex64)], t: f64) -> Complex64 {
    match knots {
        [] => ZERO,
        [(_, v)] => *v,
        _ => {
            if t <= knots[0].0 {
                return knots[0].1;
            }
            for w in knots.windows(2) {
                let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                if t <= t1 {
                    let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
                    return v0 + (v1 - v0) * s;
                }
            }
            knots[knots.len() - 1].1
        }
    }
}

/// One term `M^I_j(t) ⟨⟨y^I⟩⟩` of the evolution of `y_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub seq: LabeledSeq,
    pub amplitude: Amplitude,
}

/// Finite interaction families `𝓘_j` for every variable `j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AmplitudeModel {
    vars: Vec<Var>,
    terms: BTreeMap<Var, Vec<Interaction>>,
}

impl AmplitudeModel {
    pub fn new(mut vars: Vec<Var>) -> Self {
        vars.sort_unstable();
        vars.dedup();
        AmplitudeModel {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn add(&mut self, j: Var, seq: &[Var], amplitude: Amplitude) -> Result<()> {
        if !self.vars.contains(&j) {
            return Err(Error::InvalidModel(format!("{j:?} is not a model variable")));
        }
        if let Some(v) = seq.iter().find(|v| !self.vars.contains(v)) {
            return Err(Error::InvalidModel(format!("interaction uses unknown variable {v:?}")));
        }
        self.terms.entry(j).or_default().push(Interaction {
            seq: LabeledSeq::from_vars(seq),
            amplitude,
        });
        Ok(())
    }

    pub fn interactions(&self, j: Var) -> &[Interaction] {
        self.terms.get(&j).map_or(&[], Vec::as_slice)
    }

    /// Every `(j, interaction)` pair, ordered by `j`.
    pub fn iter(&self) -> impl Iterator<Item = (Var, &Interaction)> {
        self.terms.iter().flat_map(|(j, v)| v.iter().map(move |i| (*j, i)))
    }

    /// Largest `|I|` over all interactions.
    pub fn max_interaction_len(&self) -> usize {
        self.terms
            .values()
            .flat_map(|v| v.iter().map(|i| i.seq.len()))
            .max()
            .unwrap_or(0)
    }
}

/// Cumulants of `y(t)` up to the truncation order, with closure above it.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyState {
    pub table: CumulantTable,
    pub n_max: usize,
    pub t: f64,
}

impl HierarchyState {
    pub fn new(table: CumulantTable, n_max: usize, t: f64) -> Self {
        HierarchyState { table, n_max, t }
    }

    /// Tabulate all multisets of `vars` up to `n_max` from a source.
    pub fn from_source<S: CumulantSource + ?Sized>(src: &S, vars: &[Var], n_max: usize, t: f64) -> Result<Self> {
        let mut table = CumulantTable::new(Provenance::Analytic);
        for key in multisets(vars, n_max) {
            table.insert(key.vars(), src.cumulant(key.vars())?);
        }
        Ok(HierarchyState { table, n_max, t })
    }

    pub fn keys(&self) -> Vec<Key> {
        self.table
            .iter()
            .filter(|(k, _)| k.len() <= self.n_max)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

impl CumulantSource for HierarchyState {
    fn cumulant(&self, vars: &[Var]) -> Result<Complex64> {
        if vars.len() > self.n_max {
            return Ok(ZERO);
        }
        self.table.cumulant(vars)
    }
}

fn check_target(state: &HierarchyState, target: &LabeledSeq) -> Result<()> {
    if target.is_empty() {
        return Err(Error::EmptySequence);
    }
    if target.len() > state.n_max {
        return Err(Error::OrderExceeded {
            needed: target.len(),
            available: state.n_max,
        });
    }
    Ok(())
}

/// `E[⟨⟨y^I⟩⟩ ⟨⟨y^{I′∖i}⟩⟩]` expanded into the state's cumulants.
pub fn pair_expectation<S: CumulantSource + ?Sized>(state: &S, inter: &LabeledSeq, rest: &LabeledSeq) -> Result<Complex64> {
    wick_product_expectation_from(state, &[inter.clone(), rest.clone()], &LabeledSeq::empty())
}

/// `∂_t κ[y(t)_{I′}] = Σ_{i∈I′} Σ_{I∈𝓘_i} M^I_i(t) E[⟨⟨y^I⟩⟩⟨⟨y^{I′∖i}⟩⟩]`.
pub fn hierarchy_rhs(model: &AmplitudeModel, state: &HierarchyState, target: &LabeledSeq) -> Result<Complex64> {
    check_target(state, target)?;
    let mut acc = ZERO;
    for pos in 0..target.len() {
        let rest = target.cancel_at(pos);
        for inter in model.interactions(target.var_at(pos)) {
            let m = inter.amplitude.eval(state.t, state)?;
            if m == ZERO {
                continue;
            }
            acc += m * pair_expectation(state, &inter.seq, &rest)?;
        }
    }
    Ok(acc)
}

/// Right-hand side for every tabulated cumulant of the state.
pub fn hierarchy_rhs_table(model: &AmplitudeModel, state: &HierarchyState) -> Result<CumulantTable> {
    let mut out = CumulantTable::new(Provenance::Analytic);
    for key in state.keys() {
        let v = hierarchy_rhs(model, state, &LabeledSeq::from_vars(key.vars()))?;
        out.insert(key.vars(), v);
    }
    Ok(out)
}

/// Fixed-step RK4 integration of the closed hierarchy.
pub fn evolve(model: &AmplitudeModel, state: &HierarchyState, dt: f64, steps: usize) -> Result<HierarchyState> {
    let keys = state.keys();
    let mut cur = state.clone();
    let with = |base: &HierarchyState, delta: &[Complex64], s: f64, t: f64| {
        let mut next = base.clone();
        for ((_, v), d) in next.table.iter_mut().zip(delta) {
            *v += d * s;
        }
        next.t = t;
        next
    };
    let rhs = |st: &HierarchyState| -> Result<Vec<Complex64>> {
        keys.iter()
            .map(|k| hierarchy_rhs(model, st, &LabeledSeq::from_vars(k.vars())))
            .collect()
    };
    for _ in 0..steps {
        let t0 = cur.t;
        let k1 = rhs(&cur)?;
        let k2 = rhs(&with(&cur, &k1, dt / 2.0, t0 + dt / 2.0))?;
        let k3 = rhs(&with(&cur, &k2, dt / 2.0, t0 + dt / 2.0))?;
        let k4 = rhs(&with(&cur, &k3, dt, t0 + dt))?;
        let incr: Vec<Complex64> = (0..keys.len())
            .map(|i| (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) / 6.0)
            .collect();
        cur = with(&cur, &incr, dt, t0 + dt);
    }
    Ok(cur)
}

/// One iteration of the Duhamel expansion around the initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct DuhamelExpansion {
    /// `κ[y_{I′}](0)`
    pub zeroth: Complex64,
    /// `Σ_i Σ_I E[⟨⟨y^I⟩⟩⟨⟨y^{I′∖i}⟩⟩]_0 ∫_0^t M^I_i`
    pub first: Complex64,
    /// Integrands `∫_0^t ds′ ∂_{s′}E[…](s′) ∫_{s′}^t M` left for the next iteration.
    pub remainder: Vec<RemainderTerm>,
}

/// Descriptor of one remainder integrand of [`DuhamelExpansion`].
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderTerm {
    /// Label of the element `i ∈ I′` whose evolution is expanded.
    pub label: Label,
    pub var: Var,
    /// `I ∈ 𝓘_i`
    pub interaction: LabeledSeq,
    /// `I′ ∖ i`
    pub rest: LabeledSeq,
    pub amplitude: Amplitude,
    /// `∫_0^t M^I_i`, the weight of the first-order term.
    pub integral: Complex64,
}

impl RemainderTerm {
    /// `∫_{s′}^{t} M^I_i(s) ds`, the kernel multiplying `∂_{s′}E[…]`.
    pub fn tail_weight<S: CumulantSource + ?Sized>(&self, state: &S, from: f64, to: f64, tol: f64) -> Result<Complex64> {
        integrate_amplitude(&self.amplitude, state, from, to, tol)
    }
}

fn integrate_amplitude<S: CumulantSource + ?Sized>(amp: &Amplitude, state: &S, from: f64, to: f64, tol: f64) -> Result<Complex64> {
    match amp {
        Amplitude::Constant(c) => Ok(c * (to - from)),
        Amplitude::StateMoments(_) => Ok(amp.eval(from, state)? * (to - from)),
        _ => {
            let mut err = None;
            let v = quadrature::integrate(
                |s| match amp.eval(s, state) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        Complex64::new(f64::NAN, 0.0)
                    }
                },
                from,
                to,
                tol,
            );
            match err {
                Some(e) => Err(e),
                None => v,
            }
        }
    }
}

/// Zeroth and first order of the Duhamel expansion of `κ[y(t)_{I′}]`.
///
/// Time integrals of the amplitudes use adaptive quadrature to absolute
/// tolerance `tol`. State-dependent amplitudes are frozen at the initial
/// state.
pub fn duhamel_expand(model: &AmplitudeModel, initial: &HierarchyState, target: &LabeledSeq, t: f64, tol: f64) -> Result<DuhamelExpansion> {
    check_target(initial, target)?;
    let zeroth = initial.cumulant(&target.vars())?;
    let mut first = ZERO;
    let mut remainder = Vec::new();
    for pos in 0..target.len() {
        let rest = target.cancel_at(pos);
        let var = target.var_at(pos);
        for inter in model.interactions(var) {
            let integral = integrate_amplitude(&inter.amplitude, initial, initial.t, initial.t + t, tol)?;
            let e0 = pair_expectation(initial, &inter.seq, &rest)?;
            first += e0 * integral;
            remainder.push(RemainderTerm {
                label: target.label_at(pos),
                var,
                interaction: inter.seq.clone(),
                rest: rest.clone(),
                amplitude: inter.amplitude.clone(),
                integral,
            });
        }
    }
    Ok(DuhamelExpansion {
        zeroth,
        first,
        remainder,
    })
}

/// One term `⟨⟨(∂_t y_i) y^{I∖i}⟩⟩` of the Leibniz rule for Wick polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct LeibnizTerm {
    pub position: usize,
    pub label: Label,
    pub var: Var,
    /// `I ∖ i`
    pub rest: LabeledSeq,
}

impl LeibnizTerm {
    /// The Wick sequence with `y_i` replaced by the variable carrying `∂_t y_i`.
    pub fn with_derivative(&self, ground: &LabeledSeq, derivative: Var) -> LabeledSeq {
        ground.replace_at(self.position, derivative)
    }
}

/// `∂_t⟨⟨y^I⟩⟩ = Σ_{i∈I} ⟨⟨(∂_t y_i) y^{I∖i}⟩⟩` as a term list.
pub fn leibniz_wick_derivative(seq: &LabeledSeq) -> Result<Vec<LeibnizTerm>> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok((0..seq.len())
        .map(|p| LeibnizTerm {
            position: p,
            label: seq.label_at(p),
            var: seq.var_at(p),
            rest: seq.cancel_at(p),
        })
        .collect())
}

/// Position variable `q_n` of the particle model.
pub fn position_var(n: usize) -> Var {
    Var(2 * n as u32)
}

/// Momentum variable `p_n` of the particle model.
pub fn momentum_var(n: usize) -> Var {
    Var(2 * n as u32 + 1)
}

/// Classical particles on a line with pair potential
/// `Σ_{n≠n′} λ_{nn′} (q_n − q_{n′})^a / (2a)`, in Wick form.
///
/// Variables are `q_n = Var(2n)` and `p_n = Var(2n+1)`.
pub fn particle_model(n_particles: usize, a: usize, couplings: &[Vec<f64>]) -> Result<AmplitudeModel> {
    if a < 2 || a % 2 == 1 {
        return Err(Error::InvalidModel(format!("power a = {a} must be even and at least 2")));
    }
    if couplings.len() != n_particles || couplings.iter().any(|r| r.len() != n_particles) {
        return Err(Error::InvalidModel("coupling matrix must be N × N".to_string()));
    }
    for n in 0..n_particles {
        if couplings[n][n] != 0.0 {
            return Err(Error::InvalidModel(format!("coupling diagonal ({n}, {n}) must vanish")));
        }
        for m in 0..n {
            if couplings[n][m] != couplings[m][n] {
                return Err(Error::InvalidModel(format!("couplings are not symmetric at ({n}, {m})")));
            }
        }
    }
    let vars: Vec<Var> = (0..n_particles).flat_map(|n| [position_var(n), momentum_var(n)]).collect();
    let mut model = AmplitudeModel::new(vars);
    let one = Complex64::new(1.0, 0.0);
    for n in 0..n_particles {
        let (q, p) = (position_var(n), momentum_var(n));
        model.add(q, &[], Amplitude::StateMoments(vec![(one, vec![p])]))?;
        model.add(q, &[p], Amplitude::Constant(one))?;
        for m in 0..n_particles {
            let lam = couplings[n][m];
            if m == n || lam == 0.0 {
                continue;
            }
            let qm = position_var(m);
            for k1 in 0..a {
                for k2 in 0..a - k1 {
                    let mut terms = Vec::new();
                    for k in k1..=(a - 1 - k2) {
                        let sign = if (a - k) % 2 == 0 { 1.0 } else { -1.0 };
                        let w = lam
                            * sign
                            * binomial(a - 1, k) as f64
                            * binomial(k, k1) as f64
                            * binomial(a - 1 - k, k2) as f64;
                        let mut mono = vec![q; k - k1];
                        mono.extend(core::iter::repeat_n(qm, a - 1 - k - k2));
                        terms.push((Complex64::new(w, 0.0), mono));
                    }
                    let mut seq = vec![q; k1];
                    seq.extend(core::iter::repeat_n(qm, k2));
                    model.add(p, &seq, Amplitude::StateMoments(terms))?;
                }
            }
        }
    }
    Ok(model)
}
