//! Moments and cumulants, converted exactly in both directions.
//!
//! Moment sources implement [`MomentOracle`]; anything that can hand out
//! cumulants implements [`CumulantSource`]. [`OracleCumulants`] bridges the
//! two with the first-element recursion
//!
//! ```text
//! κ[I] = E[y^I] − Σ_{x ∈ E ⊊ I} E[y^{I∖E}] κ[E],   x = first element of I,
//! ```
//!
//! memoized on collapsed keys.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::indexing::{full_mask, submasks, Key, LabeledSeq, Mask, Var};
use crate::partition_sum;

/// Evaluator of joint moments `E[y^I]`.
///
/// `moment` receives the collapsed, ascending-sorted multiset of variables.
/// Implementations must return 1 for the empty multiset and be callable from
/// several threads at once.
pub trait MomentOracle: Sync {
    /// Highest order for which moments are available.
    fn max_order(&self) -> usize;

    fn moment(&self, vars: &[Var]) -> Result<Complex64>;
}

impl<T: MomentOracle + ?Sized> MomentOracle for &T {
    fn max_order(&self) -> usize {
        (**self).max_order()
    }

    fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        (**self).moment(vars)
    }
}

/// Anything that can produce the joint cumulant of a multiset of variables.
pub trait CumulantSource {
    fn cumulant(&self, vars: &[Var]) -> Result<Complex64>;
}

impl<T: CumulantSource + ?Sized> CumulantSource for &T {
    fn cumulant(&self, vars: &[Var]) -> Result<Complex64> {
        (**self).cumulant(vars)
    }
}

/// Where the entries of a [`CumulantTable`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Provenance {
    #[default]
    Analytic,
    RecursiveFromMoments,
    Empirical,
}

/// Cumulants keyed by collapsed multiset.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CumulantTable {
    entries: BTreeMap<Key, Complex64>,
    pub provenance: Provenance,
}

impl CumulantTable {
    pub fn new(provenance: Provenance) -> Self {
        CumulantTable {
            entries: BTreeMap::new(),
            provenance,
        }
    }

    /// Tabulate every multiset of `vars` (with repetition) up to `max_order`.
    pub fn from_oracle<O: MomentOracle>(oracle: &O, vars: &[Var], max_order: usize) -> Result<Self> {
        let src = OracleCumulants::new(oracle);
        let mut table = CumulantTable::new(Provenance::RecursiveFromMoments);
        for key in multisets(vars, max_order) {
            let v = src.cumulant(key.vars())?;
            table.entries.insert(key, v);
        }
        Ok(table)
    }

    /// Tabulate every multiset of `vars` up to `max_order` from another source.
    pub fn from_source<S: CumulantSource>(
        src: &S,
        vars: &[Var],
        max_order: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut table = CumulantTable::new(provenance);
        for key in multisets(vars, max_order) {
            let v = src.cumulant(key.vars())?;
            table.entries.insert(key, v);
        }
        Ok(table)
    }

    pub fn insert(&mut self, vars: &[Var], value: Complex64) {
        let key = Key::from_slice(vars);
        if !key.is_empty() {
            self.entries.insert(key, value);
        }
    }

    /// Lookup; the empty cumulant is 0 by convention.
    pub fn get(&self, vars: &[Var]) -> Option<Complex64> {
        if vars.is_empty() {
            return Some(Complex64::new(0.0, 0.0));
        }
        let key = Key::from_slice(vars);
        self.entries.get(&key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Complex64)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&Key, &mut Complex64)> {
        self.entries.iter_mut()
    }

    pub fn max_order(&self) -> usize {
        self.entries.keys().map(Key::len).max().unwrap_or(0)
    }

    /// Variables appearing in any key.
    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.entries.keys().flat_map(|k| k.vars().iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl CumulantSource for CumulantTable {
    fn cumulant(&self, vars: &[Var]) -> Result<Complex64> {
        self.get(vars)
            .ok_or_else(|| Error::MissingCumulant(Key::from_slice(vars).into_vec()))
    }
}

/// Moments of a table's cumulants by the partition sum.
impl MomentOracle for CumulantTable {
    fn max_order(&self) -> usize {
        CumulantTable::max_order(self)
    }

    fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        moments_from_cumulants(self, &LabeledSeq::from_vars(vars))
    }
}

/// Memoizing cumulant evaluator over a moment oracle.
///
/// The caches live behind a `RefCell`, so one instance belongs to one thread;
/// create one per worker when sharing an oracle.
pub struct OracleCumulants<'a, O: ?Sized> {
    oracle: &'a O,
    moments: RefCell<BTreeMap<Key, Complex64>>,
    cumulants: RefCell<BTreeMap<Key, Complex64>>,
}

impl<'a, O: MomentOracle + ?Sized> OracleCumulants<'a, O> {
    pub fn new(oracle: &'a O) -> Self {
        OracleCumulants {
            oracle,
            moments: RefCell::new(BTreeMap::new()),
            cumulants: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn oracle(&self) -> &O {
        self.oracle
    }

    /// Memoized moment of a collapsed multiset.
    pub fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        if vars.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if vars.len() > self.oracle.max_order() {
            return Err(Error::OrderExceeded {
                needed: vars.len(),
                available: self.oracle.max_order(),
            });
        }
        let key = Key::from_slice(vars);
        if let Some(&m) = self.moments.borrow().get(&key) {
            return Ok(m);
        }
        let m = self.oracle.moment(key.vars())?;
        self.moments.borrow_mut().insert(key, m);
        Ok(m)
    }

    fn compute(&self, key: &Key) -> Result<Complex64> {
        let vars = key.vars();
        let n = vars.len();
        let ground = LabeledSeq::from_vars(vars);
        // E runs over {first} ∪ r for proper submasks r of the remaining positions.
        let rest = full_mask(n) & !1;
        let mut acc = self.moment(vars)?;
        for r in submasks(rest) {
            if r == rest {
                continue;
            }
            let e: Mask = r | 1;
            let k_e = self.cumulant(&ground.vars_of(e))?;
            let m_c = self.moment(&ground.vars_of(full_mask(n) & !e))?;
            acc -= m_c * k_e;
        }
        Ok(acc)
    }
}

impl<O: MomentOracle + ?Sized> CumulantSource for OracleCumulants<'_, O> {
    fn cumulant(&self, vars: &[Var]) -> Result<Complex64> {
        if vars.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if vars.len() > self.oracle.max_order() {
            return Err(Error::OrderExceeded {
                needed: vars.len(),
                available: self.oracle.max_order(),
            });
        }
        let key = Key::from_slice(vars);
        if let Some(&k) = self.cumulants.borrow().get(&key) {
            return Ok(k);
        }
        let k = self.compute(&key)?;
        self.cumulants.borrow_mut().insert(key, k);
        Ok(k)
    }
}

/// `κ[y_seq]` from the moments of `oracle`.
pub fn cumulants_from_moments<O: MomentOracle + ?Sized>(oracle: &O, seq: &LabeledSeq) -> Result<Complex64> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    OracleCumulants::new(oracle).cumulant(&seq.vars())
}

/// `E[y^seq] = Σ_{π ∈ P(seq)} Π_{A ∈ π} κ[y_A]`.
pub fn moments_from_cumulants<S: CumulantSource + ?Sized>(table: &S, seq: &LabeledSeq) -> Result<Complex64> {
    partition_sum::sum_over_partitions(seq, full_mask(seq.len()), |_| true, |vars| table.cumulant(vars))
}

/// Linear relation `target = alpha·first + beta·second` between variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Substitution {
    pub target: Var,
    pub alpha: Complex64,
    pub first: Var,
    pub beta: Complex64,
    pub second: Var,
}

/// Extends an oracle with a composite variable defined by a [`Substitution`].
///
/// Moments containing the composite are expanded by multilinearity of the
/// product; the wrapped oracle must not know the composite itself.
pub struct SubstitutedOracle<O> {
    pub inner: O,
    pub sub: Substitution,
}

impl<O: MomentOracle> SubstitutedOracle<O> {
    pub fn new(inner: O, sub: Substitution) -> Self {
        SubstitutedOracle { inner, sub }
    }
}

impl<O: MomentOracle> MomentOracle for SubstitutedOracle<O> {
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }

    fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        let s = &self.sub;
        let c = vars.iter().filter(|&&v| v == s.target).count();
        if c == 0 {
            return self.inner.moment(vars);
        }
        let rest: Vec<Var> = vars.iter().copied().filter(|&v| v != s.target).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=c {
            let mut v = rest.clone();
            v.extend(core::iter::repeat_n(s.first, j));
            v.extend(core::iter::repeat_n(s.second, c - j));
            v.sort_unstable();
            let w = binomial(c, j) as f64 * s.alpha.powu(j as u32) * s.beta.powu((c - j) as u32);
            if w != Complex64::new(0.0, 0.0) {
                acc += w * self.inner.moment(&v)?;
            }
        }
        Ok(acc)
    }
}

/// Checks slot-wise linearity of the cumulant of `seq` in the composite
/// variable of `sub`: for every position holding `sub.target`,
/// `κ(…target…) = α κ(…first…) + β κ(…second…)` to relative tolerance `tol`.
pub fn multilinearity_check<S: CumulantSource + ?Sized>(
    source: &S,
    seq: &LabeledSeq,
    sub: &Substitution,
    tol: f64,
) -> Result<bool> {
    let lhs = source.cumulant(&seq.vars())?;
    for pos in 0..seq.len() {
        if seq.var_at(pos) != sub.target {
            continue;
        }
        let a = source.cumulant(&seq.replace_at(pos, sub.first).vars())?;
        let b = source.cumulant(&seq.replace_at(pos, sub.second).vars())?;
        let rhs = sub.alpha * a + sub.beta * b;
        let scale = lhs.norm().max(rhs.norm()).max(1.0);
        if (lhs - rhs).norm() > tol * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Realizations of a finite family of variables, one row per realization.
#[derive(Clone, Debug)]
pub struct SampleMatrix {
    vars: Vec<Var>,
    rows: Vec<Complex64>,
}

impl SampleMatrix {
    pub fn new(vars: Vec<Var>) -> Self {
        SampleMatrix { vars, rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[Complex64]) {
        assert_eq!(row.len(), self.vars.len(), "row width mismatch");
        self.rows.extend_from_slice(row);
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn n_realizations(&self) -> usize {
        if self.vars.is_empty() {
            0
        } else {
            self.rows.len() / self.vars.len()
        }
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        let w = self.vars.len();
        &self.rows[r * w..(r + 1) * w]
    }

    fn column_of(&self, v: Var) -> Result<usize> {
        self.vars
            .iter()
            .position(|&x| x == v)
            .ok_or(Error::UnknownVariable(v))
    }
}

/// Sample-average moments of a [`SampleMatrix`].
pub struct EmpiricalOracle<'a> {
    samples: &'a SampleMatrix,
}

impl<'a> EmpiricalOracle<'a> {
    pub fn new(samples: &'a SampleMatrix) -> Result<Self> {
        let n = samples.n_realizations();
        if n < 2 {
            return Err(Error::DegenerateEnsemble(n));
        }
        Ok(EmpiricalOracle { samples })
    }
}

impl MomentOracle for EmpiricalOracle<'_> {
    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        let cols = vars
            .iter()
            .map(|&v| self.samples.column_of(v))
            .collect::<Result<Vec<_>>>()?;
        let n = self.samples.n_realizations();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            let row = self.samples.row(r);
            acc += cols.iter().map(|&c| row[c]).product::<Complex64>();
        }
        Ok(acc / n as f64)
    }
}

/// Point estimate with a standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    /// Jackknife standard error of the complex estimate (`sqrt(E|δ|²)`).
    pub stderr: f64,
}

/// Plug-in cumulant estimate with a delete-one jackknife error.
pub fn empirical_cumulant(samples: &SampleMatrix, seq: &LabeledSeq) -> Result<Estimate> {
    let n = samples.n_realizations();
    if n < 2 {
        return Err(Error::DegenerateEnsemble(n));
    }
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let m = seq.len();
    if m > 16 {
        return Err(Error::SizeGuard {
            what: "empirical_cumulant",
            len: m,
            max: 16,
        });
    }
    let cols = seq
        .vars()
        .iter()
        .map(|&v| samples.column_of(v))
        .collect::<Result<Vec<_>>>()?;
    let nm = 1usize << m;
    let products = |r: usize, out: &mut [Complex64]| {
        let row = samples.row(r);
        out[0] = Complex64::new(1.0, 0.0);
        for mask in 1..nm {
            let low = mask.trailing_zeros() as usize;
            out[mask] = out[mask & (mask - 1)] * row[cols[low]];
        }
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); nm];
    let mut sums = vec![Complex64::new(0.0, 0.0); nm];
    for r in 0..n {
        products(r, &mut buf);
        for (s, b) in sums.iter_mut().zip(&buf) {
            *s += *b;
        }
    }
    let full: Vec<Complex64> = sums.iter().map(|s| s / n as f64).collect();
    let value = cumulant_from_subset_moments(&full);

    let mut loo = vec![Complex64::new(0.0, 0.0); nm];
    let mut reps = Vec::with_capacity(n);
    for r in 0..n {
        products(r, &mut buf);
        for mask in 0..nm {
            loo[mask] = (sums[mask] - buf[mask]) / (n - 1) as f64;
        }
        reps.push(cumulant_from_subset_moments(&loo));
    }
    let mean = reps.iter().sum::<Complex64>() / n as f64;
    let var = reps.iter().map(|k| (k - mean).norm_sqr()).sum::<f64>() * (n - 1) as f64 / n as f64;
    Ok(Estimate {
        value,
        stderr: libm::sqrt(var),
    })
}

/// Joint cumulant of all `m` positions given the moments of every submask
/// (`moments[mask]`, with `moments[0] = 1`).
pub fn cumulant_from_subset_moments(moments: &[Complex64]) -> Complex64 {
    let nm = moments.len();
    debug_assert!(nm.is_power_of_two());
    let mut kappa = vec![Complex64::new(0.0, 0.0); nm];
    for mask in 1..nm {
        let low = mask & mask.wrapping_neg();
        let rest = mask & !low;
        let mut acc = moments[mask];
        // proper blocks containing the lowest position
        let mut r = rest;
        loop {
            let e = r | low;
            if e != mask {
                acc -= moments[mask & !e] * kappa[e];
            }
            if r == 0 {
                break;
            }
            r = (r - 1) & rest;
        }
        kappa[mask] = acc;
    }
    kappa[nm - 1]
}

/// All multisets of `vars` with `1 ≤ size ≤ max_order`, sorted.
pub fn multisets(vars: &[Var], max_order: usize) -> Vec<Key> {
    let mut vs = vars.to_vec();
    vs.sort_unstable();
    vs.dedup();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(vs: &[Var], start: usize, left: usize, cur: &mut Vec<Var>, out: &mut Vec<Key>) {
        if !cur.is_empty() {
            out.push(Key::from_slice(cur));
        }
        if left == 0 {
            return;
        }
        for i in start..vs.len() {
            cur.push(vs[i]);
            rec(vs, i, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(&vs, 0, max_order, &mut cur, &mut out);
    out.sort();
    out
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r * (n - i) as u64 / (i + 1) as u64;
    }
    r
}

/// Moments of a multivariate (complex) Gaussian by Wick pairing.
///
/// Variables are `Var(i)` for `i < mean.len()`; `cov[i][j]` is the
/// second cumulant `κ(y_i, y_j)` of the commuting variables.
#[derive(Clone, Debug)]
pub struct GaussianOracle {
    mean: Vec<Complex64>,
    cov: Vec<Vec<Complex64>>,
    max_order: usize,
}

impl GaussianOracle {
    pub fn new(mean: Vec<Complex64>, cov: Vec<Vec<Complex64>>, max_order: usize) -> Result<Self> {
        check_symmetric(&cov)?;
        if cov.len() != mean.len() {
            return Err(Error::InvalidModel("mean and covariance sizes differ".to_string()));
        }
        Ok(GaussianOracle { mean, cov, max_order })
    }

    pub fn mean(&self) -> &[Complex64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<Complex64>] {
        &self.cov
    }

    fn idx(&self, v: Var) -> Result<usize> {
        let i = v.0 as usize;
        if i < self.mean.len() {
            Ok(i)
        } else {
            Err(Error::UnknownVariable(v))
        }
    }
}

impl CumulantSource for GaussianOracle {
    fn cumulant(&self, vars: &[Var]) -> Result<Complex64> {
        match vars {
            [] => Ok(Complex64::new(0.0, 0.0)),
            [a] => Ok(self.mean[self.idx(*a)?]),
            [a, b] => Ok(self.cov[self.idx(*a)?][self.idx(*b)?]),
            _ => {
                for &v in vars {
                    self.idx(v)?;
                }
                Ok(Complex64::new(0.0, 0.0))
            }
        }
    }
}

impl MomentOracle for GaussianOracle {
    fn max_order(&self) -> usize {
        self.max_order
    }

    fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        moments_from_cumulants(self, &LabeledSeq::from_vars(vars))
    }
}

pub(crate) fn check_symmetric(cov: &[Vec<Complex64>]) -> Result<()> {
    let n = cov.len();
    for (i, row) in cov.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidModel("covariance is not square".to_string()));
        }
        for j in 0..i {
            let a = cov[i][j];
            let b = cov[j][i];
            if (a - b).norm() > 1e-12 * (1.0 + a.norm().max(b.norm())) {
                return Err(Error::NonSymmetricCovariance(i, j));
            }
        }
    }
    Ok(())
}

/// Moments of independent blocks: `E[y^I] = Π_b E[y^{I ∩ block_b}]`.
///
/// Each factor oracle sees only its own variables; `owner(v)` selects the
/// factor a variable belongs to.
pub struct ProductOracle<O> {
    pub factors: Vec<O>,
    pub owner: fn(Var) -> usize,
}

impl<O: MomentOracle> MomentOracle for ProductOracle<O> {
    fn max_order(&self) -> usize {
        self.factors.iter().map(|f| f.max_order()).min().unwrap_or(0)
    }

    fn moment(&self, vars: &[Var]) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for (b, f) in self.factors.iter().enumerate() {
            let part: Vec<Var> = vars.iter().copied().filter(|&v| (self.owner)(v) == b).collect();
            if !part.is_empty() {
                acc *= f.moment(&part)?;
            }
        }
        Ok(acc)
    }
}
