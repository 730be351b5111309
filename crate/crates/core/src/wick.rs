//! Wick polynomials `⟨⟨y^I⟩⟩` built three independent ways, plus the
//! truncated and multi-product expectation formulas.
//!
//! Coefficients are keyed by label-subsets (position masks) of the ground
//! sequence, since the truncated moments-to-cumulants formula partitions
//! labeled positions. Collapsing to multisets happens only at oracle
//! evaluation and in [`WickPoly::to_polynomial`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::cumulants::{binomial, check_symmetric, CumulantSource, MomentOracle, OracleCumulants, SubstitutedOracle, Substitution};
use crate::error::{Error, Result};
use crate::indexing::{full_mask, positions, submasks, Key, Label, LabeledSeq, Mask, Partitions, Var, MAX_PARTITION_LEN};
use crate::partition_sum::sum_over_partitions;
use crate::poly::Polynomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A Wick polynomial over a ground sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct WickPoly {
    ground: LabeledSeq,
    terms: BTreeMap<Mask, Complex64>,
}

impl WickPoly {
    pub fn from_terms(ground: LabeledSeq, terms: BTreeMap<Mask, Complex64>) -> Self {
        WickPoly { ground, terms }
    }

    pub fn ground(&self) -> &LabeledSeq {
        &self.ground
    }

    /// Coefficient of `y^U` for the position mask `U`.
    pub fn coeff(&self, subset: Mask) -> Complex64 {
        self.terms.get(&subset).copied().unwrap_or(ZERO)
    }

    /// Coefficient of the monomial on the given labels.
    pub fn coeff_of_labels(&self, labels: &[Label]) -> Option<Complex64> {
        self.ground.mask_of_labels(labels).map(|m| self.coeff(m))
    }

    pub fn terms(&self) -> impl Iterator<Item = (Mask, Complex64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Collapse to a polynomial in the variables.
    pub fn to_polynomial(&self) -> Polynomial {
        let mut p = Polynomial::zero();
        for (&m, &c) in &self.terms {
            p.add_term(self.ground.key_of(m), c);
        }
        p
    }

    /// Rebuild per-subset coefficients from a permutation invariant
    /// polynomial: a monomial's coefficient is split evenly over the
    /// label-subsets that collapse to it.
    pub fn from_polynomial(ground: &LabeledSeq, p: &Polynomial) -> Self {
        let full = ground.key();
        let mut terms = BTreeMap::new();
        for u in submasks(ground.full_mask()) {
            let key = ground.key_of(u);
            let count = subset_count(&full, &key);
            terms.insert(u, p.coeff(key.vars()) / count as f64);
        }
        WickPoly {
            ground: ground.clone(),
            terms,
        }
    }

    pub fn expectation<O: MomentOracle + ?Sized>(&self, oracle: &O) -> Result<Complex64> {
        self.to_polynomial().expectation(oracle)
    }

    /// Largest coefficient difference against a polynomial on the same ground.
    pub fn max_abs_diff(&self, other: &WickPoly) -> f64 {
        let mut d: f64 = 0.0;
        for u in submasks(self.ground.full_mask().max(other.ground.full_mask())) {
            d = d.max((self.coeff(u) - other.coeff(u)).norm());
        }
        d
    }
}

/// Number of label-subsets of the multiset `full` that collapse to `part`.
fn subset_count(full: &Key, part: &Key) -> u64 {
    let mut vars = part.vars().to_vec();
    vars.dedup();
    vars.iter()
        .map(|&v| binomial(full.count(v), part.count(v)))
        .product()
}

fn check_len(seq: &LabeledSeq, what: &'static str) -> Result<()> {
    if seq.len() > MAX_PARTITION_LEN {
        return Err(Error::SizeGuard {
            what,
            len: seq.len(),
            max: MAX_PARTITION_LEN,
        });
    }
    Ok(())
}

fn check_order<O: MomentOracle + ?Sized>(oracle: &O, needed: usize) -> Result<()> {
    if needed > oracle.max_order() {
        return Err(Error::OrderExceeded {
            needed,
            available: oracle.max_order(),
        });
    }
    Ok(())
}

/// Collect the submask coefficients of `mask` out of a dense scratch array.
fn gather(acc: &mut [Complex64], mask: Mask) -> Vec<(Mask, Complex64)> {
    submasks(mask)
        .map(|u| {
            let c = acc[u as usize];
            acc[u as usize] = ZERO;
            (u, c)
        })
        .collect()
}

/// `𝒲[y^I] = y^I − Σ_{∅≠E⊂I} E[y^E] 𝒲[y^{I∖E}]`, with `𝒲[y^∅] = 1`.
pub fn wick_recursive<O: MomentOracle + ?Sized>(oracle: &O, seq: &LabeledSeq) -> Result<WickPoly> {
    check_len(seq, "wick_recursive")?;
    check_order(oracle, seq.len())?;
    let src = OracleCumulants::new(oracle);
    let n = seq.len();
    let full = full_mask(n);
    let mut moment = vec![ZERO; 1 << n];
    for e in submasks(full) {
        moment[e as usize] = src.moment(&seq.vars_of(e))?;
    }
    let mut polys: Vec<Vec<(Mask, Complex64)>> = vec![Vec::new(); 1 << n];
    let mut acc = vec![ZERO; 1 << n];
    polys[0] = vec![(0, ONE)];
    for m in 1..=full {
        acc[m as usize] = ONE;
        for e in submasks(m) {
            if e == 0 {
                continue;
            }
            let me = moment[e as usize];
            for &(u, c) in &polys[(m & !e) as usize] {
                acc[u as usize] -= me * c;
            }
        }
        polys[m as usize] = gather(&mut acc, m);
    }
    Ok(WickPoly {
        ground: seq.clone(),
        terms: polys[full as usize].iter().copied().collect(),
    })
}

/// `⟨⟨y^I⟩⟩ = Σ_{U⊂I} y^U Σ_{π ∈ P(I∖U)} (−1)^{|π|} Π_{A∈π} κ[y_A]`.
///
/// Inner partition sums are memoized on the collapsed key of `I∖U`.
pub fn wick_from_cumulants<S: CumulantSource + ?Sized>(source: &S, seq: &LabeledSeq) -> Result<WickPoly> {
    check_len(seq, "wick_from_cumulants")?;
    let full = seq.full_mask();
    let mut memo: BTreeMap<Key, Complex64> = BTreeMap::new();
    let mut terms = BTreeMap::new();
    for u in submasks(full) {
        let rest = full & !u;
        let key = seq.key_of(rest);
        let c = match memo.get(&key) {
            Some(&c) => c,
            None => {
                let c = sum_over_partitions(seq, rest, |_| true, |vars| Ok(-source.cumulant(vars)?))?;
                memo.insert(key, c);
                c
            }
        };
        terms.insert(u, c);
    }
    Ok(WickPoly {
        ground: seq.clone(),
        terms,
    })
}

/// `⟨⟨y^I⟩⟩ = y_{i₁}⟨⟨y^{I′}⟩⟩ − Σ_{U⊂I′} κ[y_{(i₁)+U}] ⟨⟨y^{I′∖U}⟩⟩`, where
/// `I′` is `I` with its first element cancelled.
pub fn wick_recursion_step<S: CumulantSource + ?Sized>(source: &S, seq: &LabeledSeq) -> Result<WickPoly> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_len(seq, "wick_recursion_step")?;
    let n = seq.len();
    let full = full_mask(n);
    let mut polys: Vec<Vec<(Mask, Complex64)>> = vec![Vec::new(); 1 << n];
    let mut acc = vec![ZERO; 1 << n];
    polys[0] = vec![(0, ONE)];
    let mut kappa: Vec<Option<Complex64>> = vec![None; 1 << n];
    for m in 1..=full {
        let low = m & m.wrapping_neg();
        let rest = m & !low;
        for &(u, c) in &polys[rest as usize] {
            acc[(u | low) as usize] += c;
        }
        for u in submasks(rest) {
            let block = (u | low) as usize;
            let k = match kappa[block] {
                Some(k) => k,
                None => {
                    let k = source.cumulant(&seq.vars_of(block as Mask))?;
                    kappa[block] = Some(k);
                    k
                }
            };
            if k == ZERO {
                continue;
            }
            for &(v, c) in &polys[(rest & !u) as usize] {
                acc[v as usize] -= k * c;
            }
        }
        polys[m as usize] = gather(&mut acc, m);
    }
    Ok(WickPoly {
        ground: seq.clone(),
        terms: polys[full as usize].iter().copied().collect(),
    })
}

/// Algebraic partial derivative of a Wick polynomial in `var`.
pub fn wick_derivative(w: &WickPoly, var: Var) -> Polynomial {
    w.to_polynomial().derivative(var)
}

fn tail_mask(head: usize, tail: usize) -> Mask {
    full_mask(head + tail) & !full_mask(head)
}

/// `E[⟨⟨y^I⟩⟩ y^{I′}]` by the truncated moments-to-cumulants formula:
/// partitions of `I + I′` whose every block meets `I′`.
pub fn truncated_expectation<O: MomentOracle + ?Sized>(oracle: &O, head: &LabeledSeq, tail: &LabeledSeq) -> Result<Complex64> {
    check_order(oracle, head.len() + tail.len())?;
    truncated_expectation_from(&OracleCumulants::new(oracle), head, tail)
}

/// [`truncated_expectation`] over any cumulant source.
pub fn truncated_expectation_from<S: CumulantSource + ?Sized>(source: &S, head: &LabeledSeq, tail: &LabeledSeq) -> Result<Complex64> {
    let merged = head.merge(tail);
    check_len(&merged, "truncated_expectation")?;
    let t = tail_mask(head.len(), tail.len());
    sum_over_partitions(&merged, merged.full_mask(), |b| b & t != 0, |vars| source.cumulant(vars))
}

/// `E[Π_ℓ ⟨⟨y^{J_ℓ}⟩⟩ · y^{J′}]`: partitions of `J₁ + … + J_L + J′` with no
/// block contained in a single `J_ℓ`.
pub fn wick_product_expectation<O: MomentOracle + ?Sized>(oracle: &O, blocks: &[LabeledSeq], tail: &LabeledSeq) -> Result<Complex64> {
    let total = blocks.iter().map(LabeledSeq::len).sum::<usize>() + tail.len();
    check_order(oracle, total)?;
    wick_product_expectation_from(&OracleCumulants::new(oracle), blocks, tail)
}

/// [`wick_product_expectation`] over any cumulant source.
pub fn wick_product_expectation_from<S: CumulantSource + ?Sized>(source: &S, blocks: &[LabeledSeq], tail: &LabeledSeq) -> Result<Complex64> {
    let mut merged = LabeledSeq::empty();
    let mut groups = Vec::with_capacity(blocks.len());
    for b in blocks {
        groups.push(tail_mask(merged.len(), b.len()));
        merged = merged.merge(b);
    }
    merged = merged.merge(tail);
    check_len(&merged, "wick_product_expectation")?;
    sum_over_partitions(
        &merged,
        merged.full_mask(),
        |a| groups.iter().all(|&g| a & !g != 0),
        |vars| source.cumulant(vars),
    )
}

/// Truncated power series in `λ` whose coefficients are polynomials in `y`,
/// keyed by the multiplicity vector of the `λ` monomial.
type Series = BTreeMap<Vec<u8>, Polynomial>;

fn series_mul(a: &Series, b: &Series, cap: &[u8]) -> Series {
    let mut out = Series::new();
    for (ka, pa) in a {
        for (kb, pb) in b {
            let k: Vec<u8> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            if k.iter().zip(cap).any(|(x, c)| x > c) {
                continue;
            }
            out.entry(k).or_default().add_scaled(&pa.mul(pb), ONE);
        }
    }
    out
}

/// Closed-form Gaussian Wick polynomial from the generating function
/// `G_w(λ; y) = exp[λ·(y − m) − λ·Cλ/2]`: the coefficient of `λ^I` times
/// the multiplicity factorials.
///
/// `Var(i)` refers to `mean[i]` and `cov[i][·]`.
pub fn gaussian_reference_wick(mean: &[Complex64], cov: &[Vec<Complex64>], seq: &LabeledSeq) -> Result<WickPoly> {
    check_symmetric(cov)?;
    if cov.len() != mean.len() {
        return Err(Error::InvalidModel(format!(
            "mean has {} entries, covariance {}",
            mean.len(),
            cov.len()
        )));
    }
    let key = seq.key();
    let mut distinct = key.vars().to_vec();
    distinct.dedup();
    for &v in &distinct {
        if v.0 as usize >= mean.len() {
            return Err(Error::UnknownVariable(v));
        }
    }
    let cap: Vec<u8> = distinct.iter().map(|&v| key.count(v) as u8).collect();
    let d = distinct.len();
    let unit = |i: usize| {
        let mut k = vec![0u8; d];
        k[i] += 1;
        k
    };

    // exponent P(λ) = Σ_v λ_v (y_v − m_v) − ½ Σ_{v,w} λ_v λ_w C_vw
    let mut exponent = Series::new();
    for (i, &v) in distinct.iter().enumerate() {
        let mut p = Polynomial::monomial(&[v], ONE);
        p.add_term(Key::empty(), -mean[v.0 as usize]);
        exponent.insert(unit(i), p);
    }
    for (i, &v) in distinct.iter().enumerate() {
        for (j, &w) in distinct.iter().enumerate() {
            let mut k = unit(i);
            k[j] += 1;
            if k.iter().zip(&cap).any(|(x, c)| x > c) {
                continue;
            }
            let c = cov[v.0 as usize][w.0 as usize] * -0.5;
            exponent
                .entry(k)
                .or_default()
                .add_term(Key::empty(), c);
        }
    }

    // exp(P) = Σ_k P^k / k!, truncated at total degree |I|
    let mut result = Series::new();
    result.insert(vec![0u8; d], Polynomial::one());
    let mut power = result.clone();
    let mut factorial = 1.0;
    for k in 1..=seq.len() {
        power = series_mul(&power, &exponent, &cap);
        factorial *= k as f64;
        for (key, p) in &power {
            result.entry(key.clone()).or_default().add_scaled(p, Complex64::new(1.0 / factorial, 0.0));
        }
    }
    let mult_factorial: f64 = cap
        .iter()
        .map(|&c| (1..=c as u64).product::<u64>() as f64)
        .product();
    let top = result.remove(&cap).unwrap_or_default().scaled(Complex64::new(mult_factorial, 0.0));
    Ok(WickPoly::from_polynomial(seq, &top))
}

/// Checks slot-wise linearity of Wick polynomials in a composite variable:
/// with `y_target = α y_first + β y_second`,
/// `⟨⟨y^I⟩⟩ = α⟨⟨y^{Î(k)+(first)}⟩⟩ + β⟨⟨y^{Î(k)+(second)}⟩⟩` after substitution.
///
/// `oracle` describes the non-composite variables; the composite's moments
/// are derived from `sub`.
pub fn wick_multilinearity<O: MomentOracle>(oracle: &O, seq: &LabeledSeq, pos: usize, sub: &Substitution, tol: f64) -> Result<bool> {
    if seq.var_at(pos) != sub.target {
        return Err(Error::InconsistentOracle(format!(
            "position {pos} holds {:?}, not the composite {:?}",
            seq.var_at(pos),
            sub.target
        )));
    }
    let extended = SubstitutedOracle::new(oracle, *sub);
    let lhs = wick_recursive(&extended, seq)?.to_polynomial().substitute(sub);
    let first = wick_recursive(&extended, &seq.replace_at(pos, sub.first))?.to_polynomial();
    let second = wick_recursive(&extended, &seq.replace_at(pos, sub.second))?.to_polynomial();
    let mut rhs = first.scaled(sub.alpha);
    rhs.add_scaled(&second, sub.beta);
    let rhs = rhs.substitute(sub);
    let scale = lhs.max_abs_coeff().max(rhs.max_abs_coeff()).max(1.0);
    Ok(lhs.max_abs_diff(&rhs) <= tol * scale)
}

/// One product `(−1)^{|π|} Π_{A∈π} κ[y_A] · y^U` in the cumulant expansion
/// of a Wick polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantMonomial {
    /// Positions of the free factors `U`.
    pub monomial: Mask,
    /// Position blocks of the partition `π` of `I \ U`.
    pub blocks: Vec<Mask>,
    pub sign: i32,
    /// `(−1)^{|π|} Π κ[y_A]`
    pub value: Complex64,
}

/// Term-by-term cumulant expansion of `⟨⟨y^I⟩⟩`: one entry per pair `(U, π)`,
/// so `Σ_k B_k·C(n,k)` entries for `|I| = n`.
pub fn wick_cumulant_expansion<S: CumulantSource + ?Sized>(source: &S, seq: &LabeledSeq) -> Result<Vec<CumulantMonomial>> {
    check_len(seq, "wick_cumulant_expansion")?;
    let full = seq.full_mask();
    let mut out = Vec::new();
    for u in submasks(full) {
        let rest = full & !u;
        let pos: Vec<usize> = positions(rest).collect();
        for p in Partitions::new(pos.len()) {
            let blocks: Vec<Mask> = p
                .blocks()
                .iter()
                .map(|&b| positions(b).fold(0, |acc, i| acc | (1 << pos[i])))
                .collect();
            let sign = if blocks.len() % 2 == 0 { 1 } else { -1 };
            let mut value = Complex64::new(sign as f64, 0.0);
            for &b in &blocks {
                value *= source.cumulant(&seq.vars_of(b))?;
            }
            out.push(CumulantMonomial {
                monomial: u,
                blocks,
                sign,
                value,
            });
        }
    }
    Ok(out)
}
