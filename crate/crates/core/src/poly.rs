//! Sparse polynomials in commuting variables, keyed by monomial multisets.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::cumulants::{binomial, MomentOracle, Substitution};
use crate::error::Result;
use crate::indexing::{Key, Var};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Key, Complex64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::monomial(&[], Complex64::new(1.0, 0.0))
    }

    pub fn monomial(vars: &[Var], coeff: Complex64) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Key::from_slice(vars), coeff);
        p
    }

    pub fn add_term(&mut self, key: Key, coeff: Complex64) {
        *self.terms.entry(key).or_insert(Complex64::new(0.0, 0.0)) += coeff;
    }

    pub fn coeff(&self, vars: &[Var]) -> Complex64 {
        self.terms
            .get(&Key::from_slice(vars))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &Complex64)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(k, _)| k.len())
            .max()
            .unwrap_or(0)
    }

    pub fn add_scaled(&mut self, other: &Polynomial, s: Complex64) {
        for (k, &c) in &other.terms {
            self.add_term(k.clone(), s * c);
        }
    }

    pub fn scaled(&self, s: Complex64) -> Polynomial {
        let mut p = Polynomial::zero();
        p.add_scaled(self, s);
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Polynomial::zero();
        for (ka, &ca) in &self.terms {
            for (kb, &cb) in &other.terms {
                p.add_term(ka.union(kb), ca * cb);
            }
        }
        p
    }

    /// Partial derivative in `var`.
    pub fn derivative(&self, var: Var) -> Polynomial {
        let mut p = Polynomial::zero();
        for (k, &c) in &self.terms {
            let mult = k.count(var);
            if mult == 0 {
                continue;
            }
            let mut vars = k.vars().to_vec();
            let pos = vars.iter().position(|&v| v == var).unwrap();
            vars.remove(pos);
            p.add_term(Key::new(vars), c * mult as f64);
        }
        p
    }

    /// Replace `sub.target` by `alpha·first + beta·second`.
    pub fn substitute(&self, sub: &Substitution) -> Polynomial {
        let mut p = Polynomial::zero();
        for (k, &c) in &self.terms {
            let n = k.count(sub.target);
            let rest: Vec<Var> = k.vars().iter().copied().filter(|&v| v != sub.target).collect();
            for j in 0..=n {
                let mut vars = rest.clone();
                vars.extend(core::iter::repeat_n(sub.first, j));
                vars.extend(core::iter::repeat_n(sub.second, n - j));
                let w = binomial(n, j) as f64 * sub.alpha.powu(j as u32) * sub.beta.powu((n - j) as u32);
                p.add_term(Key::new(vars), c * w);
            }
        }
        p
    }

    /// `E[p]` under a moment oracle.
    pub fn expectation<O: MomentOracle + ?Sized>(&self, oracle: &O) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in &self.terms {
            if c != Complex64::new(0.0, 0.0) {
                acc += c * if k.is_empty() { Complex64::new(1.0, 0.0) } else { oracle.moment(k.vars())? };
            }
        }
        Ok(acc)
    }

    /// Evaluate at a point; `value(var)` supplies each variable.
    pub fn eval(&self, mut value: impl FnMut(Var) -> Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, &c)| c * k.vars().iter().map(|&v| value(v)).product::<Complex64>())
            .sum()
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &Polynomial) -> f64 {
        let mut d: f64 = 0.0;
        for (k, &c) in &self.terms {
            d = d.max((c - other.terms.get(k).copied().unwrap_or_default()).norm());
        }
        for (k, &c) in &other.terms {
            if !self.terms.contains_key(k) {
                d = d.max(c.norm());
            }
        }
        d
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
