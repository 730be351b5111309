//! Naive reference implementations: explicit set partitions, direct
//! moment/cumulant sums and Wick coefficients straight from the cumulant
//! expansion. Nothing here calls into the crate's combinatorics.

#![allow(dead_code)]

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wickkin_core::{MomentOracle, Var};

pub type C = Complex64;

pub fn c(x: f64) -> C {
    Complex64::new(x, 0.0)
}

/// Every set partition of `items`, built by inserting one element at a time.
pub fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    match items.split_first() {
        None => vec![vec![]],
        Some((&x, rest)) => {
            let mut out = Vec::new();
            for p in set_partitions(rest) {
                for i in 0..p.len() {
                    let mut q = p.clone();
                    q[i].insert(0, x);
                    out.push(q);
                }
                let mut q = p.clone();
                q.insert(0, vec![x]);
                out.push(q);
            }
            out
        }
    }
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v
}

/// Moments drawn independently for every multiset; `E[1] = 1`.
pub struct RandomMoments {
    pub map: HashMap<Vec<u32>, C>,
    pub order: usize,
}

impl RandomMoments {
    pub fn new(seed: u64, nvars: u32, order: usize, complex: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = HashMap::new();
        map.insert(vec![], c(1.0));
        let mut frontier: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..order {
            let mut next = Vec::new();
            for m in &frontier {
                let start = m.last().copied().unwrap_or(0);
                for v in start..nvars {
                    let mut k = m.clone();
                    k.push(v);
                    let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
                    map.insert(k.clone(), Complex64::new(rng.random_range(-1.0..1.0), im));
                    next.push(k);
                }
            }
            frontier = next;
        }
        RandomMoments { map, order }
    }

    pub fn get(&self, vars: &[u32]) -> C {
        self.map[&sorted(vars.to_vec())]
    }
}

impl MomentOracle for RandomMoments {
    fn max_order(&self) -> usize {
        self.order
    }

    fn moment(&self, vars: &[Var]) -> wickkin_core::Result<C> {
        Ok(self.get(&vars.iter().map(|v| v.0).collect::<Vec<_>>()))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `κ = Σ_π (−1)^{|π|−1} (|π|−1)! Π_B E[y_B]`.
pub fn cumulant(m: &dyn Fn(&[u32]) -> C, vars: &[u32]) -> C {
    if vars.is_empty() {
        return c(0.0);
    }
    let idx: Vec<usize> = (0..vars.len()).collect();
    let mut acc = c(0.0);
    for p in set_partitions(&idx) {
        let k = p.len();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let mut prod = c(sign * factorial(k - 1));
        for b in &p {
            let bv: Vec<u32> = b.iter().map(|&i| vars[i]).collect();
            prod *= m(&bv);
        }
        acc += prod;
    }
    acc
}

/// `E[y_I] = Σ_π Π_B κ[y_B]`.
pub fn moment_from_cumulants(k: &dyn Fn(&[u32]) -> C, vars: &[u32]) -> C {
    let idx: Vec<usize> = (0..vars.len()).collect();
    let mut acc = c(0.0);
    for p in set_partitions(&idx) {
        let mut prod = c(1.0);
        for b in &p {
            let bv: Vec<u32> = b.iter().map(|&i| vars[i]).collect();
            prod *= k(&bv);
        }
        acc += prod;
    }
    acc
}

/// Memoized brute-force cumulants of a moment function.
pub struct Cumulants<'a> {
    m: &'a dyn Fn(&[u32]) -> C,
    memo: std::cell::RefCell<HashMap<Vec<u32>, C>>,
}

impl<'a> Cumulants<'a> {
    pub fn new(m: &'a dyn Fn(&[u32]) -> C) -> Self {
        Cumulants {
            m,
            memo: Default::default(),
        }
    }

    pub fn get(&self, vars: &[u32]) -> C {
        let key = sorted(vars.to_vec());
        if let Some(v) = self.memo.borrow().get(&key) {
            return *v;
        }
        let v = cumulant(self.m, &key);
        self.memo.borrow_mut().insert(key, v);
        v
    }
}

/// Wick coefficients by position mask:
/// `c_U = Σ_{π ∈ P(I∖U)} (−1)^{|π|} Π_B κ[y_B]`.
pub fn wick_coeffs(k: &dyn Fn(&[u32]) -> C, vars: &[u32]) -> Vec<C> {
    let n = vars.len();
    (0..1usize << n)
        .map(|u| {
            let rest: Vec<usize> = (0..n).filter(|i| u >> i & 1 == 0).collect();
            let mut acc = c(0.0);
            for p in set_partitions(&rest) {
                let sign = if p.len() % 2 == 0 { 1.0 } else { -1.0 };
                let mut prod = c(sign);
                for b in &p {
                    let bv: Vec<u32> = b.iter().map(|&i| vars[i]).collect();
                    prod *= k(&bv);
                }
                acc += prod;
            }
            acc
        })
        .collect()
}

/// Polynomial as a map from sorted monomial to coefficient.
pub type Poly = HashMap<Vec<u32>, C>;

pub fn wick_poly(k: &dyn Fn(&[u32]) -> C, vars: &[u32]) -> Poly {
    let mut p = Poly::new();
    for (u, cf) in wick_coeffs(k, vars).into_iter().enumerate() {
        let mono: Vec<u32> = (0..vars.len()).filter(|i| u >> i & 1 == 1).map(|i| vars[i]).collect();
        *p.entry(sorted(mono)).or_default() += cf;
    }
    p
}

pub fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let mut k = ka.clone();
            k.extend(kb);
            *out.entry(sorted(k)).or_default() += va * vb;
        }
    }
    out
}

pub fn expectation(m: &dyn Fn(&[u32]) -> C, p: &Poly) -> C {
    p.iter().map(|(k, v)| v * m(k)).sum()
}

/// All sequences of length `len` over `0..nvars`.
pub fn sequences(nvars: u32, len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..nvars).map(move |v| {
                    let mut t = s.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn close(a: C, b: C, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(a.norm()).max(1.0)
}
