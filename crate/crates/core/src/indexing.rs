//! Labeled index sequences, their subsets and set partitions.
//!
//! A [`LabeledSeq`] is a finite sequence of variable indices where every
//! element carries a distinct positive label. Repeated variables are allowed,
//! the labels keep them apart so that subsets and partitions act on positions
//! rather than on values.
//!
//! Subsets and partition blocks are represented internally as bitmasks over
//! the *positions* of a ground sequence (position `p` is the element with the
//! `p`-th smallest label). Helpers translate masks back into labels.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Positional label of an element in a [`LabeledSeq`].
pub type Label = u32;

/// Bitmask over the positions of a ground sequence.
pub type Mask = u32;

/// Largest sequence accepted by [`LabeledSeq::subsets`].
pub const MAX_SUBSET_LEN: usize = 20;

/// Largest sequence accepted by [`LabeledSeq::partitions`]; Bell(12) = 4 213 597.
pub const MAX_PARTITION_LEN: usize = 12;

/// Opaque variable identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y{}", self.0)
    }
}

impl From<u32> for Var {
    fn from(v: u32) -> Self {
        Var(v)
    }
}

/// Collapsed multiset of variables, sorted ascending.
///
/// Cumulants, moments and Wick polynomial coefficients are permutation
/// invariant, so this is the canonical memoization key.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Key(Vec<Var>);

impl Key {
    pub fn new(mut vars: Vec<Var>) -> Self {
        vars.sort_unstable();
        Key(vars)
    }

    pub fn from_slice(vars: &[Var]) -> Self {
        Key::new(vars.to_vec())
    }

    pub fn empty() -> Self {
        Key(Vec::new())
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<Var> {
        self.0
    }

    /// Multiset union.
    pub fn union(&self, other: &Key) -> Key {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Key::new(v)
    }

    /// Multiplicity of `var` in the multiset.
    pub fn count(&self, var: Var) -> usize {
        self.0.iter().filter(|&&v| v == var).count()
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// A finite sequence of variables with distinct positional labels.
///
/// Elements are kept sorted by label, so "position" below always means rank
/// by label.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct LabeledSeq {
    elems: Vec<(Label, Var)>,
}

impl fmt::Debug for LabeledSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.elems.iter().map(|(l, v)| (l, v)))
            .finish()
    }
}

impl LabeledSeq {
    /// Build from explicit `(label, var)` pairs; labels must be distinct.
    pub fn new(mut elems: Vec<(Label, Var)>) -> Result<Self> {
        elems.sort_unstable_by_key(|&(l, _)| l);
        for w in elems.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateLabel(w[0].0));
            }
        }
        Ok(LabeledSeq { elems })
    }

    /// Canonical labels `1..=n` in the given order.
    pub fn from_vars(vars: &[Var]) -> Self {
        LabeledSeq {
            elems: vars
                .iter()
                .enumerate()
                .map(|(p, &v)| (p as Label + 1, v))
                .collect(),
        }
    }

    pub fn from_ids(ids: &[u32]) -> Self {
        let vars: Vec<Var> = ids.iter().map(|&i| Var(i)).collect();
        Self::from_vars(&vars)
    }

    pub fn empty() -> Self {
        LabeledSeq { elems: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &[(Label, Var)] {
        &self.elems
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.elems.iter().map(|&(l, _)| l)
    }

    /// The collapsed plain sequence: variables in label order.
    pub fn vars(&self) -> Vec<Var> {
        self.elems.iter().map(|&(_, v)| v).collect()
    }

    pub fn var_at(&self, pos: usize) -> Var {
        self.elems[pos].1
    }

    pub fn label_at(&self, pos: usize) -> Label {
        self.elems[pos].0
    }

    pub fn position_of(&self, label: Label) -> Option<usize> {
        self.elems.binary_search_by_key(&label, |&(l, _)| l).ok()
    }

    pub fn key(&self) -> Key {
        Key::new(self.vars())
    }

    /// Mask with every position set.
    pub fn full_mask(&self) -> Mask {
        full_mask(self.len())
    }

    /// Subsequence at the positions in `mask`, original labels kept.
    pub fn select(&self, mask: Mask) -> LabeledSeq {
        LabeledSeq {
            elems: self
                .elems
                .iter()
                .enumerate()
                .filter(|(p, _)| mask >> p & 1 == 1)
                .map(|(_, &e)| e)
                .collect(),
        }
    }

    /// Collapsed variables at the positions in `mask`.
    pub fn vars_of(&self, mask: Mask) -> Vec<Var> {
        positions(mask).map(|p| self.elems[p].1).collect()
    }

    pub fn key_of(&self, mask: Mask) -> Key {
        Key::new(self.vars_of(mask))
    }

    pub fn labels_of(&self, mask: Mask) -> Vec<Label> {
        positions(mask).map(|p| self.elems[p].0).collect()
    }

    pub fn mask_of_labels(&self, labels: &[Label]) -> Option<Mask> {
        let mut m = 0;
        for &l in labels {
            m |= 1 << self.position_of(l)?;
        }
        Some(m)
    }

    /// `a + b`: fresh labels `1..=|a|+|b|`, `a`'s elements first.
    pub fn merge(&self, other: &LabeledSeq) -> LabeledSeq {
        let mut vars = self.vars();
        vars.extend(other.vars());
        LabeledSeq::from_vars(&vars)
    }

    /// Remove the element labeled `label`; a no-op when the label is absent.
    pub fn cancel(&self, label: Label) -> LabeledSeq {
        LabeledSeq {
            elems: self
                .elems
                .iter()
                .copied()
                .filter(|&(l, _)| l != label)
                .collect(),
        }
    }

    /// Remove the element at position `pos`.
    pub fn cancel_at(&self, pos: usize) -> LabeledSeq {
        self.cancel(self.elems[pos].0)
    }

    /// Replace the variable at position `pos`, keeping its label.
    pub fn replace_at(&self, pos: usize, var: Var) -> LabeledSeq {
        let mut elems = self.elems.clone();
        elems[pos].1 = var;
        LabeledSeq { elems }
    }

    /// All `2^n` label-subsets, in bitmask order over label rank.
    pub fn subsets(&self) -> Result<Subsets<'_>> {
        if self.len() > MAX_SUBSET_LEN {
            return Err(Error::SizeGuard {
                what: "subsets",
                len: self.len(),
                max: MAX_SUBSET_LEN,
            });
        }
        Ok(Subsets {
            seq: self,
            next: 0,
            end: 1u64 << self.len(),
        })
    }

    /// Every partition of the label set exactly once, in lexicographic order
    /// of restricted-growth strings.
    pub fn partitions(&self) -> Result<Partitions> {
        if self.len() > MAX_PARTITION_LEN {
            return Err(Error::SizeGuard {
                what: "partitions",
                len: self.len(),
                max: MAX_PARTITION_LEN,
            });
        }
        Ok(Partitions::new(self.len()))
    }
}

/// Iterator returned by [`LabeledSeq::subsets`].
pub struct Subsets<'a> {
    seq: &'a LabeledSeq,
    next: u64,
    end: u64,
}

impl Iterator for Subsets<'_> {
    type Item = LabeledSeq;

    fn next(&mut self) -> Option<LabeledSeq> {
        if self.next >= self.end {
            return None;
        }
        let m = self.next as Mask;
        self.next += 1;
        Some(self.seq.select(m))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

/// A set partition of the positions `0..n` of a ground sequence.
///
/// Blocks are nonempty, disjoint, cover the ground set and are ordered by
/// their smallest position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    ground_len: usize,
    blocks: Vec<Mask>,
}

impl Partition {
    pub fn ground_len(&self) -> usize {
        self.ground_len
    }

    pub fn blocks(&self) -> &[Mask] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Blocks as label sets of `ground`.
    pub fn label_blocks(&self, ground: &LabeledSeq) -> Vec<Vec<Label>> {
        self.blocks.iter().map(|&b| ground.labels_of(b)).collect()
    }

    /// Structural check of the partition invariants.
    pub fn is_valid(&self) -> bool {
        let mut seen: Mask = 0;
        for &b in &self.blocks {
            if b == 0 || b & seen != 0 {
                return false;
            }
            seen |= b;
        }
        seen == full_mask(self.ground_len)
    }
}

/// Restricted-growth-string enumerator behind [`LabeledSeq::partitions`].
pub struct Partitions {
    rgs: Vec<u8>,
    // prefix maxima: max(rgs[0..i]) for each i
    maxes: Vec<u8>,
    done: bool,
}

impl Partitions {
    pub fn new(n: usize) -> Self {
        Partitions {
            rgs: vec![0; n],
            maxes: vec![0; n],
            done: false,
        }
    }

    fn current(&self) -> Partition {
        let n = self.rgs.len();
        let nblocks = self.rgs.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut blocks = vec![0 as Mask; nblocks];
        for (p, &b) in self.rgs.iter().enumerate() {
            blocks[b as usize] |= 1 << p;
        }
        Partition {
            ground_len: n,
            blocks,
        }
    }

    fn advance(&mut self) {
        let n = self.rgs.len();
        // rightmost position that can still grow
        let mut i = n;
        while i > 1 {
            i -= 1;
            if self.rgs[i] <= self.maxes[i] {
                self.rgs[i] += 1;
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.maxes[j] = self.maxes[j - 1].max(self.rgs[j - 1]);
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let p = self.current();
        self.advance();
        Some(p)
    }
}

/// Bell numbers via the Bell triangle; exact up to `n = 25` in `u64`.
pub fn bell_number(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

pub fn full_mask(n: usize) -> Mask {
    if n >= 32 {
        Mask::MAX
    } else {
        (1 << n) - 1
    }
}

/// Positions set in `mask`, ascending.
pub fn positions(mask: Mask) -> impl Iterator<Item = usize> {
    let mut m = mask;
    core::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let p = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(p)
        }
    })
}

/// Submasks of `mask` (including 0 and `mask`), descending numeric order.
pub fn submasks(mask: Mask) -> impl Iterator<Item = Mask> {
    let mut cur = Some(mask);
    core::iter::from_fn(move || {
        let s = cur?;
        cur = if s == 0 { None } else { Some((s - 1) & mask) };
        Some(s)
    })
}
