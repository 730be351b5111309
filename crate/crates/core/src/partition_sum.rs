//! Sums over set partitions with multiplicative block weights.
//!
//! `Σ_{π ∈ P(R)} Π_{A ∈ π} f(A)` satisfies
//! `S(R) = Σ_{B ⊂ R, min R ∈ B} f(B) S(R ∖ B)`, which is evaluated by dynamic
//! programming over submasks instead of enumerating partitions.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::indexing::{submasks, LabeledSeq, Mask, Var, MAX_SUBSET_LEN};

/// Partition sum over the positions in `mask` of `ground`, keeping only
/// partitions whose every block passes `accept`.
pub fn sum_over_partitions<A, F>(ground: &LabeledSeq, mask: Mask, accept: A, mut weight: F) -> Result<Complex64>
where
    A: Fn(Mask) -> bool,
    F: FnMut(&[Var]) -> Result<Complex64>,
{
    let n = ground.len();
    if n > MAX_SUBSET_LEN {
        return Err(Error::SizeGuard {
            what: "partition sum",
            len: n,
            max: MAX_SUBSET_LEN,
        });
    }
    if mask == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let size = 1usize << n;
    let mut total = vec![Complex64::new(0.0, 0.0); size];
    let mut block: Vec<Option<Complex64>> = vec![None; size];
    total[0] = Complex64::new(1.0, 0.0);
    let mut order: Vec<Mask> = submasks(mask).collect();
    order.reverse();
    for &r in order.iter().skip(1) {
        let low = r & r.wrapping_neg();
        let rest = r & !low;
        let mut acc = Complex64::new(0.0, 0.0);
        for s in submasks(rest) {
            let b = s | low;
            if !accept(b) {
                continue;
            }
            let tail = total[(r & !b) as usize];
            let w = match block[b as usize] {
                Some(w) => w,
                None => {
                    let w = weight(&ground.vars_of(b))?;
                    block[b as usize] = Some(w);
                    w
                }
            };
            acc += w * tail;
        }
        total[r as usize] = acc;
    }
    Ok(total[mask as usize])
}
