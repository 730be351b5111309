//! Periodic lattices, their dual grids, FFTs and dispersion relations.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `{0, …, L−1}^d` with periodic arithmetic; the dual grid is `{0, 1/L, …}^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    pub l: usize,
}

impl Lattice {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("dimension {d} outside 1..=3")));
        }
        if l < 2 || !l.is_power_of_two() {
            return Err(Error::Config(format!("side {l} must be a power of two ≥ 2")));
        }
        Ok(Lattice { d, l })
    }

    pub fn volume(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Row-major coordinates of a flat index (unused axes are 0).
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut r = idx;
        for ax in (0..self.d).rev() {
            c[ax] = r % self.l;
            r /= self.l;
        }
        c
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        (0..self.d).fold(0, |acc, ax| acc * self.l + c[ax] % self.l)
    }

    /// Dual momentum `k ∈ [0,1)^d` of a flat index.
    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut k = [0.0; 3];
        for ax in 0..self.d {
            k[ax] = c[ax] as f64 / self.l as f64;
        }
        k
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        self.index([ca[0] + cb[0], ca[1] + cb[1], ca[2] + cb[2]])
    }

    pub fn neg(&self, a: usize) -> usize {
        let c = self.coords(a);
        self.index([(self.l - c[0]) % self.l, (self.l - c[1]) % self.l, (self.l - c[2]) % self.l])
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }

    /// Unit vector along `axis`.
    pub fn unit(&self, axis: usize) -> usize {
        let mut c = [0; 3];
        c[axis] = 1;
        self.index(c)
    }
}

/// Multi-dimensional FFT via 1-D transforms along each axis.
///
/// `forward` computes `ψ̂(k) = Σ_x e^{−i2πk·x} ψ(x)`; `inverse` is its exact
/// inverse including the `L^{−d}` factor.
#[derive(Clone)]
pub struct LatticeFft {
    lattice: Lattice,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LatticeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeFft").field("lattice", &self.lattice).finish()
    }
}

impl LatticeFft {
    pub fn new(lattice: Lattice) -> Self {
        let mut planner = FftPlanner::new();
        LatticeFft {
            lattice,
            fwd: planner.plan_fft_forward(lattice.l),
            inv: planner.plan_fft_inverse(lattice.l),
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn along_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let l = self.lattice.l;
        let d = self.lattice.d;
        let mut line = vec![Complex64::default(); l];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for ax in 0..d {
            let stride = l.pow((d - 1 - ax) as u32);
            let block = stride * l;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, z) in line.iter_mut().enumerate() {
                        *z = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, z) in line.iter().enumerate() {
                        data[start + j * stride] = *z;
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.inv);
        let s = 1.0 / self.lattice.volume() as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }
}

/// Symmetric, finitely supported hopping amplitude `α(x)` and its
/// dispersion `ω(k) = α̂(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    /// `(offset, α)` pairs; offsets are signed per axis.
    pub hopping: Vec<([i64; 3], f64)>,
}

impl Dispersion {
    /// `ω(k) = Σ_ν 2(1 − cos 2πk_ν)`.
    pub fn nearest_neighbor(d: usize) -> Self {
        let mut hopping = vec![([0; 3], 2.0 * d as f64)];
        for ax in 0..d {
            for s in [1, -1] {
                let mut o = [0; 3];
                o[ax] = s;
                hopping.push((o, -1.0));
            }
        }
        Dispersion { hopping }
    }

    /// Nearest-neighbor plus `t2` times the diagonal next-nearest neighbors,
    /// `ω(k) += Σ_{ν<μ} 4 t2 (1 − cos 2πk_ν cos 2πk_μ)`.
    pub fn next_nearest(d: usize, t2: f64) -> Self {
        let mut disp = Dispersion::nearest_neighbor(d);
        let pairs = d * (d.saturating_sub(1)) / 2;
        disp.hopping[0].1 += 4.0 * t2 * pairs as f64;
        for a in 0..d {
            for b in a + 1..d {
                for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let mut o = [0; 3];
                    o[a] = sa;
                    o[b] = sb;
                    disp.hopping.push((o, -t2));
                }
            }
        }
        disp
    }

    /// `α = c·1(x=0)`, i.e. `ω ≡ c`.
    pub fn constant(c: f64) -> Self {
        Dispersion {
            hopping: vec![([0; 3], c)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (o, a) in &self.hopping {
            let m = [-o[0], -o[1], -o[2]];
            let back: f64 = self.hopping.iter().filter(|(p, _)| *p == m).map(|(_, b)| b).sum();
            let fwd: f64 = self.hopping.iter().filter(|(p, _)| p == o).map(|(_, b)| b).sum();
            if (back - fwd).abs() > 1e-14 * (1.0 + a.abs()) {
                return Err(Error::Config(format!("hopping is not symmetric at offset {o:?}")));
            }
        }
        Ok(())
    }

    /// `ω(k)` on the dual grid.
    pub fn omega(&self, lattice: &Lattice) -> Vec<f64> {
        (0..lattice.volume())
            .map(|i| {
                let k = lattice.momentum(i);
                self.hopping
                    .iter()
                    .map(|(o, a)| {
                        let ph: f64 = (0..lattice.d).map(|ax| k[ax] * o[ax] as f64).sum();
                        a * (2.0 * PI * ph).cos()
                    })
                    .sum()
            })
            .collect()
    }
}
