//! Finite lattice geometry.
//!
//! A [`Lattice`] is either a box `{-L, ..., L}^d` (walks leaving it are
//! killed) or a periodic torus of side `N` whose coordinates are the centered
//! representatives `{-floor(N/2), ..., N - 1 - floor(N/2)}`. For even `N = 2L`
//! this is `{-L, ..., L-1}`. Distances are Euclidean; on the torus they use
//! the minimal image.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Finite box; edges may leave it and the walk is killed when it jumps out.
    Box,
    /// Periodic identification `x ~ x + N e_i`.
    Torus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    side: usize,
    lo: i64,
    boundary: Boundary,
}

impl Lattice {
    /// The box `{-half_width, ..., half_width}^dim`.
    pub fn cube(dim: usize, half_width: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        let side = 2 * half_width + 1;
        Self::checked(dim, side, -(half_width as i64), Boundary::Box)
    }

    /// The torus `(Z / side Z)^dim`.
    pub fn torus(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if side < 2 {
            return Err(Error::param("side", "torus side must be at least 2"));
        }
        Self::checked(dim, side, -((side / 2) as i64), Boundary::Torus)
    }

    fn checked(dim: usize, side: usize, lo: i64, boundary: Boundary) -> Result<Self> {
        let mut n: usize = 1;
        for _ in 0..dim {
            n = n
                .checked_mul(side)
                .filter(|&n| n <= u32::MAX as usize / 2)
                .ok_or_else(|| Error::param("L", "lattice has too many sites"))?;
        }
        Ok(Lattice {
            dim,
            side,
            lo,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_torus(&self) -> bool {
        self.boundary == Boundary::Torus
    }

    /// Smallest coordinate value along each axis.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Largest coordinate value along each axis.
    pub fn hi(&self) -> i64 {
        self.lo + self.side as i64 - 1
    }

    /// `L` for a box, `floor(N/2)` for a torus.
    pub fn half_width(&self) -> usize {
        match self.boundary {
            Boundary::Box => (self.side - 1) / 2,
            Boundary::Torus => self.side / 2,
        }
    }

    /// Largest radius of a ball around the origin that stays inside the box,
    /// or on a torus, whose minimal-image distances stay below half the side.
    pub fn inscribed_radius(&self) -> f64 {
        match self.boundary {
            Boundary::Box => self.half_width() as f64,
            Boundary::Torus => (self.side / 2) as f64,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn origin(&self) -> usize {
        self.index(&vec![0; self.dim]).expect("origin lies in every lattice")
    }

    /// Whether `coord` is a site of the lattice. Always true on a torus.
    pub fn contains(&self, coord: &[i64]) -> bool {
        self.is_torus() || coord.iter().all(|&c| c >= self.lo && c <= self.hi())
    }

    fn wrap1(&self, c: i64) -> i64 {
        let n = self.side as i64;
        (c - self.lo).rem_euclid(n) + self.lo
    }

    /// Canonical representative of `coord` (identity on a box).
    pub fn wrap(&self, coord: &mut [i64]) {
        if self.is_torus() {
            for c in coord.iter_mut() {
                *c = self.wrap1(*c);
            }
        }
    }

    /// Row-major index of `coord` (last axis fastest); `None` outside a box.
    pub fn index(&self, coord: &[i64]) -> Option<usize> {
        debug_assert_eq!(coord.len(), self.dim);
        let mut idx = 0usize;
        for &c in coord {
            let c = if self.is_torus() { self.wrap1(c) } else { c };
            if c < self.lo || c > self.hi() {
                return None;
            }
            idx = idx * self.side + (c - self.lo) as usize;
        }
        Some(idx)
    }

    pub fn coord_into(&self, mut idx: usize, out: &mut [i64]) {
        for k in (0..self.dim).rev() {
            out[k] = (idx % self.side) as i64 + self.lo;
            idx /= self.side;
        }
    }

    pub fn coord(&self, idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        self.coord_into(idx, &mut out);
        out
    }

    /// Displacement `to - from`, reduced to the minimal image on a torus.
    pub fn displacement(&self, from: &[i64], to: &[i64], out: &mut [i64]) {
        let n = self.side as i64;
        for k in 0..self.dim {
            let mut z = to[k] - from[k];
            if self.is_torus() {
                z = z.rem_euclid(n);
                if 2 * z > n {
                    z -= n;
                }
            }
            out[k] = z;
        }
    }

    pub fn distance(&self, from: &[i64], to: &[i64]) -> f64 {
        let mut z = vec![0; self.dim];
        self.displacement(from, to, &mut z);
        norm(&z)
    }

    /// Sites `y` with `|y - center| <= radius`, as sorted indices.
    ///
    /// On a box the ball is clipped to the box; on a torus wrapped copies are
    /// merged.
    pub fn ball(&self, center: &[i64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if radius < 0.0 {
            return out;
        }
        let r = libm::floor(radius) as i64;
        let r2 = radius * radius;
        let mut y = vec![0i64; self.dim];
        for_each_offset(self.dim, r, |z| {
            if (norm2(z) as f64) <= r2 {
                for k in 0..self.dim {
                    y[k] = center[k] + z[k];
                }
                if let Some(i) = self.index(&y) {
                    out.push(i);
                }
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Squared Euclidean norm of an integer vector.
pub fn norm2(z: &[i64]) -> i64 {
    z.iter().map(|&c| c * c).sum()
}

pub fn norm(z: &[i64]) -> f64 {
    libm::sqrt(norm2(z) as f64)
}

/// Visits every `z` in `{-r, ..., r}^dim` in lexicographic order.
pub fn for_each_offset(dim: usize, r: i64, mut f: impl FnMut(&[i64])) {
    if r < 0 {
        return;
    }
    let mut z = vec![-r; dim];
    loop {
        f(&z);
        let mut k = dim;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if z[k] < r {
                z[k] += 1;
                break;
            }
            z[k] = -r;
        }
    }
}

/// Offsets with `0 < |z| <= cutoff` whose first nonzero entry is positive,
/// i.e. one representative of every `{z, -z}` pair, in lexicographic order.
pub fn half_space_offsets(dim: usize, cutoff: f64) -> Vec<Vec<i64>> {
    let r = libm::floor(cutoff) as i64;
    let c2 = cutoff * cutoff;
    let mut out = Vec::new();
    for_each_offset(dim, r, |z| {
        let first = z.iter().copied().find(|&c| c != 0);
        if matches!(first, Some(c) if c > 0) && (norm2(z) as f64) <= c2 {
            out.push(z.to_vec());
        }
    });
    out
}
