//! Real-valued functions on the sites of an environment, and on a uniform
//! time grid times those sites.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Environment;

/// One value per lattice site, indexed like [`crate::Lattice::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeField {
    values: Vec<f64>,
}

impl LatticeField {
    pub fn new(values: Vec<f64>) -> Self {
        LatticeField { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        LatticeField { values: vec![c; n] }
    }

    /// Indicator of site `x`.
    pub fn delta(n: usize, x: usize) -> Self {
        let mut f = Self::zeros(n);
        f.values[x] = 1.0;
        f
    }

    pub fn from_fn(env: &Environment, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let lat = env.lattice();
        let mut c = vec![0; lat.dim()];
        let values = (0..env.num_sites())
            .map(|i| {
                lat.coord_into(i, &mut c);
                f(&c)
            })
            .collect();
        LatticeField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        LatticeField::new(self.values.iter().map(|v| a * v).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        LatticeField::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    /// Errors unless the field matches `env` and every value is finite.
    pub fn check(&self, env: &Environment) -> Result<()> {
        if self.values.len() != env.num_sites() {
            return Err(Error::FieldMismatch {
                expected: env.num_sites(),
                got: self.values.len(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "field",
                alloc::format!("non-finite value at site {:?}", env.lattice().coord(i)),
            ));
        }
        Ok(())
    }
}

impl Index<usize> for LatticeField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for LatticeField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Uniform time grid `t0, t0 + dt, ..., t0 + steps * dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("time grid", "need finite t0 and dt > 0"));
        }
        Ok(TimeGrid { t0, dt, steps })
    }

    /// `steps` equal steps covering `[t0, t1]`.
    pub fn span(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t1 > t0) {
            return Err(Error::param("time grid", "need t1 > t0 and steps >= 1"));
        }
        Self::new(t0, (t1 - t0) / steps as f64, steps)
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            // avoid drift at the endpoint
            self.t0 + self.dt * self.steps as f64
        } else {
            self.t0 + self.dt * k as f64
        }
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid indices whose times lie in `[lo, hi]`, with a snapping tolerance
    /// of `1e-9 dt` on both ends. `None` if no grid time qualifies.
    pub fn window(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let eps = 1e-9 * self.dt;
        let a = libm::ceil((lo - self.t0 - eps) / self.dt).max(0.0);
        let b = libm::floor((hi - self.t0 + eps) / self.dt).min(self.steps as f64);
        if a > b || b < 0.0 {
            return None;
        }
        Some((a as usize, b as usize))
    }

    /// Whether `[lo, hi]` lies inside the grid span (up to snapping).
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let eps = 1e-9 * self.dt;
        lo >= self.t0 - eps && hi <= self.end() + eps
    }
}

/// Values on a [`TimeGrid`] times the lattice sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    grid: TimeGrid,
    slices: Vec<LatticeField>,
}

impl SpaceTimeField {
    pub fn new(grid: TimeGrid, slices: Vec<LatticeField>) -> Result<Self> {
        if slices.len() != grid.len() {
            return Err(Error::param("space-time field", "need one slice per grid time"));
        }
        if slices.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::param("space-time field", "slices differ in size"));
        }
        Ok(SpaceTimeField { grid, slices })
    }

    /// The constant `c` on every site and grid time.
    pub fn constant(grid: TimeGrid, n: usize, c: f64) -> Self {
        SpaceTimeField {
            grid,
            slices: vec![LatticeField::constant(n, c); grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn slices(&self) -> &[LatticeField] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &LatticeField {
        &self.slices[k]
    }

    pub fn last(&self) -> &LatticeField {
        self.slices.last().expect("a grid has at least one time")
    }

    pub fn num_sites(&self) -> usize {
        self.slices[0].len()
    }

    /// The same field with grid times shifted so that it starts at `t0`.
    pub fn with_start(mut self, t0: f64) -> Self {
        self.grid.t0 = t0;
        self
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpaceTimeField {
            grid: self.grid,
            slices: self.slices.iter().map(|s| s.scaled(a)).collect(),
        }
    }

    pub fn check(&self, env: &Environment) -> Result<()> {
        self.slices.iter().try_for_each(|s| s.check(env))
    }
}
