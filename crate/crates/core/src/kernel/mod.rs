//! Deterministic heat kernels and caloric functions.
//!
//! The semigroup `e^{tL}` is evaluated by uniformization: with
//! `Λ = max_x pi_x` and the sub-stochastic jump matrix `P = I + L/Λ`,
//! `e^{tL} u = sum_k Pois(Λt; k) P^k u`. The Poisson series is truncated
//! with a rigorous bound on the discarded mass, so the sup-norm error of
//! every returned slice is at most `tol * ||u||_inf`.
//!
//! On a box, edges to halo sites are exits: the walk is killed there, mass
//! decreases, and the result is the Dirichlet heat kernel of the box.

mod caloric;
mod ondiag;
mod poisson;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{LatticeField, SpaceTimeField, TimeGrid};
use crate::Environment;

pub use caloric::{solve_caloric, Cylinder, CylinderKind, ExteriorData};
pub use ondiag::{ondiag_check, OnDiagEntry, OnDiagReport};
pub use poisson::PoissonWindow;

/// `Lu(x) = sum_y (u(y) - u(x)) C(x, y)`; halo values come from `exterior`.
pub fn apply_generator_with(env: &Environment, u: &[f64], x: usize, exterior: impl Fn(u32) -> f64) -> f64 {
    let n = env.num_sites();
    let row = env.row(x);
    let ux = u[x];
    let mut s = 0.0;
    for (k, &t) in row.targets.iter().enumerate() {
        let uy = if (t as usize) < n { u[t as usize] } else { exterior(t) };
        s += (uy - ux) * row.conds[k];
    }
    s
}

/// [`apply_generator_with`] with exterior data 0 (killed).
pub fn apply_generator(env: &Environment, u: &LatticeField, x: usize) -> f64 {
    apply_generator_with(env, u.values(), x, |_| 0.0)
}

/// `Lu` at every site, exterior 0.
pub fn apply_generator_all(env: &Environment, u: &LatticeField) -> LatticeField {
    LatticeField::new(
        (0..env.num_sites())
            .map(|x| apply_generator_with(env, u.values(), x, |_| 0.0))
            .collect(),
    )
}

/// `(1/2) sum_{x,y} (f(x) - f(y))^2 C(x, y)` over ordered pairs of sites in
/// the environment. Exit edges of a box are not part of the form.
pub fn dirichlet_energy(env: &Environment, f: &LatticeField) -> f64 {
    let n = env.num_sites();
    let v = f.values();
    let mut s = 0.0;
    for x in 0..n {
        let row = env.row(x);
        for (k, &t) in row.targets.iter().enumerate() {
            if (t as usize) < n {
                let d = v[x] - v[t as usize];
                s += d * d * row.conds[k];
            }
        }
    }
    0.5 * s
}

/// The jump matrix `P = I + L/Λ` restricted to a set of sites.
///
/// Neighbours outside the set are couplings to exterior data; for the whole
/// environment, halo neighbours are dropped (killed).
#[derive(Clone, Debug)]
pub(crate) struct JumpOperator {
    sites: Vec<usize>,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
    keep: Vec<f64>,
    ext_start: Vec<usize>,
    ext_ids: Vec<u32>,
    ext_conds: Vec<f64>,
    rate: f64,
}

impl JumpOperator {
    pub(crate) fn whole(env: &Environment) -> Result<Self> {
        let sites: Vec<usize> = (0..env.num_sites()).collect();
        Self::build(env, sites, false)
    }

    /// Sorted `sites`; every other neighbour becomes an exterior coupling.
    pub(crate) fn on_sites(env: &Environment, sites: Vec<usize>) -> Result<Self> {
        Self::build(env, sites, true)
    }

    fn build(env: &Environment, sites: Vec<usize>, couple: bool) -> Result<Self> {
        let n = env.num_sites();
        let mut local = vec![u32::MAX; n];
        for (i, &x) in sites.iter().enumerate() {
            local[x] = i as u32;
        }
        let rate = sites.iter().map(|&x| env.pi(x)).fold(0.0, f64::max);
        if !(rate > 0.0) {
            return Err(Error::param("environment", "maximal jump rate is zero"));
        }
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut keep = Vec::with_capacity(sites.len());
        let mut ext_start = vec![0];
        let mut ext_ids = Vec::new();
        let mut ext_conds = Vec::new();
        for &x in &sites {
            let row = env.row(x);
            for (k, &t) in row.targets.iter().enumerate() {
                let c = row.conds[k];
                let inside = (t as usize) < n && local[t as usize] != u32::MAX;
                if inside {
                    cols.push(local[t as usize]);
                    weights.push(c / rate);
                } else if couple {
                    ext_ids.push(t);
                    ext_conds.push(c);
                }
            }
            row_start.push(cols.len());
            ext_start.push(ext_ids.len());
            keep.push(1.0 - env.pi(x) / rate);
        }
        Ok(JumpOperator {
            sites,
            row_start,
            cols,
            weights,
            keep,
            ext_start,
            ext_ids,
            ext_conds,
            rate,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.sites.len()
    }

    pub(crate) fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// Distinct exterior ids coupled to the domain, sorted.
    pub(crate) fn exterior_ids(&self) -> Vec<u32> {
        let mut v = self.ext_ids.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `out = P u`.
    pub(crate) fn apply(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let mut s = self.keep[i] * u[i];
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.weights[k] * u[self.cols[k] as usize];
            }
            out[i] = s;
        }
    }

    /// `b(x) = sum_{y exterior} C(x, y) g(y)`.
    pub(crate) fn source(&self, g: impl Fn(u32) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                (self.ext_start[i]..self.ext_start[i + 1])
                    .map(|k| self.ext_conds[k] * g(self.ext_ids[k]))
                    .sum()
            })
            .collect()
    }

    /// `e^{tL} u` at several times in one pass over the Poisson series.
    pub(crate) fn propagate(&self, u0: &[f64], times: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let windows: Vec<PoissonWindow> = times.iter().map(|&t| PoissonWindow::new(self.rate * t, tol)).collect();
        let last = windows.iter().map(|w| w.right()).max().unwrap_or(0);
        let mut acc = vec![vec![0.0; self.len()]; times.len()];
        let mut v = u0.to_vec();
        let mut next = vec![0.0; self.len()];
        for k in 0..=last {
            for (w, a) in windows.iter().zip(acc.iter_mut()) {
                let wk = w.weight(k);
                if wk != 0.0 {
                    a.iter_mut().zip(&v).for_each(|(a, &x)| *a += wk * x);
                }
            }
            if k < last {
                self.apply(&v, &mut next);
                core::mem::swap(&mut v, &mut next);
            }
        }
        acc
    }

    /// One step of `du/dt = Lu + b` with `b` constant over the step:
    /// `u(dt) = e^{dt L} u + int_0^dt e^{sL} b ds`, where the integral is
    /// `(1/Λ) sum_k P(N > k) P^k b`.
    pub(crate) fn step_with_source(&self, u: &[f64], b: &[f64], dt: f64, tol: f64) -> Vec<f64> {
        let w = PoissonWindow::new(self.rate * dt, tol);
        let surv = w.survival();
        let has_source = b.iter().any(|&v| v != 0.0);
        let mut out = vec![0.0; self.len()];
        let mut v = u.to_vec();
        let mut s = b.to_vec();
        let mut tmp = vec![0.0; self.len()];
        let inv_rate = 1.0 / self.rate;
        let last = w.right();
        for k in 0..=last {
            let wk = w.weight(k);
            let fk = if has_source { surv[k] * inv_rate } else { 0.0 };
            for i in 0..self.len() {
                out[i] += wk * v[i] + fk * s[i];
            }
            if k < last {
                self.apply(&v, &mut tmp);
                core::mem::swap(&mut v, &mut tmp);
                if has_source {
                    self.apply(&s, &mut tmp);
                    core::mem::swap(&mut s, &mut tmp);
                }
            }
        }
        out
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Error::param("tol", "tolerance must lie in (0, 1)"))
    }
}

/// `e^{tL} u0` for each of `times` (all `>= 0`), computed in one pass.
pub fn propagate(env: &Environment, u0: &LatticeField, times: &[f64], tol: f64) -> Result<Vec<LatticeField>> {
    check_tol(tol)?;
    u0.check(env)?;
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::param("t", "times must be finite and nonnegative"));
    }
    let op = JumpOperator::whole(env)?;
    Ok(op
        .propagate(u0.values(), times, tol)
        .into_iter()
        .map(LatticeField::new)
        .collect())
}

/// Solves `du/dt = Lu` from `u0` at time 0 up to `t_end`, returning the
/// two-point grid `{0, t_end}`.
pub fn evolve(env: &Environment, u0: &LatticeField, t_end: f64, tol: f64) -> Result<SpaceTimeField> {
    if !(t_end > 0.0) {
        return Err(Error::param("T", "final time must be positive"));
    }
    evolve_on_grid(env, u0, TimeGrid::span(0.0, t_end, 1)?, tol)
}

/// `u(t_k) = e^{(t_k - t0) L} u0` at every time of `grid`, `u0` sitting at
/// `grid.t0`.
pub fn evolve_on_grid(env: &Environment, u0: &LatticeField, grid: TimeGrid, tol: f64) -> Result<SpaceTimeField> {
    let times: Vec<f64> = (0..grid.len()).map(|k| grid.time(k) - grid.t0).collect();
    let slices = propagate(env, u0, &times, tol)?;
    SpaceTimeField::new(grid, slices)
}

/// `p(t, x, .)` with respect to counting measure.
pub fn heat_kernel(env: &Environment, t: f64, x: usize, tol: f64) -> Result<LatticeField> {
    if x >= env.num_sites() {
        return Err(Error::param("x", "site outside the environment"));
    }
    let delta = LatticeField::delta(env.num_sites(), x);
    Ok(propagate(env, &delta, &[t], tol)?.remove(0))
}
