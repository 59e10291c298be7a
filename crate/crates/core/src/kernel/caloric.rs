use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::JumpOperator;
use crate::error::{Error, Result};
use crate::field::{LatticeField, SpaceTimeField, TimeGrid};
use crate::Environment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderKind {
    /// `[t - s, t] x B_R(x)`.
    Q,
    /// `[t0 - r^2, t0] x B_r`.
    QMinus,
    /// `[t0, t0 + r^2] x B_r`.
    QPlus,
    /// `[t0 - 2r^2, t0 - r^2] x B_r`.
    UMinus,
    /// `[t0 + r^2, t0 + 2r^2] x B_r`.
    UPlus,
    /// `[t0 - 2R^2, t0 + 2R^2] x B_R`, the window on which a Harnack
    /// comparison is solved.
    Harnack,
}

/// A space-time window `[t_lo, t_hi] x B_R(center)` with Euclidean balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub kind: CylinderKind,
    pub t0: f64,
    pub center: Vec<i64>,
    /// Temporal depth `s`; only meaningful for [`CylinderKind::Q`].
    pub depth: f64,
    pub radius: f64,
}

impl Cylinder {
    fn make(kind: CylinderKind, t0: f64, center: &[i64], depth: f64, radius: f64) -> Result<Self> {
        if !(radius >= 1.0 && radius.is_finite()) {
            return Err(Error::param("R", "cylinder radius must be at least 1"));
        }
        if !(depth > 0.0 && depth.is_finite() && t0.is_finite()) {
            return Err(Error::param("s", "cylinder depth must be positive"));
        }
        Ok(Cylinder {
            kind,
            t0,
            center: center.to_vec(),
            depth,
            radius,
        })
    }

    pub fn q(t: f64, center: &[i64], s: f64, radius: f64) -> Result<Self> {
        Self::make(CylinderKind::Q, t, center, s, radius)
    }

    pub fn q_minus(t0: f64, center: &[i64], r: f64) -> Result<Self> {
        Self::make(CylinderKind::QMinus, t0, center, r * r, r)
    }

    pub fn q_plus(t0: f64, center: &[i64], r: f64) -> Result<Self> {
        Self::make(CylinderKind::QPlus, t0, center, r * r, r)
    }

    pub fn u_minus(t0: f64, center: &[i64], r: f64) -> Result<Self> {
        Self::make(CylinderKind::UMinus, t0, center, r * r, r)
    }

    pub fn u_plus(t0: f64, center: &[i64], r: f64) -> Result<Self> {
        Self::make(CylinderKind::UPlus, t0, center, r * r, r)
    }

    pub fn harnack(t0: f64, center: &[i64], big_r: f64) -> Result<Self> {
        Self::make(CylinderKind::Harnack, t0, center, 4.0 * big_r * big_r, big_r)
    }

    /// Time interval of the window.
    pub fn interval(&self) -> (f64, f64) {
        let r2 = self.radius * self.radius;
        match self.kind {
            CylinderKind::Q => (self.t0 - self.depth, self.t0),
            CylinderKind::QMinus => (self.t0 - r2, self.t0),
            CylinderKind::QPlus => (self.t0, self.t0 + r2),
            CylinderKind::UMinus => (self.t0 - 2.0 * r2, self.t0 - r2),
            CylinderKind::UPlus => (self.t0 + r2, self.t0 + 2.0 * r2),
            CylinderKind::Harnack => (self.t0 - 2.0 * r2, self.t0 + 2.0 * r2),
        }
    }

    pub fn duration(&self) -> f64 {
        let (a, b) = self.interval();
        b - a
    }

    /// Sorted site indices of the ball.
    pub fn sites(&self, env: &Environment) -> Vec<usize> {
        env.lattice().ball(&self.center, self.radius)
    }
}

/// Values of `u` outside a cylinder's ball, on the solver's time grid.
///
/// `sites[k][x]` is the value at lattice site `x` and grid time `k`, NaN
/// where nothing is prescribed. Halo sites of a box take their value from
/// `halo`, falling back to `halo_default`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorData {
    pub grid: TimeGrid,
    pub sites: Vec<Vec<f64>>,
    pub halo: BTreeMap<u32, Vec<f64>>,
    pub halo_default: Option<f64>,
}

impl ExteriorData {
    /// The same value `c` everywhere and at all times, halo included.
    pub fn constant(env: &Environment, grid: TimeGrid, c: f64) -> Self {
        ExteriorData {
            grid,
            sites: vec![vec![c; env.num_sites()]; grid.len()],
            halo: BTreeMap::new(),
            halo_default: Some(c),
        }
    }

    /// Zero exterior: the walk is killed on leaving the ball.
    pub fn killed(env: &Environment, grid: TimeGrid) -> Self {
        Self::constant(env, grid, 0.0)
    }

    /// Time-independent data given by a function of lattice coordinates,
    /// evaluated at lattice and halo sites alike.
    pub fn stationary(env: &Environment, grid: TimeGrid, f: impl Fn(&[i64]) -> f64) -> Self {
        let slice: Vec<f64> = (0..env.num_sites()).map(|x| f(&env.coord(x as u32))).collect();
        let n = env.num_sites() as u32;
        let halo = (n..n + env.num_halo() as u32)
            .map(|h| (h, vec![f(&env.coord(h)); grid.len()]))
            .collect();
        ExteriorData {
            grid,
            sites: vec![slice; grid.len()],
            halo,
            halo_default: None,
        }
    }

    /// Wraps a space-time field over all lattice sites; halo values default
    /// to 0.
    pub fn from_field(field: &SpaceTimeField) -> Self {
        ExteriorData {
            grid: *field.grid(),
            sites: field.slices().iter().map(|s| s.values().to_vec()).collect(),
            halo: BTreeMap::new(),
            halo_default: Some(0.0),
        }
    }

    /// Value at any id (lattice or halo) and grid time `k`; NaN if unknown.
    pub fn value(&self, env: &Environment, id: u32, k: usize) -> f64 {
        if (id as usize) < env.num_sites() {
            self.sites[k][id as usize]
        } else if let Some(v) = self.halo.get(&id) {
            v[k]
        } else {
            self.halo_default.unwrap_or(f64::NAN)
        }
    }

    fn check(&self, env: &Environment) -> Result<()> {
        if self.sites.len() != self.grid.len() || self.halo.values().any(|v| v.len() != self.grid.len()) {
            return Err(Error::param("exterior", "need one slice per grid time"));
        }
        if let Some(s) = self.sites.iter().find(|s| s.len() != env.num_sites()) {
            return Err(Error::FieldMismatch {
                expected: env.num_sites(),
                got: s.len(),
            });
        }
        Ok(())
    }
}

/// Solves `du/dt = Lu` on the ball of `cyl` over the grid of `exterior`,
/// which must span the cylinder's time interval. Neighbours outside the ball
/// are frozen to the exterior data, held constant over each step at the mean
/// of its two endpoint values.
///
/// The returned field covers every lattice site: the ball carries the
/// solution, other sites carry the exterior data (0 where none is given).
pub fn solve_caloric(
    env: &Environment,
    cyl: &Cylinder,
    initial: &LatticeField,
    exterior: &ExteriorData,
    tol: f64,
) -> Result<SpaceTimeField> {
    super::check_tol(tol)?;
    initial.check(env)?;
    exterior.check(env)?;
    let grid = exterior.grid;
    let (lo, hi) = cyl.interval();
    let eps = 1e-9 * grid.dt;
    if (grid.t0 - lo).abs() > eps || (grid.end() - hi).abs() > eps {
        return Err(Error::pre(alloc::format!(
            "exterior grid [{}, {}] does not match the cylinder interval [{lo}, {hi}]",
            grid.t0,
            grid.end()
        )));
    }
    let sites = cyl.sites(env);
    if sites.is_empty() {
        return Err(Error::pre("cylinder ball contains no site of the environment"));
    }
    let op = JumpOperator::on_sites(env, sites)?;

    let ext_ids = op.exterior_ids();
    let missing: Vec<Vec<i64>> = ext_ids
        .iter()
        .filter(|&&id| (0..grid.len()).any(|k| !exterior.value(env, id, k).is_finite()))
        .map(|&id| env.coord(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingExterior { sites: missing });
    }

    let mut inside = vec![false; env.num_sites()];
    op.sites().iter().for_each(|&x| inside[x] = true);
    let assemble = |ball: &[f64], k: usize| -> LatticeField {
        let mut v: Vec<f64> = exterior.sites[k]
            .iter()
            .map(|&a| if a.is_finite() { a } else { 0.0 })
            .collect();
        for (i, &x) in op.sites().iter().enumerate() {
            v[x] = ball[i];
        }
        LatticeField::new(v)
    };

    let mut u: Vec<f64> = op.sites().iter().map(|&x| initial[x]).collect();
    let mut slices = Vec::with_capacity(grid.len());
    slices.push(assemble(&u, 0));
    let step_tol = tol / grid.steps.max(1) as f64;
    for k in 0..grid.steps {
        let b = op.source(|id| 0.5 * (exterior.value(env, id, k) + exterior.value(env, id, k + 1)));
        u = op.step_with_source(&u, &b, grid.dt, step_tol);
        slices.push(assemble(&u, k + 1));
    }
    SpaceTimeField::new(grid, slices)
}
