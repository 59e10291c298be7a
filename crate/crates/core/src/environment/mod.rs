//! Random conductance environments on finite boxes and tori.
//!
//! An [`Environment`] stores the symmetric conductances `C(x, y)` as a
//! compressed adjacency list over the lattice sites. On a box, edges from a
//! box site to a site outside the box (a *halo* site) are kept as well: they
//! carry the exact `pi_x` of the infinite lattice and are the exits through
//! which walks and heat kernels are killed. Edges with both endpoints outside
//! the box are never stored.

mod exponents;
mod generate;
mod moments;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{norm, Lattice};

pub use exponents::{check_assumptions, AssumptionReport, ExponentSet};
pub use generate::{dropped_second_moment, long_range_percolation, polynomial_conductance, XiSpec, DROP_THRESHOLD};
pub use moments::{moments, tail, tail_with, MomentAggregates, MomentColumn, MomentProfile, MomentRequest};

/// Which family produced an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    /// Hand-built or loaded from an edge list.
    Custom,
    /// `P(C = 1) = |x - y|^{-(d+s)}`, otherwise `C = 0`.
    LongRangePercolation { s: f64 },
    /// `C = xi / |x - y|^{d+s}` with `xi = 1` on nearest-neighbour bonds.
    Polynomial { s: f64, xi: XiSpec },
}

impl Model {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Model::Custom => None,
            Model::LongRangePercolation { s } | Model::Polynomial { s, .. } => Some(*s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvMeta {
    #[serde(flatten)]
    pub model: Model,
    pub seed: Option<u64>,
}

impl Default for EnvMeta {
    fn default() -> Self {
        EnvMeta {
            model: Model::Custom,
            seed: None,
        }
    }
}

/// One unordered edge as written to environment files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub c: f64,
}

/// Borrowed adjacency row of one site.
#[derive(Clone, Copy, Debug)]
pub struct Row<'a> {
    /// Neighbour ids: `< num_sites` for lattice sites, halo sites above.
    pub targets: &'a [u32],
    pub conds: &'a [f64],
    /// Displacements `y - x` (minimal image on a torus), `dim` entries each.
    pub disps: &'a [i32],
    dim: usize,
}

impl<'a> Row<'a> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn disp(&self, k: usize) -> &'a [i32] {
        &self.disps[k * self.dim..(k + 1) * self.dim]
    }

    /// Euclidean length of edge `k`.
    pub fn length(&self, k: usize) -> f64 {
        let z = self.disp(k);
        libm::sqrt(z.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>())
    }
}

#[derive(Clone, Debug)]
pub struct Environment {
    lattice: Lattice,
    jump_cutoff: f64,
    meta: EnvMeta,
    row_start: Vec<usize>,
    target: Vec<u32>,
    disp: Vec<i32>,
    cond: Vec<f64>,
    pi: Vec<f64>,
    halo: Vec<i64>,
}

impl Environment {
    /// Constant conductance `c` on every nearest-neighbour bond.
    pub fn nearest_neighbour(lattice: Lattice, c: f64) -> Result<Self> {
        let mut b = EnvironmentBuilder::new(lattice.clone()).cutoff(1.0);
        let dim = lattice.dim();
        let mut x = vec![0; dim];
        let mut y = vec![0; dim];
        for i in 0..lattice.num_sites() {
            lattice.coord_into(i, &mut x);
            for k in 0..dim {
                for s in [1i64, -1] {
                    y.copy_from_slice(&x);
                    y[k] += s;
                    let j = lattice.index(&y);
                    // each interior pair once; exits always
                    if s == 1 || j.is_none() {
                        b.add_edge(&x, &y, c)?;
                    }
                }
            }
        }
        b.finish()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn num_sites(&self) -> usize {
        self.pi.len()
    }

    pub fn num_halo(&self) -> usize {
        self.halo.len() / self.dim()
    }

    pub fn is_torus(&self) -> bool {
        self.lattice.is_torus()
    }

    pub fn jump_cutoff(&self) -> f64 {
        self.jump_cutoff
    }

    pub fn meta(&self) -> &EnvMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: EnvMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Total jump rate `pi_x = sum_y C(x, y)`.
    pub fn pi(&self, x: usize) -> f64 {
        self.pi[x]
    }

    pub fn pis(&self) -> &[f64] {
        &self.pi
    }

    /// Largest total jump rate, the uniformization rate.
    pub fn max_rate(&self) -> f64 {
        self.pi.iter().copied().fold(0.0, f64::max)
    }

    pub fn row(&self, x: usize) -> Row<'_> {
        let (a, b) = (self.row_start[x], self.row_start[x + 1]);
        let d = self.dim();
        Row {
            targets: &self.target[a..b],
            conds: &self.cond[a..b],
            disps: &self.disp[a * d..b * d],
            dim: d,
        }
    }

    pub fn is_site(&self, target: u32) -> bool {
        (target as usize) < self.num_sites()
    }

    /// Coordinates of a lattice or halo site id.
    pub fn coord(&self, target: u32) -> Vec<i64> {
        let t = target as usize;
        let n = self.num_sites();
        if t < n {
            self.lattice.coord(t)
        } else {
            let d = self.dim();
            self.halo[(t - n) * d..(t - n + 1) * d].to_vec()
        }
    }

    /// Halo id of an exterior coordinate, if some stored edge reaches it.
    pub fn halo_id(&self, coord: &[i64]) -> Option<u32> {
        let d = self.dim();
        (0..self.num_halo())
            .find(|&h| &self.halo[h * d..(h + 1) * d] == coord)
            .map(|h| (self.num_sites() + h) as u32)
    }

    /// `C(x, y)` for two ids (0 when no edge is stored).
    pub fn conductance(&self, x: usize, y: u32) -> f64 {
        let row = self.row(x);
        match row.targets.binary_search(&y) {
            Ok(k) => row.conds[k],
            Err(_) => 0.0,
        }
    }

    /// Number of stored unordered edges.
    pub fn num_edges(&self) -> usize {
        let n = self.num_sites() as u32;
        (0..self.num_sites())
            .map(|x| self.row(x).targets.iter().filter(|&&t| t >= n || t > x as u32).count())
            .sum()
    }

    /// All unordered edges, each once with `x < y` lexicographically, sorted.
    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        let n = self.num_sites() as u32;
        let mut out = Vec::with_capacity(self.num_edges());
        for x in 0..self.num_sites() {
            let row = self.row(x);
            let cx = self.lattice.coord(x);
            for (k, &t) in row.targets.iter().enumerate() {
                if t < n && t <= x as u32 {
                    continue;
                }
                let cy = self.coord(t);
                let (a, b) = if cx < cy { (cx.clone(), cy) } else { (cy, cx.clone()) };
                out.push(EdgeRecord {
                    x: a,
                    y: b,
                    c: row.conds[k],
                });
            }
        }
        out.sort_by(|a, b| (&a.x, &a.y).cmp(&(&b.x, &b.y)));
        out
    }

    /// Rebuilds an environment from edge records (e.g. read from a file).
    pub fn from_records(
        lattice: Lattice,
        jump_cutoff: f64,
        meta: EnvMeta,
        records: impl IntoIterator<Item = EdgeRecord>,
    ) -> Result<Self> {
        let mut b = EnvironmentBuilder::new(lattice).cutoff(jump_cutoff).meta(meta);
        for r in records {
            b.add_edge(&r.x, &r.y, r.c)?;
        }
        b.finish()
    }

    /// The same environment with every conductance multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::param("factor", "must be positive and finite"));
        }
        let mut e = self.clone();
        e.cond.iter_mut().for_each(|c| *c *= factor);
        e.pi.iter_mut().for_each(|p| *p *= factor);
        Ok(e)
    }

    /// Maps `f(x, y, C)` over every stored unordered edge with both
    /// endpoints in the lattice, keeping the edge set (and so the symmetry).
    pub fn map_conductances(&self, mut f: impl FnMut(usize, u32, f64) -> f64) -> Result<Self> {
        let mut b = EnvironmentBuilder::new(self.lattice.clone())
            .cutoff(self.jump_cutoff)
            .meta(EnvMeta::default());
        let n = self.num_sites() as u32;
        for x in 0..self.num_sites() {
            let row = self.row(x);
            let cx = self.lattice.coord(x);
            for (k, &t) in row.targets.iter().enumerate() {
                if t < n && t <= x as u32 {
                    continue;
                }
                b.add_edge(&cx, &self.coord(t), f(x, t, row.conds[k]))?;
            }
        }
        b.finish()
    }
}

/// Collects unordered edges and assembles an [`Environment`].
#[derive(Debug)]
pub struct EnvironmentBuilder {
    lattice: Lattice,
    cutoff: Option<f64>,
    meta: EnvMeta,
    edges: Vec<(u32, u32, f64)>,
    halo_ids: BTreeMap<Vec<i64>, u32>,
    halo: Vec<i64>,
    longest: f64,
}

impl EnvironmentBuilder {
    pub fn new(lattice: Lattice) -> Self {
        EnvironmentBuilder {
            lattice,
            cutoff: None,
            meta: EnvMeta::default(),
            edges: Vec::new(),
            halo_ids: BTreeMap::new(),
            halo: Vec::new(),
            longest: 0.0,
        }
    }

    /// Rejects edges longer than `cutoff`; also recorded as the jump cutoff.
    pub fn cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn meta(mut self, meta: EnvMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Adds the unordered edge `{x, y}`. Zero conductances are skipped.
    pub fn add_edge(&mut self, x: &[i64], y: &[i64], c: f64) -> Result<()> {
        let dim = self.lattice.dim();
        let bad = |reason: &str| Error::InvalidEdge {
            x: x.to_vec(),
            y: y.to_vec(),
            reason: reason.into(),
        };
        if x.len() != dim || y.len() != dim {
            return Err(bad("coordinate dimension mismatch"));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(bad("conductance must be finite and nonnegative"));
        }
        if c == 0.0 {
            return Ok(());
        }
        let mut z = vec![0; dim];
        self.lattice.displacement(x, y, &mut z);
        if z.iter().all(|&c| c == 0) {
            return Err(bad("self-loop"));
        }
        if self.lattice.is_torus() {
            let side = self.lattice.side() as i64;
            if z.iter().any(|&c| 2 * c.abs() >= side) {
                return Err(bad("edge has no unique minimal image on this torus"));
            }
        }
        let len = norm(&z);
        if let Some(cut) = self.cutoff {
            if len > cut + 1e-9 {
                return Err(bad("edge longer than the jump cutoff"));
            }
        }
        self.longest = self.longest.max(len);
        let a = self.id(x);
        let b = self.id(y);
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(bad("edge has no endpoint in the box")),
        };
        let n = self.lattice.num_sites() as u32;
        if a >= n && b >= n {
            return Err(bad("edge has no endpoint in the box"));
        }
        self.edges.push((a.min(b), a.max(b), c));
        Ok(())
    }

    fn id(&mut self, c: &[i64]) -> Option<u32> {
        if let Some(i) = self.lattice.index(c) {
            return Some(i as u32);
        }
        let n = self.lattice.num_sites() as u32;
        if let Some(&h) = self.halo_ids.get(c) {
            return Some(h);
        }
        let h = n + self.halo_ids.len() as u32;
        self.halo_ids.insert(c.to_vec(), h);
        self.halo.extend_from_slice(c);
        Some(h)
    }

    pub fn finish(mut self) -> Result<Environment> {
        let n = self.lattice.num_sites();
        let dim = self.lattice.dim();
        // halo ids follow coordinate order, not insertion order, so that
        // row layout does not depend on how the edges were listed
        let h = self.halo.len() / dim.max(1);
        if h > 0 {
            let mut order: Vec<usize> = (0..h).collect();
            order.sort_unstable_by(|&a, &b| self.halo[a * dim..(a + 1) * dim].cmp(&self.halo[b * dim..(b + 1) * dim]));
            let mut rank = vec![0u32; h];
            for (new, &old) in order.iter().enumerate() {
                rank[old] = (n + new) as u32;
            }
            let relabel = |id: u32| if (id as usize) < n { id } else { rank[id as usize - n] };
            for e in self.edges.iter_mut() {
                let (a, b) = (relabel(e.0), relabel(e.1));
                *e = (a.min(b), a.max(b), e.2);
            }
            self.halo = order
                .iter()
                .flat_map(|&o| self.halo[o * dim..(o + 1) * dim].to_vec())
                .collect();
        }
        self.edges.sort_unstable_by_key(|e| (e.0, e.1));
        for w in self.edges.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                let x = self.coord_of(w[0].0);
                let y = self.coord_of(w[0].1);
                return Err(Error::InvalidEdge {
                    x,
                    y,
                    reason: "edge listed twice".into(),
                });
            }
        }
        let mut count = vec![0usize; n + 1];
        for &(a, b, _) in &self.edges {
            count[a as usize + 1] += 1;
            if (b as usize) < n {
                count[b as usize + 1] += 1;
            }
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let row_start = count.clone();
        let nnz = row_start[n];
        let mut fill = count;
        let mut target = vec![0u32; nnz];
        let mut cond = vec![0.0; nnz];
        let mut disp = vec![0i32; nnz * dim];
        let mut ca = vec![0i64; dim];
        let mut z = vec![0i64; dim];
        for &(a, b, c) in &self.edges {
            self.coord_into(a, &mut ca);
            let cb = self.coord_of(b);
            self.lattice.displacement(&ca, &cb, &mut z);
            let k = fill[a as usize];
            fill[a as usize] += 1;
            target[k] = b;
            cond[k] = c;
            for (dst, &v) in disp[k * dim..(k + 1) * dim].iter_mut().zip(&z) {
                *dst = v as i32;
            }
            if (b as usize) < n {
                let k = fill[b as usize];
                fill[b as usize] += 1;
                target[k] = a;
                cond[k] = c;
                for (dst, &v) in disp[k * dim..(k + 1) * dim].iter_mut().zip(&z) {
                    *dst = -v as i32;
                }
            }
        }
        // sort each row by target id
        for x in 0..n {
            let (s, e) = (row_start[x], row_start[x + 1]);
            let mut perm: Vec<usize> = (s..e).collect();
            perm.sort_unstable_by_key(|&k| target[k]);
            let t: Vec<u32> = perm.iter().map(|&k| target[k]).collect();
            let c: Vec<f64> = perm.iter().map(|&k| cond[k]).collect();
            let dz: Vec<i32> = perm
                .iter()
                .flat_map(|&k| disp[k * dim..(k + 1) * dim].iter().copied())
                .collect();
            target[s..e].copy_from_slice(&t);
            cond[s..e].copy_from_slice(&c);
            disp[s * dim..e * dim].copy_from_slice(&dz);
        }
        let mut pi = vec![0.0; n];
        for x in 0..n {
            pi[x] = cond[row_start[x]..row_start[x + 1]].iter().sum();
            if !(pi[x] > 0.0) {
                return Err(Error::IsolatedSite {
                    site: self.lattice.coord(x),
                });
            }
        }
        let jump_cutoff = self.cutoff.unwrap_or(self.longest);
        Ok(Environment {
            lattice: self.lattice,
            jump_cutoff,
            meta: self.meta,
            row_start,
            target,
            disp,
            cond,
            pi,
            halo: self.halo,
        })
    }

    fn coord_into(&self, id: u32, out: &mut [i64]) {
        let n = self.lattice.num_sites();
        let d = self.lattice.dim();
        if (id as usize) < n {
            self.lattice.coord_into(id as usize, out);
        } else {
            let h = id as usize - n;
            out.copy_from_slice(&self.halo[h * d..(h + 1) * d]);
        }
    }

    fn coord_of(&self, id: u32) -> Vec<i64> {
        let mut v = vec![0; self.lattice.dim()];
        self.coord_into(id, &mut v);
        v
    }
}

/// Checks the stored structure: symmetry, positivity and `pi` consistency.
///
/// Returns a description of the first violation.
pub fn validate(env: &Environment) -> core::result::Result<(), alloc::string::String> {
    let n = env.num_sites();
    for x in 0..n {
        let row = env.row(x);
        let mut sum = 0.0;
        for (k, &t) in row.targets.iter().enumerate() {
            let c = row.conds[k];
            if !(c > 0.0) {
                return Err(format!("non-positive stored conductance at site {x}"));
            }
            sum += c;
            if (t as usize) < n {
                let back = env.conductance(t as usize, x as u32);
                if back.to_bits() != c.to_bits() {
                    return Err(format!("asymmetric edge {x} -- {t}"));
                }
            }
        }
        if sum != env.pi(x) || !(sum > 0.0) {
            return Err(format!("pi mismatch at site {x}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbour_torus() {
        let env = Environment::nearest_neighbour(Lattice::torus(2, 4).unwrap(), 1.0).unwrap();
        assert_eq!(env.num_sites(), 16);
        assert_eq!(env.num_edges(), 32);
        assert!(env.pis().iter().all(|&p| p == 4.0));
        validate(&env).unwrap();
    }

    #[test]
    fn nearest_neighbour_box_keeps_exits() {
        let env = Environment::nearest_neighbour(Lattice::cube(2, 2).unwrap(), 1.0).unwrap();
        assert_eq!(env.num_sites(), 25);
        assert_eq!(env.num_halo(), 20);
        assert!(env.pis().iter().all(|&p| p == 4.0));
        validate(&env).unwrap();
        let corner = env.lattice().index(&[2, 2]).unwrap();
        let exits = env.row(corner).targets.iter().filter(|&&t| !env.is_site(t)).count();
        assert_eq!(exits, 2);
    }

    #[test]
    fn builder_rejects_bad_edges() {
        let lat = Lattice::torus(2, 4).unwrap();
        let mut b = EnvironmentBuilder::new(lat.clone());
        assert!(b.add_edge(&[0, 0], &[0, 0], 1.0).is_err());
        assert!(b.add_edge(&[0, 0], &[2, 0], 1.0).is_err());
        assert!(b.add_edge(&[0, 0], &[1, 0], -1.0).is_err());
        assert!(b.add_edge(&[0, 0], &[1, 0], f64::NAN).is_err());
        let mut b = EnvironmentBuilder::new(lat.clone());
        b.add_edge(&[0, 0], &[1, 0], 1.0).unwrap();
        b.add_edge(&[1, 0], &[0, 0], 1.0).unwrap();
        assert!(b.finish().is_err());
        // isolated sites
        let mut b = EnvironmentBuilder::new(lat);
        b.add_edge(&[0, 0], &[1, 0], 1.0).unwrap();
        assert!(matches!(b.finish(), Err(Error::IsolatedSite { .. })));
        let mut b = EnvironmentBuilder::new(Lattice::cube(1, 2).unwrap());
        assert!(b.add_edge(&[3], &[4], 1.0).is_err());
    }

    #[test]
    fn records_roundtrip() {
        let lat = Lattice::cube(2, 2).unwrap();
        let mut b = EnvironmentBuilder::new(lat.clone());
        let base = Environment::nearest_neighbour(lat.clone(), 1.0).unwrap();
        for r in base.edge_records() {
            b.add_edge(&r.x, &r.y, r.c).unwrap();
        }
        b.add_edge(&[0, 0], &[2, 1], 0.25).unwrap();
        b.add_edge(&[2, 2], &[4, 2], 0.5).unwrap();
        let env = b.finish().unwrap();
        let recs = env.edge_records();
        assert!(recs.windows(2).all(|w| (&w[0].x, &w[0].y) < (&w[1].x, &w[1].y)));
        let again = Environment::from_records(lat, env.jump_cutoff(), EnvMeta::default(), recs.clone()).unwrap();
        assert_eq!(again.edge_records(), recs);
        assert_eq!(again.pis(), env.pis());
        let x = env.lattice().index(&[2, 2]).unwrap();
        assert_eq!(env.pi(x), 4.5);
    }

    #[test]
    fn scaling_multiplies_rates() {
        let env = Environment::nearest_neighbour(Lattice::torus(2, 5).unwrap(), 1.0).unwrap();
        let s = env.scaled(2.5).unwrap();
        assert!(s.pis().iter().all(|&p| p == 10.0));
        assert!(env.scaled(0.0).is_err());
    }
}
