//! Variable speed random walk in a fixed environment.
//!
//! From `x` the walk waits an `Exp(pi_x)` time and then jumps to `y` with
//! probability `C(x, y) / pi_x`. On a box, a jump to a halo site kills the
//! path; on a torus the walk wraps, and the unwrapped displacement is kept
//! alongside the current site.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, Stream, StreamFactory};
use crate::Environment;

/// Walker's alias table for one row: `O(1)` sampling of the jump target.
#[derive(Clone, Debug)]
struct Alias {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl Alias {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        Alias { prob, alias }
    }

    fn sample(&self, s: &mut Stream) -> usize {
        let i = s.below(self.prob.len());
        if s.uniform() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    /// Lattice site index, or a halo id when the jump killed the path.
    pub target: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: usize,
    pub jumps: Vec<Jump>,
    pub horizon: f64,
    /// Whether the path left the box before the horizon.
    pub killed: bool,
    /// Sum of the jump displacements (not wrapped on a torus).
    pub displacement: Vec<i64>,
}

impl Trajectory {
    /// Site occupied at the end (the exit id if killed).
    pub fn end(&self) -> u32 {
        self.jumps.last().map_or(self.start as u32, |j| j.target)
    }

    /// Site occupied at time `t <= horizon`.
    pub fn site_at(&self, t: f64) -> u32 {
        let k = self.jumps.partition_point(|j| j.time <= t);
        if k == 0 {
            self.start as u32
        } else {
            self.jumps[k - 1].target
        }
    }

    /// Checks increasing jump times and that every step uses a stored edge.
    pub fn validate(&self, env: &Environment) -> core::result::Result<(), String> {
        let mut at = self.start as u32;
        let mut last = 0.0;
        for (i, j) in self.jumps.iter().enumerate() {
            if !(j.time > last) || j.time > self.horizon {
                return Err(format!("jump {i} at time {} is out of order", j.time));
            }
            if !env.is_site(at) {
                return Err(format!("jump {i} leaves an exit site"));
            }
            if env.conductance(at as usize, j.target) <= 0.0 {
                return Err(format!("jump {i} uses no stored edge"));
            }
            last = j.time;
            at = j.target;
        }
        if self.killed != !env.is_site(at) {
            return Err("killed flag disagrees with the final site".into());
        }
        Ok(())
    }
}

/// Environment plus alias tables and the walk's stream key.
#[derive(Clone, Debug)]
pub struct Walker<'a> {
    env: &'a Environment,
    tables: Vec<Alias>,
    streams: StreamFactory,
}

impl<'a> Walker<'a> {
    pub fn new(env: &'a Environment, seed: u64) -> Self {
        let tables = (0..env.num_sites()).map(|x| Alias::new(env.row(x).conds)).collect();
        Walker {
            env,
            tables,
            streams: StreamFactory::new(seed, Domain::Walk),
        }
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    /// One path from `x0` up to time `horizon`, a function of `stream_id`.
    pub fn sample_path(&self, x0: usize, horizon: f64, stream_id: u64) -> Result<Trajectory> {
        self.run(x0, horizon, stream_id, true)
    }

    fn run(&self, x0: usize, horizon: f64, stream_id: u64, record: bool) -> Result<Trajectory> {
        let env = self.env;
        if x0 >= env.num_sites() {
            return Err(Error::param("x0", "start outside the environment"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("T", "horizon must be positive"));
        }
        let mut s = self.streams.stream(stream_id);
        let mut x = x0;
        let mut t = 0.0;
        let mut jumps = Vec::new();
        let mut displacement = vec![0i64; env.dim()];
        let mut last = None;
        loop {
            let rate = env.pi(x);
            if !(rate > 0.0) {
                return Err(Error::IsolatedSite {
                    site: env.lattice().coord(x),
                });
            }
            t += s.exponential(rate);
            if t > horizon {
                break;
            }
            let row = env.row(x);
            let k = self.tables[x].sample(&mut s);
            let y = row.targets[k];
            for (a, &b) in displacement.iter_mut().zip(row.disp(k)) {
                *a += b as i64;
            }
            let jump = Jump { time: t, target: y };
            if record {
                jumps.push(jump);
            } else {
                last = Some(jump);
            }
            if !env.is_site(y) {
                break;
            }
            x = y as usize;
        }
        if let (false, Some(j)) = (record, last) {
            jumps.push(j);
        }
        let killed = jumps.last().is_some_and(|j| !env.is_site(j.target));
        Ok(Trajectory {
            start: x0,
            jumps,
            horizon,
            killed,
            displacement,
        })
    }

    /// Endpoint of one path, without storing the intermediate jumps.
    pub fn endpoint(&self, x0: usize, horizon: f64, stream_id: u64) -> Result<Trajectory> {
        self.run(x0, horizon, stream_id, false)
    }

    /// Histogram of `samples` endpoints at time `t` from the origin, using
    /// streams `base_stream .. base_stream + samples`.
    pub fn empirical_kernel(&self, t: f64, samples: usize, base_stream: u64) -> Result<EmpiricalKernel> {
        if samples == 0 {
            return Err(Error::param("N", "need at least one sample"));
        }
        let o = self.env.lattice().origin();
        let mut k = EmpiricalKernel::empty(t, self.env.num_sites());
        for i in 0..samples as u64 {
            k.record(&self.endpoint(o, t, base_stream + i)?);
        }
        Ok(k)
    }

    /// `samples` draws of `X_{n^2 t} / n` from the origin.
    pub fn scaled_endpoint_samples(&self, n: u32, t: f64, samples: usize, base_stream: u64) -> Result<ScaledSamples> {
        if n == 0 {
            return Err(Error::param("n", "scale must be at least 1"));
        }
        let o = self.env.lattice().origin();
        let h = (n as f64) * (n as f64) * t;
        let ends = (0..samples as u64)
            .map(|i| self.endpoint(o, h, base_stream + i))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScaledSamples::from_endpoints(self.env, n, t, &ends))
    }
}

/// Warns when the diffusive range at time `h` reaches the edge of the box,
/// judged by three standard deviations of a walk with per-coordinate variance
/// `mean(mu) h / d`.
fn range_warnings(env: &Environment, h: f64, killed: usize, samples: usize) -> Vec<String> {
    let mut w = Vec::new();
    let n = env.num_sites();
    let mean_mu: f64 = (0..n)
        .map(|x| {
            let row = env.row(x);
            (0..row.len())
                .map(|k| row.length(k) * row.length(k) * row.conds[k])
                .sum::<f64>()
        })
        .sum::<f64>()
        / n as f64;
    let spread = 3.0 * libm::sqrt(mean_mu * h / env.dim() as f64);
    let reach = env.lattice().inscribed_radius();
    if spread > reach {
        w.push(format!(
            "diffusive range {spread:.3} exceeds the inscribed radius {reach} of the lattice"
        ));
    }
    if killed > 0 {
        w.push(format!("{killed} of {samples} paths left the box and were dropped"));
    }
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalKernel {
    pub t: f64,
    pub samples: usize,
    pub counts: Vec<u64>,
    pub killed: u64,
}

impl EmpiricalKernel {
    pub fn empty(t: f64, num_sites: usize) -> Self {
        EmpiricalKernel {
            t,
            samples: 0,
            counts: vec![0; num_sites],
            killed: 0,
        }
    }

    pub fn record(&mut self, tr: &Trajectory) {
        self.samples += 1;
        if tr.killed {
            self.killed += 1;
        } else {
            self.counts[tr.end() as usize] += 1;
        }
    }

    /// Estimated `p(t, 0, x)` at every site.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.samples as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn killed_fraction(&self) -> f64 {
        self.killed as f64 / self.samples as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledSamples {
    pub n: u32,
    pub t: f64,
    /// Surviving rescaled endpoints.
    pub points: Vec<Vec<f64>>,
    pub killed: usize,
    pub warnings: Vec<String>,
}

impl ScaledSamples {
    /// Rescales endpoints of paths run for time `n^2 t` from the origin,
    /// dropping killed ones.
    pub fn from_endpoints(env: &Environment, n: u32, t: f64, ends: &[Trajectory]) -> Self {
        let mut out = ScaledSamples {
            n,
            t,
            points: Vec::with_capacity(ends.len()),
            killed: 0,
            warnings: Vec::new(),
        };
        for tr in ends {
            if tr.killed {
                out.killed += 1;
            } else {
                out.points
                    .push(tr.displacement.iter().map(|&v| v as f64 / n as f64).collect());
            }
        }
        let h = (n as f64) * (n as f64) * t;
        out.warnings = range_warnings(env, h, out.killed, ends.len());
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.points.first().map_or(0, |p| p.len());
        let mut m = vec![0.0; d];
        for p in &self.points {
            m.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        let k = self.points.len() as f64;
        m.iter_mut().for_each(|a| *a /= k);
        m
    }

    /// Sample covariance (normalized by `N - 1`), row-major `d x d`.
    pub fn covariance(&self) -> Vec<f64> {
        let mean = self.mean();
        let d = mean.len();
        let mut c = vec![0.0; d * d];
        for p in &self.points {
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += (p[i] - mean[i]) * (p[j] - mean[j]);
                }
            }
        }
        let k = (self.points.len().max(2) - 1) as f64;
        c.iter_mut().for_each(|a| *a /= k);
        c
    }
}
