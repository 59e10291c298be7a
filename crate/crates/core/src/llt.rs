//! Local limit theorem error.
//!
//! Compares the diffusively rescaled heat kernel `n^d p(n^2 t, 0, [nx])`
//! with the Gaussian kernel
//! `k_M(t, x) = (2 pi t)^{-d/2} det(M)^{-1/2} exp(-<x, M^{-1} x> / (2t))`,
//! whose covariance at time `t` is `M t`. `[y]` is the componentwise floor.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corrector::DiffusionMatrix;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::kernel::propagate;
use crate::lattice::for_each_offset;
use crate::linalg::{cholesky, cholesky_inverse};
use crate::Environment;

/// Snapping distance of `[y]` to the integer above: representational noise
/// in `n x` must not flip the floor.
const FLOOR_SNAP: f64 = 1e-9;

/// Default bound on the truncation estimate of a finite lattice.
pub const DEFAULT_THRESHOLD: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernelParams {
    pub matrix: DiffusionMatrix,
    pub det: f64,
    pub inverse: Vec<f64>,
}

impl GaussianKernelParams {
    /// Rejects matrices that are not positive definite.
    pub fn new(matrix: DiffusionMatrix) -> Result<Self> {
        let d = matrix.dim;
        let l = cholesky(&matrix.entries, d)
            .ok_or_else(|| Error::param("M", "diffusion matrix is not positive definite"))?;
        let det = (0..d).map(|i| l[i * d + i] * l[i * d + i]).product();
        let inverse = cholesky_inverse(&l, d);
        Ok(GaussianKernelParams { matrix, det, inverse })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    fn quad(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += x[i] * self.inverse[i * d + j] * x[j];
            }
        }
        s
    }
}

/// `k_M(t, x)`.
pub fn gaussian_kernel(params: &GaussianKernelParams, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param("t", "time must be positive"));
    }
    if x.len() != params.dim() {
        return Err(Error::param("x", "point has the wrong dimension"));
    }
    let d = params.dim() as f64;
    let norm = libm::pow(2.0 * core::f64::consts::PI * t, -d / 2.0) / libm::sqrt(params.det);
    Ok(norm * libm::exp(-params.quad(x) / (2.0 * t)))
}

/// `[y]`: floor, with values within `1e-9` below an integer snapped up.
pub fn lattice_floor(y: f64) -> i64 {
    let r = libm::round(y);
    if (y - r).abs() <= FLOOR_SNAP {
        r as i64
    } else {
        libm::floor(y) as i64
    }
}

/// Sampling of the supremum over `|x| <= R`, `t in [T1, T2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LltGrid {
    pub radius: f64,
    pub t1: f64,
    pub t2: f64,
    /// Number of intervals of the uniform time grid.
    pub t_steps: usize,
    /// Spacing of the `x` grid; `None` uses `1/n`, so that `[nx]` runs
    /// over every lattice point in the rescaled ball.
    pub x_step: Option<f64>,
    pub tol: f64,
    pub threshold: f64,
    /// Keep every sampled value for plotting.
    pub keep_samples: bool,
}

impl LltGrid {
    pub fn new(radius: f64, t1: f64, t2: f64) -> Self {
        LltGrid {
            radius,
            t1,
            t2,
            t_steps: 4,
            x_step: None,
            tol: 1e-12,
            threshold: DEFAULT_THRESHOLD,
            keep_samples: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius >= 0.0 && self.t1 > 0.0 && self.t2 >= self.t1) {
            return Err(Error::param("grid", "need R >= 0 and 0 < T1 <= T2"));
        }
        if self.t_steps == 0 && self.t2 > self.t1 {
            return Err(Error::param("grid", "need at least one time step"));
        }
        if let Some(h) = self.x_step {
            if !(h > 0.0) {
                return Err(Error::param("x_step", "must be positive"));
            }
        }
        Ok(())
    }

    fn times(&self) -> Vec<f64> {
        if self.t2 == self.t1 || self.t_steps == 0 {
            return vec![self.t1];
        }
        let h = (self.t2 - self.t1) / self.t_steps as f64;
        (0..=self.t_steps)
            .map(|j| {
                if j == self.t_steps {
                    self.t2
                } else {
                    self.t1 + h * j as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LltSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub rescaled: f64,
    pub gaussian: f64,
    pub abs_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LltPoint {
    pub n: u32,
    /// `E_n`, the sampled supremum.
    pub error: f64,
    pub argmax_t: f64,
    pub argmax_x: Vec<f64>,
    /// Lost mass (box) or periodic image weight (torus) at `n^2 T2`.
    pub truncation: f64,
    pub num_samples: usize,
    pub samples: Vec<LltSample>,
}

/// `x` sample points: the lattice `h Z^d` inside the closed ball of radius R.
fn x_points(dim: usize, radius: f64, h: f64) -> Vec<Vec<f64>> {
    let k = libm::floor(radius / h + FLOOR_SNAP) as i64;
    let mut pts = Vec::new();
    for_each_offset(dim, k, |z| {
        let x: Vec<f64> = z.iter().map(|&v| v as f64 * h).collect();
        if libm::sqrt(x.iter().map(|v| v * v).sum::<f64>()) <= radius * (1.0 + 1e-12) {
            pts.push(x);
        }
    });
    pts
}

/// Truncation estimate of a kernel run up to time `h` whose sampled sites
/// lie within distance `reach` of the origin.
fn truncation_estimate(
    env: &Environment,
    params: &GaussianKernelParams,
    last: &LatticeField,
    h: f64,
    reach: f64,
) -> Result<f64> {
    let lat = env.lattice();
    if !lat.is_torus() {
        return Ok((1.0 - last.sum()).max(0.0));
    }
    let side = lat.side() as f64;
    if 2.0 * reach >= side {
        return Err(Error::Truncation {
            what: format!("sample radius {reach} reaches half the torus side {side}"),
            estimate: 1.0,
            threshold: 0.0,
        });
    }
    // weight of the nearest periodic image of the Gaussian profile
    let d = params.dim();
    let worst = (0..d)
        .map(|i| {
            let gap = side - reach;
            libm::exp(-gap * gap / (2.0 * params.matrix.entries[i * d + i] * h))
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// `E_n = sup |n^d p(n^2 t, 0, [nx]) - k_M(t, x)|` over the sampled grid.
pub fn llt_error(env: &Environment, params: &GaussianKernelParams, n: u32, grid: &LltGrid) -> Result<LltPoint> {
    grid.validate()?;
    if n == 0 {
        return Err(Error::param("n", "scale must be at least 1"));
    }
    if params.dim() != env.dim() {
        return Err(Error::param("M", "matrix dimension differs from the environment"));
    }
    let nf = n as f64;
    let d = env.dim();
    let lat = env.lattice();
    let times = grid.times();
    let scaled: Vec<f64> = times.iter().map(|t| nf * nf * t).collect();
    let o = lat.origin();
    let fields = propagate(env, &LatticeField::delta(env.num_sites(), o), &scaled, grid.tol)?;

    let h = grid.x_step.unwrap_or(1.0 / nf);
    let pts = x_points(d, grid.radius, h);
    let mut sites = Vec::with_capacity(pts.len());
    let mut reach = 0.0f64;
    let origin = lat.coord(o);
    for x in &pts {
        let c: Vec<i64> = x
            .iter()
            .zip(&origin)
            .map(|(&v, &o)| o + lattice_floor(nf * v))
            .collect();
        reach = reach.max(libm::sqrt(
            c.iter().zip(&origin).map(|(a, b)| ((a - b) * (a - b)) as f64).sum(),
        ));
        if !lat.is_torus() && !lat.contains(&c) {
            return Err(Error::Truncation {
                what: format!("sample point {c:?} lies outside the box"),
                estimate: 1.0,
                threshold: grid.threshold,
            });
        }
        sites.push(lat.index(&c).expect("sample inside the lattice"));
    }
    let truncation = truncation_estimate(
        env,
        params,
        fields.last().expect("one time at least"),
        *scaled.last().unwrap(),
        reach,
    )?;
    if truncation > grid.threshold {
        return Err(Error::Truncation {
            what: format!("diffusive range at n = {n}, t = {} exceeds the lattice", grid.t2),
            estimate: truncation,
            threshold: grid.threshold,
        });
    }

    let nd = libm::pow(nf, d as f64);
    let mut best = (f64::NEG_INFINITY, 0.0, Vec::new());
    let mut samples = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        for (x, &s) in pts.iter().zip(&sites) {
            let rescaled = nd * fields[j][s];
            let g = gaussian_kernel(params, t, x)?;
            let e = (rescaled - g).abs();
            if e > best.0 {
                best = (e, t, x.clone());
            }
            if grid.keep_samples {
                samples.push(LltSample {
                    t,
                    x: x.clone(),
                    rescaled,
                    gaussian: g,
                    abs_err: e,
                });
            }
        }
    }
    Ok(LltPoint {
        n,
        error: best.0,
        argmax_t: best.1,
        argmax_x: best.2,
        truncation,
        num_samples: times.len() * pts.len(),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LltErrorCurve {
    pub grid: LltGrid,
    pub points: Vec<LltPoint>,
    /// `E` at the largest `n` below `E` at the smallest; absent for a single `n`.
    pub decreasing: Option<bool>,
    pub notes: Vec<String>,
}

/// [`llt_error`] for each `n` of a strictly increasing list.
pub fn convergence_study(
    env: &Environment,
    params: &GaussianKernelParams,
    n_list: &[u32],
    grid: &LltGrid,
) -> Result<LltErrorCurve> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("n", "scales must be nonempty and strictly increasing"));
    }
    let points = n_list
        .iter()
        .map(|&n| llt_error(env, params, n, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(curve(grid.clone(), points))
}

/// Assembles a curve from points computed elsewhere (e.g. in parallel).
pub fn curve(grid: LltGrid, points: Vec<LltPoint>) -> LltErrorCurve {
    let decreasing = if points.len() >= 2 {
        Some(points.last().unwrap().error < points[0].error)
    } else {
        None
    };
    LltErrorCurve {
        grid,
        points,
        decreasing,
        notes: vec![String::from(
            "quenched: one fixed environment; a finite study cannot separate almost sure convergence from convergence in probability",
        )],
    }
}
