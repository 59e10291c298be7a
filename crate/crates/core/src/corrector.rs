//! Periodized corrector, homogenized diffusion matrix and sublinearity.
//!
//! On a torus, each coordinate `chi_i` of the corrector solves
//! `L chi_i = -sum_z z_i C(x, x+z)` with the gauge `chi(0) = 0`. The system
//! `-L chi = b` is symmetric positive semidefinite with the constants as its
//! kernel, and `b` sums to zero, so conjugate gradients with the Jacobi
//! preconditioner `1/pi` converges. Residuals are measured in the norm
//! `(sum_x r(x)^2 / pi_x)^{1/2}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diagnostics::lp_average;
use crate::error::{Error, Result};
use crate::kernel::apply_generator_with;
use crate::linalg::symmetric_eigenvalues;
use crate::serde_ext;
use crate::{Environment, ExponentSet};

/// Default relative residual target.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorField {
    pub dim: usize,
    /// `chi[i][x]`, coordinate-major.
    pub chi: Vec<Vec<f64>>,
    /// Site with `chi = 0`.
    pub gauge_site: usize,
    /// Relative residual of each coordinate, recomputed after the solve.
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub tol: f64,
}

impl CorrectorField {
    /// `chi(x)` as a vector.
    pub fn at(&self, x: usize) -> Vec<f64> {
        self.chi.iter().map(|c| c[x]).collect()
    }

    pub fn num_sites(&self) -> usize {
        self.chi.first().map_or(0, Vec::len)
    }

    /// `max_x max_i |chi_i(x)|`.
    pub fn sup_norm(&self) -> f64 {
        self.chi.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, env: &Environment) -> Result<()> {
        if self.dim != env.dim() || self.chi.len() != env.dim() {
            return Err(Error::param("chi", "dimension differs from the environment"));
        }
        if self.num_sites() != env.num_sites() || self.chi.iter().any(|c| c.len() != env.num_sites()) {
            return Err(Error::FieldMismatch {
                expected: env.num_sites(),
                got: self.num_sites(),
            });
        }
        Ok(())
    }
}

/// `b_i(x) = sum_z z_i C(x, x+z)` with minimal-image `z`.
pub fn drift(env: &Environment, i: usize) -> Vec<f64> {
    (0..env.num_sites())
        .map(|x| {
            let row = env.row(x);
            (0..row.len()).map(|k| row.disp(k)[i] as f64 * row.conds[k]).sum()
        })
        .collect()
}

fn weighted_norm(r: &[f64], pi: &[f64]) -> f64 {
    libm::sqrt(r.iter().zip(pi).map(|(r, p)| r * r / p).sum())
}

/// `out = -L v` on a torus.
fn neg_laplacian(env: &Environment, v: &[f64], out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate() {
        let row = env.row(x);
        let vx = v[x];
        let mut s = 0.0;
        for (k, &t) in row.targets.iter().enumerate() {
            s += (vx - v[t as usize]) * row.conds[k];
        }
        *o = s;
    }
}

/// Preconditioned CG for `-L x = b` from `x`; returns iterations used.
fn pcg(env: &Environment, b: &[f64], x: &mut [f64], tol: f64, budget: usize, history: &mut Vec<f64>) -> usize {
    let pi = env.pis();
    let n = b.len();
    let bnorm = weighted_norm(b, pi);
    let mut ax = vec![0.0; n];
    neg_laplacian(env, x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(pi).map(|(r, p)| r / p).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..budget {
        let rel = libm::sqrt(rz.max(0.0)) / bnorm;
        history.push(rel);
        if rel <= tol {
            return it;
        }
        neg_laplacian(env, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return it;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / pi[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    history.push(libm::sqrt(rz.max(0.0)) / bnorm);
    budget
}

/// Relative residual `||L chi_i + b_i|| / ||b_i||`, evaluated directly.
pub fn residual(env: &Environment, chi_i: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = (0..env.num_sites())
        .map(|x| apply_generator_with(env, chi_i, x, |_| 0.0) + b[x])
        .collect();
    let bn = weighted_norm(b, env.pis());
    if bn == 0.0 {
        weighted_norm(&r, env.pis())
    } else {
        weighted_norm(&r, env.pis()) / bn
    }
}

/// Solves the corrector equation for every coordinate.
pub fn solve_corrector(env: &Environment, tol: f64, max_iter: usize) -> Result<CorrectorField> {
    if !env.is_torus() {
        return Err(Error::NotTorus);
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::param("tol", "must lie in (0, 1)"));
    }
    let n = env.num_sites();
    let gauge = env.lattice().origin();
    let mut chi = Vec::with_capacity(env.dim());
    let mut residuals = Vec::with_capacity(env.dim());
    let mut iterations = Vec::with_capacity(env.dim());
    for i in 0..env.dim() {
        let mut b = drift(env, i);
        // project onto the range of L: zero sum
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let mut x = vec![0.0; n];
        let mut used = 0;
        let mut history = Vec::new();
        let mut res = 0.0;
        if weighted_norm(&b, env.pis()) > 0.0 {
            // restart until the directly computed residual meets the target
            loop {
                used += pcg(env, &b, &mut x, tol * 0.5, max_iter - used, &mut history);
                let shift = x[gauge];
                x.iter_mut().for_each(|v| *v -= shift);
                res = residual(env, &x, &b);
                history.push(res);
                if res <= tol {
                    break;
                }
                if used >= max_iter {
                    return Err(Error::NoConvergence {
                        iterations: used,
                        residual_history: history,
                    });
                }
            }
        }
        chi.push(x);
        residuals.push(res);
        iterations.push(used);
    }
    Ok(CorrectorField {
        dim: env.dim(),
        chi,
        gauge_site: gauge,
        residuals,
        iterations,
        tol,
    })
}

/// Symmetric positive semidefinite `d x d` matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionMatrix {
    pub dim: usize,
    pub entries: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl DiffusionMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(Error::param("M", "need d x d entries"));
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (entries[i * dim + j] - entries[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(Error::param("M", "matrix is not symmetric"));
                }
            }
        }
        let eigenvalues = symmetric_eigenvalues(&entries, dim);
        if eigenvalues[0] < -1e-10 * scale {
            return Err(Error::param(
                "M",
                format!("matrix has negative eigenvalue {:e}", eigenvalues[0]),
            ));
        }
        Ok(DiffusionMatrix {
            dim,
            entries,
            eigenvalues,
        })
    }

    pub fn identity_scaled(dim: usize, c: f64) -> Result<Self> {
        let mut e = vec![0.0; dim * dim];
        (0..dim).for_each(|i| e[i * dim + i] = c);
        Self::new(dim, e)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `max_ij |M_ij - other_ij|`.
    pub fn max_diff(&self, other: &DiffusionMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Spatial average of `sum_z C (z_i + grad chi_i)(z_j + grad chi_j)`.
pub fn diffusion_matrix(env: &Environment, chi: &CorrectorField) -> Result<DiffusionMatrix> {
    if !env.is_torus() {
        return Err(Error::NotTorus);
    }
    chi.check(env)?;
    let d = env.dim();
    let mut m = vec![0.0; d * d];
    let mut g = vec![0.0; d];
    for x in 0..env.num_sites() {
        let row = env.row(x);
        for k in 0..row.len() {
            let y = row.targets[k] as usize;
            let z = row.disp(k);
            for i in 0..d {
                g[i] = z[i] as f64 + chi.chi[i][y] - chi.chi[i][x];
            }
            let c = row.conds[k];
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] += c * g[i] * g[j];
                }
            }
        }
    }
    let n = env.num_sites() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    DiffusionMatrix::new(d, m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearityEntry {
    pub radius: f64,
    /// `(1/n) max_{B_n} max_i |chi_i|`.
    #[serde(with = "serde_ext::opt")]
    pub sup_ratio: Option<f64>,
    /// `(1/R) ||max_i |chi_i| ||_{2p/(p-1), B_R}`.
    #[serde(with = "serde_ext::opt")]
    pub norm_ratio: Option<f64>,
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearityReport {
    #[serde(with = "serde_ext")]
    pub norm_exponent: f64,
    pub entries: Vec<SublinearityEntry>,
    /// Whether the sup ratio at the largest radius is below the smallest;
    /// absent with fewer than two usable radii.
    pub sup_decreasing: Option<bool>,
    pub norm_decreasing: Option<bool>,
}

/// Sublinearity ratios on balls around the gauge site.
pub fn sublinearity_report(
    env: &Environment,
    chi: &CorrectorField,
    radii: &[f64],
    exponents: &ExponentSet,
) -> Result<SublinearityReport> {
    chi.check(env)?;
    let lat = env.lattice();
    let center = lat.coord(chi.gauge_site);
    let reach = lat.inscribed_radius();
    let pexp = exponents.corrector_norm_exponent();
    let size: Vec<f64> = (0..env.num_sites())
        .map(|x| chi.chi.iter().fold(0.0f64, |m, c| m.max(c[x].abs())))
        .collect();
    let entries: Vec<SublinearityEntry> = radii
        .iter()
        .map(|&r| {
            if !(r >= 1.0) || r > reach {
                return SublinearityEntry {
                    radius: r,
                    sup_ratio: None,
                    norm_ratio: None,
                    excluded: true,
                };
            }
            let ball = lat.ball(&center, r);
            let sup = ball.iter().fold(0.0f64, |m, &x| m.max(size[x]));
            let norm = lp_average(ball.iter().map(|&x| size[x]), pexp);
            SublinearityEntry {
                radius: r,
                sup_ratio: Some(sup / r),
                norm_ratio: Some(norm / r),
                excluded: false,
            }
        })
        .collect();
    let used: Vec<&SublinearityEntry> = entries.iter().filter(|e| !e.excluded).collect();
    let trend = |f: fn(&SublinearityEntry) -> Option<f64>| {
        if used.len() < 2 {
            return None;
        }
        let lo = used.iter().min_by(|a, b| a.radius.total_cmp(&b.radius))?;
        let hi = used.iter().max_by(|a, b| a.radius.total_cmp(&b.radius))?;
        Some(f(hi)? < f(lo)?)
    };
    Ok(SublinearityReport {
        norm_exponent: pexp,
        sup_decreasing: trend(|e| e.sup_ratio),
        norm_decreasing: trend(|e| e.norm_ratio),
        entries,
    })
}

/// `sum_x sum_z C (z_i + psi(x+z) - psi(x))^2`, the corrected energy that
/// `chi_i` minimizes.
pub fn corrected_energy(env: &Environment, i: usize, psi: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in 0..env.num_sites() {
        let row = env.row(x);
        for k in 0..row.len() {
            let g = row.disp(k)[i] as f64 + psi[row.targets[k] as usize] - psi[x];
            s += row.conds[k] * g * g;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvironmentBuilder;
    use crate::Lattice;

    #[test]
    fn constant_environment() {
        let env = Environment::nearest_neighbour(Lattice::torus(2, 8).unwrap(), 1.0).unwrap();
        let chi = solve_corrector(&env, 1e-10, 100).unwrap();
        assert_eq!(chi.sup_norm(), 0.0);
        let m = diffusion_matrix(&env, &chi).unwrap();
        assert_eq!(m.entries, vec![2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn translation_invariant_with_second_neighbours() {
        let (a, b) = (1.5, 0.25);
        let lat = Lattice::torus(2, 7).unwrap();
        let mut bl = EnvironmentBuilder::new(lat.clone());
        for x in 0..lat.num_sites() {
            let c = lat.coord(x);
            bl.add_edge(&c, &[c[0] + 1, c[1]], a).unwrap();
            bl.add_edge(&c, &[c[0], c[1] + 1], a).unwrap();
            bl.add_edge(&c, &[c[0] + 2, c[1]], b).unwrap();
        }
        let env = bl.finish().unwrap();
        let chi = solve_corrector(&env, 1e-10, 100).unwrap();
        assert!(chi.sup_norm() < 1e-12);
        let m = diffusion_matrix(&env, &chi).unwrap();
        assert!((m.get(0, 0) - (2.0 * a + 8.0 * b)).abs() < 1e-12);
        assert!((m.get(1, 1) - 2.0 * a).abs() < 1e-12);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn box_is_rejected() {
        let env = Environment::nearest_neighbour(Lattice::cube(2, 3).unwrap(), 1.0).unwrap();
        assert_eq!(solve_corrector(&env, 1e-8, 10).unwrap_err(), Error::NotTorus);
    }

    #[test]
    fn diffusion_matrix_validation() {
        assert!(DiffusionMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(DiffusionMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(DiffusionMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn zero_corrector_sublinearity() {
        let env = Environment::nearest_neighbour(Lattice::torus(2, 16).unwrap(), 1.0).unwrap();
        let chi = solve_corrector(&env, 1e-10, 100).unwrap();
        let e = ExponentSet::new(2, 3.0, f64::INFINITY).unwrap();
        let r = sublinearity_report(&env, &chi, &[2.0, 4.0, 50.0], &e).unwrap();
        assert_eq!(r.norm_exponent, 3.0);
        assert!(r.entries[2].excluded);
        assert_eq!(r.entries[0].sup_ratio, Some(0.0));
        assert_eq!(r.sup_decreasing, Some(false));
    }
}
