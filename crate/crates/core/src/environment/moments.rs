use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Environment, ExponentSet};
use crate::diagnostics::lp_average;
use crate::serde_ext;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentRequest {
    /// Orders `m` of `mu_m(x) = sum_z |z|^m C(x, x+z)`.
    pub m_list: Vec<f64>,
    /// Exponents for `mu_*` and the box aggregates.
    pub exponents: Option<ExponentSet>,
}

/// Per-site moment functionals of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    /// `mu(x) = sum_z |z|^2 C(x, x+z)`.
    pub mu: Vec<f64>,
    /// `nu(x) = sum_{|z|=1} 1 / C(x, x+z)`; infinite when a bond is missing.
    pub nu: Vec<f64>,
    pub mu_m: Vec<MomentColumn>,
    /// `mu_*(x) = sum_z |z|^gamma C^{2p/(p+1)}`, when exponents were given.
    pub mu_star: Option<Vec<f64>>,
    /// Sites with a missing nearest-neighbour bond.
    pub missing_nn: Vec<usize>,
    pub aggregates: Option<MomentAggregates>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentColumn {
    pub m: f64,
    pub values: Vec<f64>,
}

/// Averages over the whole stored box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentAggregates {
    #[serde(with = "serde_ext")]
    pub mu_p: f64,
    #[serde(with = "serde_ext")]
    pub nu_q: f64,
    /// `||max(mu, 1)||_p * ||max(nu, 1)||_q`, the box-scale `M_0`.
    #[serde(with = "serde_ext")]
    pub m0: f64,
}

pub fn moments(env: &Environment, request: &MomentRequest) -> MomentProfile {
    let n = env.num_sites();
    let d = env.dim();
    let mut mu = vec![0.0; n];
    let mut nu = vec![0.0; n];
    let mut mu_m: Vec<MomentColumn> = request
        .m_list
        .iter()
        .map(|&m| MomentColumn {
            m,
            values: vec![0.0; n],
        })
        .collect();
    let star = request.exponents.as_ref().map(|e| (e.gamma, e.mu_star_power()));
    let mut mu_star = star.map(|_| vec![0.0; n]);
    let mut missing_nn = Vec::new();
    for x in 0..n {
        let row = env.row(x);
        let mut nn = 0usize;
        for k in 0..row.len() {
            let c = row.conds[k];
            let z = row.disp(k);
            let l2: f64 = z.iter().map(|&v| (v as f64) * (v as f64)).sum();
            mu[x] += l2 * c;
            if l2 == 1.0 {
                nn += 1;
                nu[x] += 1.0 / c;
            }
            let len = libm::sqrt(l2);
            for col in mu_m.iter_mut() {
                col.values[x] += libm::pow(len, col.m) * c;
            }
            if let (Some((g, pw)), Some(ms)) = (star, mu_star.as_mut()) {
                ms[x] += libm::pow(len, g) * libm::pow(c, pw);
            }
        }
        if nn < 2 * d {
            nu[x] = f64::INFINITY;
            missing_nn.push(x);
        }
    }
    let aggregates = request.exponents.as_ref().map(|e| {
        let mu_p = lp_average(mu.iter().copied(), e.p);
        let nu_q = lp_average(nu.iter().copied(), e.q);
        let m0 = lp_average(mu.iter().map(|&v| v.max(1.0)), e.p) * lp_average(nu.iter().map(|&v| v.max(1.0)), e.q);
        MomentAggregates { mu_p, nu_q, m0 }
    });
    MomentProfile {
        mu,
        nu,
        mu_m,
        mu_star,
        missing_nn,
        aggregates,
    }
}

/// `Tail(u, R)(x) = R^2 sum_{|y - x| > R} u(y) C(x, y)` over stored edges.
///
/// Halo sites (outside a box) contribute zero.
pub fn tail(env: &Environment, u: &[f64], radius: f64, x: usize) -> f64 {
    let n = env.num_sites();
    tail_with(env, radius, x, |t| if (t as usize) < n { u[t as usize] } else { 0.0 })
}

/// [`tail`] with an arbitrary value lookup for lattice and halo ids.
pub fn tail_with(env: &Environment, radius: f64, x: usize, value: impl Fn(u32) -> f64) -> f64 {
    let row = env.row(x);
    let r2 = radius * radius;
    let mut sum = 0.0;
    for k in 0..row.len() {
        let l2: f64 = row.disp(k).iter().map(|&v| (v as f64) * (v as f64)).sum();
        if l2 > r2 {
            sum += value(row.targets[k]) * row.conds[k];
        }
    }
    r2 * sum
}
