//! Normalized norms and audits of functional inequalities.
//!
//! The constants in the inequalities audited here are not explicit, so each
//! audit reports the *implied constant*: the smallest constant for which the
//! inequality holds on the given input.

mod functional;
mod harnack;
mod holder;
mod maximal;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, TimeGrid};
use crate::serde_ext;
use crate::{Environment, ExponentSet};

pub use functional::{poincare_audit, sobolev_audit, Profile};
pub use harnack::{wphi_report, DataSpec, WphiOptions};
pub use holder::{holder_report, HolderReport};
pub use maximal::{maximal_report, MaximalParams};

/// `(mean |f|^p)^{1/p}`, or `max |f|` for `p = inf`; 0 for no values.
pub fn lp_average(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return values.fold(0.0, |m, v| m.max(v.abs()));
    }
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += libm::pow(v.abs(), p);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        libm::pow(s / n as f64, 1.0 / p)
    }
}

/// Exponents of a normalized norm: spatial `p` and temporal `p_time`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    #[serde(with = "serde_ext")]
    pub p: f64,
    #[serde(with = "serde_ext")]
    pub p_time: f64,
}

impl NormSpec {
    pub fn new(p: f64, p_time: f64) -> Result<Self> {
        if !(p >= 1.0) || !(p_time >= 1.0) {
            return Err(Error::param("p", "norm exponents must lie in [1, inf]"));
        }
        Ok(NormSpec { p, p_time })
    }

    pub fn spatial(p: f64) -> Result<Self> {
        Self::new(p, p)
    }
}

/// `||f||_{p, A}` over the sites `region`.
pub fn norm(f: &[f64], region: &[usize], spec: NormSpec) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::param("region", "empty region"));
    }
    Ok(lp_average(region.iter().map(|&x| f[x]), spec.p))
}

/// `||u||_{p, p', I x A}` with `I` given by grid indices `k0..=k1`.
///
/// The time integral uses the trapezoid rule on the grid and is normalized
/// by `|I|`; a window of a single grid time reduces to the spatial norm.
pub fn space_time_norm(u: &SpaceTimeField, window: (usize, usize), region: &[usize], spec: NormSpec) -> Result<f64> {
    let (k0, k1) = window;
    if region.is_empty() || k1 < k0 || k1 >= u.grid().len() {
        return Err(Error::param("region", "empty or out-of-grid space-time window"));
    }
    let s: Vec<f64> = (k0..=k1)
        .map(|k| lp_average(region.iter().map(|&x| u.slice(k)[x]), spec.p))
        .collect();
    if spec.p_time.is_infinite() {
        return Ok(s.iter().fold(0.0, |m: f64, &v| m.max(v)));
    }
    if s.len() == 1 {
        return Ok(s[0]);
    }
    let pw: Vec<f64> = s.iter().map(|&v| libm::pow(v, spec.p_time)).collect();
    Ok(libm::pow(trapezoid_mean(&pw), 1.0 / spec.p_time))
}

/// `(1/|I|) int_I g` for equally spaced samples, trapezoid rule.
pub fn trapezoid_mean(g: &[f64]) -> f64 {
    match g.len() {
        0 => 0.0,
        1 => g[0],
        n => {
            let inner: f64 = g[1..n - 1].iter().sum();
            (inner + 0.5 * (g[0] + g[n - 1])) / (n - 1) as f64
        }
    }
}

/// A named number in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    #[serde(with = "serde_ext")]
    pub value: f64,
}

impl Term {
    pub fn new(name: &str, value: f64) -> Self {
        Term {
            name: name.into(),
            value,
        }
    }
}

/// Inputs echoed into a report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub center: Vec<i64>,
    pub radius: f64,
    pub exponents: Option<ExponentSet>,
    pub grid: Option<TimeGrid>,
    pub params: Vec<Term>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality: String,
    #[serde(with = "serde_ext")]
    pub lhs: f64,
    pub rhs: Vec<Term>,
    #[serde(with = "serde_ext")]
    pub implied_constant: f64,
    #[serde(with = "serde_ext::opt")]
    pub ceiling: Option<f64>,
    /// Finite implied constant, below the ceiling when one is set.
    pub pass: bool,
    pub meta: ReportMeta,
}

impl InequalityReport {
    pub(crate) fn new(inequality: &str, lhs: f64, rhs: Vec<Term>, implied_constant: f64, meta: ReportMeta) -> Self {
        InequalityReport {
            inequality: inequality.into(),
            lhs,
            rhs,
            implied_constant,
            ceiling: None,
            pass: implied_constant.is_finite(),
            meta,
        }
    }

    pub fn with_ceiling(mut self, ceiling: f64) -> Self {
        self.ceiling = Some(ceiling);
        self.pass = self.implied_constant.is_finite() && self.implied_constant <= ceiling;
        self
    }

    pub fn rhs_term(&self, name: &str) -> Option<f64> {
        self.rhs.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// `a / b` with `0/0 = 0` and `a/0 = inf` for `a > 0`.
pub(crate) fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Site mask of a set of indices.
pub(crate) fn mask(n: usize, sites: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    sites.iter().for_each(|&x| m[x] = true);
    m
}

/// Ball around the lattice origin, refusing radii the lattice cannot hold.
pub(crate) fn origin_ball(env: &Environment, radius: f64) -> Result<(Vec<i64>, Vec<usize>)> {
    let lat = env.lattice();
    if !(radius >= 1.0) {
        return Err(Error::param("R", "radius must be at least 1"));
    }
    if radius > lat.inscribed_radius() {
        return Err(Error::pre(alloc::format!(
            "ball radius {radius} exceeds the inscribed radius {} of the lattice",
            lat.inscribed_radius()
        )));
    }
    let c = lat.coord(lat.origin());
    let ball = lat.ball(&c, radius);
    Ok((c, ball))
}
