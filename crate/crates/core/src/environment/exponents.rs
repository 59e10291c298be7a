use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_ext;

/// Integrability exponents `(d, p, q)` and everything derived from them.
///
/// Infinite exponents are `f64::INFINITY`; so is `rho` when
/// `d - 2 + d/q = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub d: usize,
    #[serde(with = "serde_ext")]
    pub p: f64,
    #[serde(with = "serde_ext")]
    pub q: f64,
    #[serde(with = "serde_ext")]
    pub p_star: f64,
    #[serde(with = "serde_ext")]
    pub q_star: f64,
    #[serde(with = "serde_ext")]
    pub rho: f64,
    pub kappa: f64,
    pub theta: f64,
    /// Moment order of `mu_m` used by the maximal inequality.
    pub m: f64,
    /// Decay exponent of the model, when known.
    #[serde(with = "serde_ext::opt", default)]
    pub s: Option<f64>,
    /// Weight exponent of `mu_*`: `(d(p-1) + 4p) / (p + 1)`.
    pub gamma: f64,
    /// `gamma (p + 1) / (2p)`.
    pub gamma0: f64,
}

/// Hölder conjugate with `1* = inf` and `inf* = 1`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

impl ExponentSet {
    pub fn new(d: usize, p: f64, q: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if !(p > 1.0) {
            return Err(Error::param("p", "p must lie in (1, inf]"));
        }
        if !(q > 1.0) {
            return Err(Error::param("q", "q must lie in (1, inf]"));
        }
        let df = d as f64;
        let denom = df - 2.0 + df / q;
        let rho = if denom > 0.0 { df / denom } else { f64::INFINITY };
        let kappa = if rho.is_infinite() { 1.0 } else { (rho - 1.0) / rho };
        let p_star = conjugate(p);
        let theta = (1.0 + kappa) / p_star;
        let (gamma, gamma0) = if p.is_infinite() {
            (df + 4.0, (df + 4.0) / 2.0)
        } else {
            let g = (df * (p - 1.0) + 4.0 * p) / (p + 1.0);
            (g, g * (p + 1.0) / (2.0 * p))
        };
        Ok(ExponentSet {
            d,
            p,
            q,
            p_star,
            q_star: conjugate(q),
            rho,
            kappa,
            theta,
            m: 2.0,
            s: None,
            gamma,
            gamma0,
        })
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    /// Power of the conductance inside `mu_*`: `2p / (p + 1)`.
    pub fn mu_star_power(&self) -> f64 {
        if self.p.is_infinite() {
            2.0
        } else {
            2.0 * self.p / (self.p + 1.0)
        }
    }

    /// Exponent `2p / (p - 1)` of the averaged corrector norm.
    pub fn corrector_norm_exponent(&self) -> f64 {
        2.0 * self.p_star
    }

    /// Refuses when `rho` is infinite.
    pub fn finite_rho(&self) -> Result<f64> {
        if self.rho.is_finite() {
            Ok(self.rho)
        } else {
            Err(Error::pre(alloc::format!(
                "rho = d/(d-2+d/q) is infinite for d = {}, q = {}; choose a finite q",
                self.d,
                self.q
            )))
        }
    }
}

/// Verdicts of the moment conditions for one exponent set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub exponents: ExponentSet,
    /// `1/p + 1/q < 2/d`.
    pub qip: bool,
    /// `1/p + 1/q <= (1 + 1/p)/d`.
    pub llt_first: bool,
    /// `1/(p-1) + 1/q < 2/d`.
    pub llt_second: bool,
    /// `(1 - 1/d)/p + 1/q <= 1/d`, the Sobolev condition.
    pub sobolev: bool,
    pub notes: alloc::vec::Vec<String>,
}

pub fn check_assumptions(exponents: &ExponentSet) -> AssumptionReport {
    let d = exponents.d as f64;
    let ip = 1.0 / exponents.p;
    let iq = 1.0 / exponents.q;
    let ipm1 = 1.0 / (exponents.p - 1.0);
    let mut notes = alloc::vec::Vec::new();
    if exponents.q.is_infinite() {
        notes.push(String::from(
            "q = inf: the nu condition means inf of nearest-neighbour conductances > 0",
        ));
    }
    if exponents.rho.is_infinite() {
        notes.push(String::from("rho is infinite (d - 2 + d/q = 0)"));
    }
    if exponents.d < 2 {
        notes.push(String::from("d = 1 lies outside the theory (d >= 2)"));
    }
    AssumptionReport {
        exponents: exponents.clone(),
        qip: ip + iq < 2.0 / d,
        llt_first: ip + iq <= (1.0 + ip) / d,
        llt_second: ipm1 + iq < 2.0 / d,
        sobolev: (1.0 - 1.0 / d) * ip + iq <= 1.0 / d,
        notes,
    }
}
