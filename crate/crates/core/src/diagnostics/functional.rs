use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{lp_average, mask, origin_ball, ratio, InequalityReport, ReportMeta, Term};
use crate::environment::check_assumptions;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::{Environment, ExponentSet};

/// `nu(x) = sum_{|z| = 1} 1/C(x, x+z)`, infinite with a missing bond.
pub(crate) fn nu_at(env: &Environment, x: usize) -> f64 {
    let row = env.row(x);
    let mut s = 0.0;
    let mut bonds = 0;
    for k in 0..row.len() {
        if row.length(k) == 1.0 {
            s += 1.0 / row.conds[k];
            bonds += 1;
        }
    }
    if bonds < 2 * env.dim() {
        f64::INFINITY
    } else {
        s
    }
}

fn finite_nu(env: &Environment, ball: &[usize]) -> Result<Vec<f64>> {
    let nu: Vec<f64> = ball.iter().map(|&x| nu_at(env, x)).collect();
    if let Some(i) = nu.iter().position(|v| !v.is_finite()) {
        return Err(Error::pre(format!(
            "nu is infinite at {:?}: a nearest-neighbour bond is missing",
            env.lattice().coord(ball[i])
        )));
    }
    Ok(nu)
}

/// `sum_{x, y in B, |x - y| = 1} (u(x) - u(y))^2 w(x, y) C(x, y)` over
/// ordered pairs.
fn nn_energy(env: &Environment, u: &[f64], ball: &[usize], w: impl Fn(usize, usize) -> f64) -> f64 {
    let inside = mask(env.num_sites(), ball);
    let n = env.num_sites();
    let mut s = 0.0;
    for &x in ball {
        let row = env.row(x);
        for k in 0..row.len() {
            let y = row.targets[k] as usize;
            if y < n && inside[y] && row.length(k) == 1.0 {
                let d = u[x] - u[y];
                s += d * d * w(x, y) * row.conds[k];
            }
        }
    }
    s
}

/// Audits `||u^2||_{rho,B_R} <= C |B_R|^{2/d} ||nu||_{q,B_R} E_R(u) + ||u^2||_{p*,B_R}`
/// with `E_R` the normalized nearest-neighbour energy in `B_R`.
///
/// The implied constant is `(lhs - ||u^2||_{p*})^+ / (first rhs term)`.
pub fn sobolev_audit(
    env: &Environment,
    u: &LatticeField,
    radius: f64,
    exponents: &ExponentSet,
) -> Result<InequalityReport> {
    u.check(env)?;
    if exponents.d != env.dim() {
        return Err(Error::param("d", "exponents are for another dimension"));
    }
    let a = check_assumptions(exponents);
    if !a.sobolev {
        return Err(Error::pre(format!(
            "(1 - 1/d)/p + 1/q = {} exceeds 1/d = {}",
            (1.0 - 1.0 / exponents.d as f64) / exponents.p + 1.0 / exponents.q,
            1.0 / exponents.d as f64
        )));
    }
    let rho = exponents.finite_rho()?;
    let (center, ball) = origin_ball(env, radius)?;
    let nu = finite_nu(env, &ball)?;
    let v = u.values();
    let vol = ball.len() as f64;
    let d = env.dim() as f64;

    let lhs = lp_average(ball.iter().map(|&x| v[x] * v[x]), rho);
    let energy = nn_energy(env, v, &ball, |_, _| 1.0) / vol;
    let nu_q = lp_average(nu.iter().copied(), exponents.q);
    let first = libm::pow(vol, 2.0 / d) * nu_q * energy;
    let second = lp_average(ball.iter().map(|&x| v[x] * v[x]), exponents.p_star);
    let implied = ratio((lhs - second).max(0.0), first);
    Ok(InequalityReport::new(
        "sobolev",
        lhs,
        alloc::vec![
            Term::new("energy", first),
            Term::new("lower_order", second),
            Term::new("nu_q", nu_q),
            Term::new("normalized_energy", energy),
        ],
        implied,
        ReportMeta {
            center,
            radius,
            exponents: Some(exponents.clone()),
            params: alloc::vec![Term::new("rho", rho), Term::new("ball_size", vol)],
            ..Default::default()
        },
    ))
}

/// Radial cutoff `eta(x) = Phi(|x|)` for the weighted Poincare inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// `Phi = 1` on `[0, R]`.
    Indicator,
    /// `Phi(r) = (1 - r/R)^+`.
    Linear,
    /// Piecewise linear through `(radii[i], values[i])`, constant outside.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        if let Profile::Tabulated { radii, values } = self {
            if radii.is_empty() || radii.len() != values.len() {
                return Err(Error::param("profile", "need matching, nonempty radii and values"));
            }
            if radii.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::param("profile", "radii must increase strictly"));
            }
            if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::param("profile", "values must be finite and nonnegative"));
            }
            if values.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::param("profile", "profile must be nonincreasing"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, r: f64, big_r: f64) -> f64 {
        match self {
            Profile::Indicator => {
                if r <= big_r {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Linear => (1.0 - r / big_r).max(0.0),
            Profile::Tabulated { radii, values } => {
                let k = radii.partition_point(|&a| a <= r);
                if k == 0 {
                    values[0]
                } else if k == radii.len() {
                    values[k - 1]
                } else {
                    let (r0, r1) = (radii[k - 1], radii[k]);
                    let (v0, v1) = (values[k - 1], values[k]);
                    v0 + (v1 - v0) * (r - r0) / (r1 - r0)
                }
            }
        }
    }
}

/// Audits `sum eta^2 |u - mean_{eta^2} u|^2 <= C |B_R|^{2/d} ||nu||_{d/2,B_R} D(u)/|B_R|`
/// where `D` is the nearest-neighbour energy weighted by `max(eta^2(x), eta^2(y))`.
pub fn poincare_audit(env: &Environment, u: &LatticeField, radius: f64, profile: &Profile) -> Result<InequalityReport> {
    u.check(env)?;
    profile.validate()?;
    let (center, ball) = origin_ball(env, radius)?;
    let nu = finite_nu(env, &ball)?;
    let lat = env.lattice();
    let mut eta2 = alloc::vec![0.0; env.num_sites()];
    for &x in &ball {
        let e = profile.eval(lat.distance(&center, &lat.coord(x)), radius);
        eta2[x] = e * e;
    }
    let wsum: f64 = ball.iter().map(|&x| eta2[x]).sum();
    if !(wsum > 0.0) {
        return Err(Error::pre("the cutoff vanishes on the whole ball"));
    }
    // centering at a sample value first makes constants exact
    let v = u.values();
    let base = v[ball[0]];
    let mean = ball.iter().map(|&x| (v[x] - base) * eta2[x]).sum::<f64>() / wsum;
    let lhs: f64 = ball
        .iter()
        .map(|&x| {
            let c = v[x] - base - mean;
            eta2[x] * c * c
        })
        .sum();
    let vol = ball.len() as f64;
    let d = env.dim() as f64;
    let dt = nn_energy(env, v, &ball, |x, y| eta2[x].max(eta2[y]));
    let nu_half = lp_average(nu.iter().copied(), d / 2.0);
    let rhs = libm::pow(vol, 2.0 / d) * nu_half * dt / vol;
    Ok(InequalityReport::new(
        "poincare",
        lhs,
        alloc::vec![
            Term::new("energy", rhs),
            Term::new("nu_d_half", nu_half),
            Term::new("weighted_energy", dt),
            Term::new("weighted_mean", base + mean),
        ],
        ratio(lhs, rhs),
        ReportMeta {
            center,
            radius,
            params: alloc::vec![Term::new("ball_size", vol)],
            ..Default::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Lattice;

    fn env() -> Environment {
        Environment::nearest_neighbour(Lattice::cube(2, 6).unwrap(), 1.0).unwrap()
    }

    fn exps() -> ExponentSet {
        ExponentSet::new(2, f64::INFINITY, 4.0).unwrap()
    }

    #[test]
    fn sobolev_trivial_fields() {
        let e = env();
        let z = sobolev_audit(&e, &LatticeField::zeros(e.num_sites()), 4.0, &exps()).unwrap();
        assert_eq!((z.lhs, z.implied_constant, z.pass), (0.0, 0.0, true));
        let c = sobolev_audit(&e, &LatticeField::constant(e.num_sites(), 1.5), 4.0, &exps()).unwrap();
        assert_eq!(c.lhs, 2.25);
        assert_eq!(c.rhs_term("lower_order"), Some(2.25));
        assert_eq!(c.rhs_term("energy"), Some(0.0));
        assert_eq!(c.implied_constant, 0.0);
    }

    #[test]
    fn sobolev_refuses_bad_exponents() {
        let e = env();
        let bad = ExponentSet::new(2, 2.0, 2.0).unwrap();
        assert!(matches!(
            sobolev_audit(&e, &LatticeField::zeros(e.num_sites()), 4.0, &bad),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn poincare_constants_and_shifts() {
        let e = env();
        let c = poincare_audit(&e, &LatticeField::constant(e.num_sites(), 3.7), 5.0, &Profile::Linear).unwrap();
        assert_eq!(c.lhs, 0.0);
        let u = LatticeField::from_fn(&e, |x| (x[0] * 3 + x[1]) as f64 * 0.1);
        let a = poincare_audit(&e, &u, 5.0, &Profile::Linear).unwrap();
        let shifted = LatticeField::new(u.values().iter().map(|v| v + 12.5).collect());
        let b = poincare_audit(&e, &shifted, 5.0, &Profile::Linear).unwrap();
        assert!((a.lhs - b.lhs).abs() <= 1e-12 * a.lhs);
        assert!(a.implied_constant.is_finite() && a.implied_constant > 0.0);
    }

    #[test]
    fn increasing_profile_rejected() {
        let p = Profile::Tabulated {
            radii: alloc::vec![0.0, 1.0],
            values: alloc::vec![0.5, 1.0],
        };
        assert!(p.validate().is_err());
        let q = Profile::Tabulated {
            radii: alloc::vec![0.0, 2.0],
            values: alloc::vec![1.0, 0.0],
        };
        assert_eq!(q.eval(1.0, 5.0), 0.5);
        assert_eq!(q.eval(3.0, 5.0), 0.0);
    }
}
