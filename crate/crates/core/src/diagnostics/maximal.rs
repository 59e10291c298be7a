use alloc::format;
use alloc::vec;

use serde::{Deserialize, Serialize};

use super::{lp_average, origin_ball, ratio, space_time_norm, InequalityReport, NormSpec, ReportMeta, Term};
use crate::environment::{moments, MomentRequest};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::{Environment, ExponentSet};

/// Power applied to the moment factor; the inequality holds for some
/// positive power and we fix it to 1.
pub const KAPPA1: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalParams {
    pub n: f64,
    pub m: f64,
    pub theta: f64,
    pub theta_prime: f64,
}

impl MaximalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) {
            return Err(Error::param("n", "scale must be at least 1"));
        }
        if !(self.m > 2.0) {
            return Err(Error::param("m", "moment order must exceed 2"));
        }
        if !(0.5 <= self.theta_prime && self.theta_prime < self.theta && self.theta < 1.0) {
            return Err(Error::pre(format!(
                "need 1/2 <= theta' < theta < 1, got theta' = {}, theta = {}",
                self.theta_prime, self.theta
            )));
        }
        Ok(())
    }
}

/// Maximal inequality: `max_{Q_{theta' n^2, theta' n}} |u|` against
/// `n^{-(m-2)} ||u||_{inf,inf,[-n^2,0] x box}` plus
/// `(M_n / (theta - theta')^{m+3}) ||u||_{1,1,Q_{theta n^2, theta n}}`.
///
/// Times of `u` are absolute with the top of the cylinders at 0. `M_n` is
/// `||max(mu,1)||_p ||max(mu_m,1)||_p ||max(nu,1)||_q` on `B_{theta n}`.
pub fn maximal_report(
    env: &Environment,
    u: &SpaceTimeField,
    params: &MaximalParams,
    exponents: &ExponentSet,
) -> Result<InequalityReport> {
    params.validate()?;
    u.check(env)?;
    let (n, m, th, thp) = (params.n, params.m, params.theta, params.theta_prime);
    let grid = *u.grid();
    let n2 = n * n;
    if !grid.covers(-n2, 0.0) {
        return Err(Error::pre(format!(
            "field on [{}, {}] does not cover [-n^2, 0] = [{}, 0]",
            grid.t0,
            grid.end(),
            -n2
        )));
    }
    let win = |a: f64| {
        grid.window(a, 0.0)
            .ok_or_else(|| Error::pre(format!("window [{a}, 0] holds no grid time")))
    };
    let (center, inner) = origin_ball(env, thp * n)?;
    let (_, outer) = origin_ball(env, th * n)?;
    let w_inner = win(-thp * n2)?;
    let w_outer = win(-th * n2)?;
    let w_all = win(-n2)?;

    let lhs = (w_inner.0..=w_inner.1)
        .flat_map(|k| inner.iter().map(move |&x| (k, x)))
        .fold(0.0f64, |a, (k, x)| a.max(u.slice(k)[x].abs()));
    let sup_all = (w_all.0..=w_all.1).fold(0.0f64, |a, k| a.max(u.slice(k).sup_norm()));
    let first = libm::pow(n, -(m - 2.0)) * sup_all;

    let mp = moments(
        env,
        &MomentRequest {
            m_list: vec![m],
            exponents: None,
        },
    );
    let clip = |v: &[f64], p: f64| lp_average(outer.iter().map(|&x| v[x].max(1.0)), p);
    let m_n = clip(&mp.mu, exponents.p) * clip(&mp.mu_m[0].values, exponents.p) * clip(&mp.nu, exponents.q);
    let factor = libm::pow(m_n / libm::pow(th - thp, m + 3.0), KAPPA1);
    let l11 = space_time_norm(u, w_outer, &outer, NormSpec::new(1.0, 1.0)?)?;
    let second = factor * l11;

    Ok(InequalityReport::new(
        "maximal",
        lhs,
        vec![
            Term::new("global_sup", first),
            Term::new("local_l11", second),
            Term::new("m_n", m_n),
            Term::new("l11", l11),
        ],
        ratio(lhs, first + second),
        ReportMeta {
            center,
            radius: th * n,
            exponents: Some(exponents.clone()),
            grid: Some(grid),
            params: vec![
                Term::new("n", n),
                Term::new("m", m),
                Term::new("theta", th),
                Term::new("theta_prime", thp),
                Term::new("kappa1", KAPPA1),
            ],
            notes: vec![format!(
                "the global sup is taken over the stored lattice ({} sites), not all of Z^d",
                env.num_sites()
            )],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{LatticeField, TimeGrid};
    use crate::kernel::evolve_on_grid;
    use crate::Lattice;

    fn setup() -> (Environment, ExponentSet, MaximalParams) {
        let env = Environment::nearest_neighbour(Lattice::cube(2, 12).unwrap(), 1.0).unwrap();
        let e = ExponentSet::new(2, 3.0, 4.0).unwrap();
        let p = MaximalParams {
            n: 8.0,
            m: 4.0,
            theta: 0.75,
            theta_prime: 0.5,
        };
        (env, e, p)
    }

    #[test]
    fn constant_field() {
        let (env, e, p) = setup();
        let g = TimeGrid::span(-256.0, 0.0, 64).unwrap();
        let u = SpaceTimeField::constant(g, env.num_sites(), 2.0);
        let r = maximal_report(&env, &u, &p, &e).unwrap();
        assert_eq!(r.lhs, 2.0);
        assert!((r.rhs_term("l11").unwrap() - 2.0).abs() < 1e-14);
        assert!(r.implied_constant <= 1.0);
    }

    #[test]
    fn kernel_is_homogeneous() {
        let (env, e, p) = setup();
        let g = TimeGrid::span(-256.0, 0.0, 64).unwrap();
        let d = LatticeField::delta(env.num_sites(), env.lattice().origin());
        let u = evolve_on_grid(&env, &d, g, 1e-12).unwrap();
        let a = maximal_report(&env, &u, &p, &e).unwrap();
        let b = maximal_report(&env, &u.scaled(3.0), &p, &e).unwrap();
        assert!(a.implied_constant.is_finite() && a.implied_constant > 0.0);
        assert!((a.implied_constant - b.implied_constant).abs() <= 1e-12 * a.implied_constant);
        let short = SpaceTimeField::constant(TimeGrid::span(-10.0, 0.0, 5).unwrap(), env.num_sites(), 1.0);
        assert!(maximal_report(&env, &short, &p, &e).is_err());
    }
}
