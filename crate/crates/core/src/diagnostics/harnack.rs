use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{lp_average, ratio, trapezoid_mean, InequalityReport, ReportMeta, Term};
use crate::environment::tail_with;
use crate::error::{Error, Result};
use crate::field::{LatticeField, TimeGrid};
use crate::kernel::{solve_caloric, Cylinder, ExteriorData};
use crate::lattice::norm;
use crate::serde_ext;
use crate::Environment;

/// Data generating the caloric function of a Harnack comparison. The
/// function is solved on `[-2R^2, 2R^2] x B_R` around the lattice origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "data", rename_all = "snake_case")]
pub enum DataSpec {
    /// `u = value` everywhere.
    Constant { value: f64 },
    /// `mass` at `source` at the bottom time, killed outside the ball.
    Kernel { source: Vec<i64>, mass: f64 },
    /// Initial value `interior` everywhere; frozen exterior value
    /// `interior` up to distance `radius` from the origin and `exterior`
    /// (possibly negative) beyond.
    SignedExterior { interior: f64, exterior: f64, radius: f64 },
}

impl DataSpec {
    fn build(&self, env: &Environment, grid: TimeGrid) -> Result<(LatticeField, ExteriorData)> {
        let n = env.num_sites();
        Ok(match self {
            DataSpec::Constant { value } => (
                LatticeField::constant(n, *value),
                ExteriorData::constant(env, grid, *value),
            ),
            DataSpec::Kernel { source, mass } => {
                let x = env
                    .lattice()
                    .index(source)
                    .filter(|_| env.lattice().contains(source))
                    .ok_or_else(|| Error::param("source", "source outside the lattice"))?;
                let mut init = LatticeField::zeros(n);
                init[x] = *mass;
                (init, ExteriorData::killed(env, grid))
            }
            DataSpec::SignedExterior {
                interior,
                exterior,
                radius,
            } => {
                let (a, b, r) = (*interior, *exterior, *radius);
                (
                    LatticeField::constant(n, a),
                    ExteriorData::stationary(env, grid, |c| if norm(c) > r { b } else { a }),
                )
            }
        })
    }

    fn check_nonnegative_interior(&self) -> Result<()> {
        let bad = match self {
            DataSpec::Constant { value } => !(*value >= 0.0),
            DataSpec::Kernel { mass, .. } => !(*mass >= 0.0),
            DataSpec::SignedExterior { interior, .. } => !(*interior >= 0.0),
        };
        if bad {
            return Err(Error::param("data", "interior data must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WphiOptions {
    pub t0: f64,
    pub r: f64,
    pub big_r: f64,
    /// Exponent of the tail norm over `B_{2r}`.
    #[serde(with = "serde_ext")]
    pub p: f64,
    /// Grid steps per `r^2` of time.
    pub substeps: usize,
    pub tol: f64,
}

impl WphiOptions {
    pub fn new(t0: f64, r: f64, big_r: f64, p: f64) -> Self {
        WphiOptions {
            t0,
            r,
            big_r,
            p,
            substeps: 4,
            tol: 1e-10,
        }
    }

    pub fn validate(&self, env: &Environment) -> Result<()> {
        let (r, big_r, t0) = (self.r, self.big_r, self.t0);
        if !(r >= 2.0 && 4.0 * r < big_r) {
            return Err(Error::pre(format!("need 2 <= r < R/4, got r = {r}, R = {big_r}")));
        }
        let (a, b) = (t0 - 4.0 * r * r, t0 + 4.0 * r * r);
        let lim = big_r * big_r;
        if !(a >= -lim * (1.0 + 1e-12) && b <= lim * (1.0 + 1e-12)) {
            return Err(Error::pre(format!(
                "[t0 - 4r^2, t0 + 4r^2] = [{a}, {b}] is not inside [-R^2, R^2] = [{}, {lim}]",
                -lim
            )));
        }
        if big_r > env.lattice().inscribed_radius() {
            return Err(Error::pre(format!(
                "R = {big_r} exceeds the inscribed radius {} of the lattice",
                env.lattice().inscribed_radius()
            )));
        }
        if !(self.p >= 1.0) || self.substeps == 0 {
            return Err(Error::param("p", "need p >= 1 and at least one substep"));
        }
        Ok(())
    }
}

/// Weak parabolic Harnack comparison: the mean of `u` over `U^-(t0, r)`
/// against `inf_{U^+(t0, r)} u` plus the tail term
/// `(r/R)^2 max_t ||Tail(u_-(t), R)||_{p, B_{2r}}`.
///
/// `u` is solved from `data` on `[-2R^2, 2R^2] x B_R`, must be nonnegative
/// there, and keeps its exterior values for the tail. The implied constant
/// is `lhs / (inf + tail)`.
pub fn wphi_report(env: &Environment, opts: &WphiOptions, data: &DataSpec) -> Result<InequalityReport> {
    opts.validate(env)?;
    data.check_nonnegative_interior()?;
    let (r, big_r, t0) = (opts.r, opts.big_r, opts.t0);
    let lat = env.lattice();
    let center = lat.coord(lat.origin());
    let cyl = Cylinder::harnack(0.0, &center, big_r)?;
    let (lo, hi) = cyl.interval();
    let dt_target = r * r / opts.substeps as f64;
    let steps = libm::ceil((hi - lo) / dt_target - 1e-9) as usize;
    let grid = TimeGrid::span(lo, hi, steps)?;
    let (init, ext) = data.build(env, grid)?;
    let u = solve_caloric(env, &cyl, &init, &ext, opts.tol)?;

    let ball = cyl.sites(env);
    for k in 0..grid.len() {
        if let Some(&x) = ball.iter().find(|&&x| u.slice(k)[x] < 0.0) {
            return Err(Error::Negative {
                time: grid.time(k),
                site: lat.coord(x),
                value: u.slice(k)[x],
            });
        }
    }

    let mut notes = Vec::new();
    let mut window = |name: &str, a: f64, b: f64| -> Result<(usize, usize)> {
        let w = grid
            .window(a, b)
            .ok_or_else(|| Error::pre(format!("{name} window [{a}, {b}] holds no grid time")))?;
        let (ga, gb) = (grid.time(w.0), grid.time(w.1));
        if (ga - a).abs() > 1e-9 * grid.dt || (gb - b).abs() > 1e-9 * grid.dt {
            notes.push(format!("{name} window [{a}, {b}] snapped to [{ga}, {gb}]"));
        }
        Ok(w)
    };
    let r2 = r * r;
    let wm = window("U-", t0 - 2.0 * r2, t0 - r2)?;
    let wp = window("U+", t0 + r2, t0 + 2.0 * r2)?;
    let wt = window("tail", t0 - 4.0 * r2, t0 + 4.0 * r2)?;

    let small = lat.ball(&center, r);
    let sums: Vec<f64> = (wm.0..=wm.1)
        .map(|k| small.iter().map(|&x| u.slice(k)[x]).sum())
        .collect();
    let lhs = trapezoid_mean(&sums) / small.len() as f64;

    let inf = (wp.0..=wp.1)
        .flat_map(|k| small.iter().map(move |&x| (k, x)))
        .map(|(k, x)| u.slice(k)[x])
        .fold(f64::INFINITY, f64::min);

    let double = lat.ball(&center, 2.0 * r);
    let n = env.num_sites();
    let mut tail_sup = 0.0f64;
    for k in wt.0..=wt.1 {
        let slice = u.slice(k);
        let value = |id: u32| {
            let v = if (id as usize) < n {
                slice[id as usize]
            } else {
                ext.value(env, id, k)
            };
            (-v).max(0.0)
        };
        let tails = double.iter().map(|&x| tail_with(env, big_r, x, value));
        tail_sup = tail_sup.max(lp_average(tails, opts.p));
    }
    let tail = (r / big_r) * (r / big_r) * tail_sup;

    Ok(InequalityReport::new(
        "weak_parabolic_harnack",
        lhs,
        vec![Term::new("inf_u_plus", inf), Term::new("tail", tail)],
        ratio(lhs, inf + tail),
        ReportMeta {
            center,
            radius: big_r,
            grid: Some(grid),
            params: vec![
                Term::new("t0", t0),
                Term::new("r", r),
                Term::new("R", big_r),
                Term::new("p", opts.p),
                Term::new("tol", opts.tol),
            ],
            notes,
            ..Default::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Lattice;

    fn env() -> Environment {
        Environment::nearest_neighbour(Lattice::cube(2, 10).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn constants_give_one() {
        let e = env();
        let o = WphiOptions::new(0.0, 2.0, 9.0, 2.0);
        let rep = wphi_report(&e, &o, &DataSpec::Constant { value: 1.7 }).unwrap();
        assert!((rep.implied_constant - 1.0).abs() < 1e-10);
        assert_eq!(rep.rhs_term("tail"), Some(0.0));
    }

    #[test]
    fn kernel_is_homogeneous() {
        let e = env();
        let o = WphiOptions::new(0.0, 2.0, 9.0, 2.0);
        let a = wphi_report(
            &e,
            &o,
            &DataSpec::Kernel {
                source: vec![1, 0],
                mass: 1.0,
            },
        )
        .unwrap();
        let b = wphi_report(
            &e,
            &o,
            &DataSpec::Kernel {
                source: vec![1, 0],
                mass: 2.0,
            },
        )
        .unwrap();
        assert!(a.implied_constant > 0.0 && a.implied_constant.is_finite());
        assert!((a.implied_constant - b.implied_constant).abs() <= 1e-12 * a.implied_constant);
    }

    #[test]
    fn preconditions() {
        let e = env();
        let k = DataSpec::Constant { value: 1.0 };
        assert!(wphi_report(&e, &WphiOptions::new(0.0, 1.5, 9.0, 2.0), &k).is_err());
        assert!(wphi_report(&e, &WphiOptions::new(0.0, 2.0, 8.0, 2.0), &k).is_err());
        assert!(wphi_report(&e, &WphiOptions::new(70.0, 2.0, 9.0, 2.0), &k).is_err());
        assert!(wphi_report(&e, &WphiOptions::new(0.0, 2.0, 11.0, 2.0), &k).is_err());
    }
}
