use rayon::prelude::*;
use rcm_core::diagnostics::{
    holder_report, maximal_report, poincare_audit, sobolev_audit, wphi_report, DataSpec, HolderReport,
    InequalityReport, MaximalParams, Profile, WphiOptions,
};
use rcm_core::kernel::{evolve_on_grid, heat_kernel};
use rcm_core::{Environment, LatticeField, TimeGrid};
use serde::Serialize;

use super::{exponents, first, reach, start_site, trial_streams};
use crate::config::Knobs;
use crate::error::{LabError, LabResult};
use crate::output::{Cell, Output, Table};

#[derive(Serialize)]
struct Trial {
    trial: usize,
    data: DataSpec,
    report: InequalityReport,
}

#[derive(Serialize)]
struct WphiSummary {
    options: WphiOptions,
    trials: Vec<Trial>,
    max_implied_constant: f64,
    min_implied_constant: f64,
}

fn wphi_options(k: &Knobs, env: &Environment) -> LabResult<WphiOptions> {
    let big_r = k.big_r.unwrap_or_else(|| reach(env).min(20.0).floor());
    let r = k.r.unwrap_or_else(|| ((big_r - 1.0) / 4.0).floor());
    let mut o = WphiOptions::new(k.t0.unwrap_or(0.0), r, big_r, k.p.unwrap_or(2.0));
    if let Some(s) = k.substeps {
        o.substeps = s;
    }
    if let Some(t) = k.tol {
        o.tol = t;
    }
    o.validate(env)?;
    Ok(o)
}

pub fn wphi(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let opts = wphi_options(k, env)?;
    let value = k.value.unwrap_or(1.0);
    let trials = k.trials.unwrap_or(1);
    if trials == 0 {
        return Err(LabError::config("--trials must be positive"));
    }
    let lat = env.lattice();
    let data: Vec<DataSpec> = match k.data.as_deref().unwrap_or("kernel") {
        "constant" => vec![DataSpec::Constant { value }],
        "signed" => vec![DataSpec::SignedExterior {
            interior: value,
            exterior: k.exterior.unwrap_or(-1.0),
            radius: opts.big_r,
        }],
        "kernel" => {
            if k.x0.is_some() && trials == 1 {
                vec![DataSpec::Kernel {
                    source: lat.coord(start_site(env, k)?),
                    mass: value,
                }]
            } else {
                // sources uniform on the inner ball B_r, one stream per trial
                let ball = lat.ball(&lat.coord(lat.origin()), opts.r);
                let streams = trial_streams(k);
                (0..trials)
                    .map(|i| {
                        let x = ball[streams.stream(i as u64).below(ball.len())];
                        DataSpec::Kernel {
                            source: lat.coord(x),
                            mass: value,
                        }
                    })
                    .collect()
            }
        }
        other => {
            return Err(LabError::config(format!(
                "unknown data `{other}` (constant, kernel or signed)"
            )))
        }
    };
    let reports = data
        .par_iter()
        .map(|d| wphi_report(env, &opts, d))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["trial", "data", "lhs", "inf_u_plus", "tail", "implied_constant"]);
    let mut trials_out = Vec::new();
    for (i, (d, r)) in data.into_iter().zip(reports).enumerate() {
        let label = match &d {
            DataSpec::Constant { .. } => "constant".to_string(),
            DataSpec::Kernel { source, .. } => {
                format!(
                    "kernel@{}",
                    source.iter().map(i64::to_string).collect::<Vec<_>>().join(":")
                )
            }
            DataSpec::SignedExterior { .. } => "signed".to_string(),
        };
        table.row(vec![
            Cell::U(i as u64),
            Cell::S(&label),
            r.lhs.into(),
            r.rhs_term("inf_u_plus").unwrap_or(f64::NAN).into(),
            r.rhs_term("tail").unwrap_or(f64::NAN).into(),
            r.implied_constant.into(),
        ]);
        trials_out.push(Trial {
            trial: i,
            data: d,
            report: r,
        });
    }
    let ic = trials_out.iter().map(|t| t.report.implied_constant);
    let max = ic.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = ic.fold(f64::INFINITY, f64::min);
    out.csv("wphi.csv", &table)?;
    out.json(
        "wphi.json",
        &WphiSummary {
            options: opts,
            trials: trials_out,
            max_implied_constant: max,
            min_implied_constant: min,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FieldAudit<'a> {
    source: Vec<i64>,
    field: &'a str,
    kernel_time: Option<f64>,
    report: InequalityReport,
}

/// Heat kernel from `--x0` at time `--t` (default `R^2/4`), or i.i.d.
/// uniform values on `[-1, 1]`.
fn test_function(k: &Knobs, env: &Environment, big_r: f64) -> LabResult<(LatticeField, &'static str, Option<f64>)> {
    match k.field.as_deref().unwrap_or("kernel") {
        "kernel" => {
            let t = first(&k.t).unwrap_or(big_r * big_r / 4.0);
            if !(t > 0.0) {
                return Err(LabError::config("kernel time must be positive"));
            }
            let u = heat_kernel(env, t, start_site(env, k)?, k.tol.unwrap_or(1e-12))?;
            Ok((u, "kernel", Some(t)))
        }
        "random" => {
            let mut s = trial_streams(k).stream(u64::MAX);
            let v = (0..env.num_sites()).map(|_| 2.0 * s.uniform() - 1.0).collect();
            Ok((LatticeField::new(v), "random", None))
        }
        other => Err(LabError::config(format!("unknown field `{other}` (kernel or random)"))),
    }
}

fn audit_radius(k: &Knobs, env: &Environment) -> f64 {
    k.big_r.unwrap_or_else(|| reach(env).min(16.0).floor())
}

pub fn sobolev(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let big_r = audit_radius(k, env);
    let e = exponents(k, env.dim())?;
    let (u, field, kt) = test_function(k, env, big_r)?;
    let report = sobolev_audit(env, &u, big_r, &e)?;
    out.json(
        "sobolev.json",
        &FieldAudit {
            source: env.lattice().coord(start_site(env, k)?),
            field,
            kernel_time: kt,
            report,
        },
    )?;
    Ok(())
}

pub fn poincare(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let big_r = audit_radius(k, env);
    let profile = match k.profile.as_deref().unwrap_or("linear") {
        "indicator" => Profile::Indicator,
        "linear" => Profile::Linear,
        other => {
            return Err(LabError::config(format!(
                "unknown profile `{other}` (indicator or linear)"
            )))
        }
    };
    let (u, field, kt) = test_function(k, env, big_r)?;
    let report = poincare_audit(env, &u, big_r, &profile)?;
    out.json(
        "poincare.json",
        &FieldAudit {
            source: env.lattice().coord(start_site(env, k)?),
            field,
            kernel_time: kt,
            report,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct MaximalSummary {
    params: MaximalParams,
    source: Vec<i64>,
    grid: TimeGrid,
    report: InequalityReport,
}

pub fn maximal(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let theta = k.theta.unwrap_or(0.75);
    let n = match first(&k.n) {
        Some(n) => n as f64,
        None => (reach(env) / theta).min(16.0).floor(),
    };
    let params = MaximalParams {
        n,
        m: first(&k.m).unwrap_or(4.0),
        theta,
        theta_prime: k.theta_prime.unwrap_or(0.5),
    };
    params.validate()?;
    let e = exponents(k, env.dim())?.with_m(params.m);
    let steps = k.steps.unwrap_or(64);
    let grid = TimeGrid::span(-n * n, 0.0, steps)?;
    let x0 = start_site(env, k)?;
    let u = evolve_on_grid(
        env,
        &LatticeField::delta(env.num_sites(), x0),
        grid,
        k.tol.unwrap_or(1e-12),
    )?;
    let report = maximal_report(env, &u, &params, &e)?;
    out.json(
        "maximal.json",
        &MaximalSummary {
            params,
            source: env.lattice().coord(x0),
            grid,
            report,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct HolderSummary {
    source: Vec<i64>,
    start_time: f64,
    grid: TimeGrid,
    report: HolderReport,
}

/// Oscillation decay of the heat kernel started `--t` (default `R^2`)
/// before the bottom of the largest cylinder.
pub fn holder(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let big_r = audit_radius(k, env);
    let base = k.base.unwrap_or(6.0);
    let lag = first(&k.t).unwrap_or(big_r * big_r);
    if !(lag > 0.0) {
        return Err(LabError::config("the kernel lag --t must be positive"));
    }
    let (lo, hi) = (-big_r * big_r / 2.0 - lag, big_r * big_r / 2.0);
    // spacing at most 2 keeps a grid time inside every cylinder of radius > 2
    let steps = k.steps.unwrap_or(((hi - lo) / 2.0).ceil().max(16.0) as usize);
    let grid = TimeGrid::span(lo, hi, steps)?;
    let x0 = start_site(env, k)?;
    let u = evolve_on_grid(
        env,
        &LatticeField::delta(env.num_sites(), x0),
        grid,
        k.tol.unwrap_or(1e-12),
    )?;
    let report = holder_report(env, &u, big_r, base)?;
    let mut t = Table::new(&["k", "radius", "oscillation"]);
    for (i, (r, o)) in report.radii.iter().zip(&report.oscillations).enumerate() {
        t.row(vec![Cell::U(i as u64), (*r).into(), (*o).into()]);
    }
    out.csv("holder.csv", &t)?;
    out.json(
        "holder.json",
        &HolderSummary {
            source: env.lattice().coord(x0),
            start_time: lo,
            grid,
            report,
        },
    )?;
    Ok(())
}
