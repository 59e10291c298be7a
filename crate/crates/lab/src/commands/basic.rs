use rayon::prelude::*;
use rcm_core::environment::{check_assumptions, moments as moment_profile, MomentRequest};
use rcm_core::kernel::{ondiag_check, propagate};
use rcm_core::walk::{EmpiricalKernel, ScaledSamples, Trajectory, Walker};
use rcm_core::{Environment, LatticeField};
use serde::Serialize;

use super::{dropped_mass, exponents, first, seed, start_site};
use crate::config::Knobs;
use crate::envfile::{self, Header};
use crate::error::{LabError, LabResult};
use crate::output::{coord_header, Cell, Output, Table};

#[derive(Serialize)]
struct EnvSummary {
    header: Header,
    num_sites: usize,
    num_halo: usize,
    pi_min: f64,
    pi_max: f64,
    pi_mean: f64,
    /// Second-moment mass of the jumps beyond the cutoff, in expectation.
    dropped_second_moment: Option<f64>,
}

pub fn env(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let pis = env.pis();
    let summary = EnvSummary {
        header: Header::of(env),
        num_sites: env.num_sites(),
        num_halo: env.num_halo(),
        pi_min: pis.iter().copied().fold(f64::INFINITY, f64::min),
        pi_max: pis.iter().copied().fold(0.0, f64::max),
        pi_mean: pis.iter().sum::<f64>() / pis.len() as f64,
        dropped_second_moment: dropped_mass(env),
    };
    match k.format.as_deref().unwrap_or("jsonl") {
        "jsonl" => out.write("environment.jsonl", &envfile::to_jsonl(env))?,
        "binary" => out.write("environment.bin", &envfile::to_binary(env))?,
        other => return Err(LabError::config(format!("unknown format `{other}` (jsonl or binary)"))),
    };
    out.json("environment_summary.json", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct MomentSummary<'a> {
    m_list: &'a [f64],
    assumptions: rcm_core::environment::AssumptionReport,
    aggregates: Option<rcm_core::environment::MomentAggregates>,
    missing_nn: usize,
    dropped_second_moment: Option<f64>,
}

pub fn moments(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let m_list = k.m.clone().unwrap_or_else(|| vec![3.0]);
    if m_list.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
        return Err(LabError::config("moment orders must be finite and nonnegative"));
    }
    let e = exponents(k, env.dim())?;
    let prof = moment_profile(
        env,
        &MomentRequest {
            m_list: m_list.clone(),
            exponents: Some(e.clone()),
        },
    );
    let d = env.dim();
    let mut header = coord_header("x", d);
    header.extend(["mu".into(), "nu".into()]);
    header.extend(m_list.iter().map(|m| format!("mu_m{m}")));
    header.push("mu_star".into());
    let mut t = Table::new(&header);
    let star = prof.mu_star.as_ref().expect("exponents were given");
    for x in 0..env.num_sites() {
        let mut row: Vec<Cell> = env.lattice().coord(x).into_iter().map(Cell::I).collect();
        row.push(prof.mu[x].into());
        row.push(prof.nu[x].into());
        row.extend(prof.mu_m.iter().map(|c| Cell::F(c.values[x])));
        row.push(star[x].into());
        t.row(row);
    }
    out.csv("moments.csv", &t)?;
    out.json(
        "moments.json",
        &MomentSummary {
            m_list: &m_list,
            assumptions: check_assumptions(&e),
            aggregates: prof.aggregates.clone(),
            missing_nn: prof.missing_nn.len(),
            dropped_second_moment: dropped_mass(env),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct WalkSummary {
    t: f64,
    samples: usize,
    start: Vec<i64>,
    killed_fraction: f64,
    mean_displacement: Vec<f64>,
    scaled: Vec<ScaledSummary>,
}

#[derive(Serialize)]
struct ScaledSummary {
    n: u32,
    t: f64,
    survivors: usize,
    killed: usize,
    mean: Vec<f64>,
    covariance: Vec<f64>,
    warnings: Vec<String>,
}

fn endpoints(w: &Walker, x0: usize, horizon: f64, samples: usize, base: u64) -> LabResult<Vec<Trajectory>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| w.endpoint(x0, horizon, base + i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Into::into)
}

pub fn walk(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let t = first(&k.t).unwrap_or(1.0);
    let samples = k.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(LabError::config("--samples must be positive"));
    }
    let x0 = start_site(env, k)?;
    let w = Walker::new(env, seed(k));
    let ends = endpoints(&w, x0, t, samples, 0)?;

    let mut kern = EmpiricalKernel::empty(t, env.num_sites());
    ends.iter().for_each(|tr| kern.record(tr));
    let d = env.dim();
    let mut header = coord_header("x", d);
    header.extend(["count".into(), "probability".into()]);
    let mut table = Table::new(&header);
    for (x, &c) in kern.counts.iter().enumerate() {
        if c > 0 {
            let mut row: Vec<Cell> = env.lattice().coord(x).into_iter().map(Cell::I).collect();
            row.push(c.into());
            row.push((c as f64 / samples as f64).into());
            table.row(row);
        }
    }
    out.csv("walk_kernel.csv", &table)?;

    let mut mean_disp = vec![0.0; d];
    for tr in &ends {
        for (m, &v) in mean_disp.iter_mut().zip(&tr.displacement) {
            *m += v as f64 / samples as f64;
        }
    }
    let mut scaled = Vec::new();
    for (j, n) in k.n.clone().unwrap_or_default().into_iter().enumerate() {
        if n == 0 {
            return Err(LabError::config("walk scales must be positive"));
        }
        let h = (n as f64) * (n as f64) * t;
        // separate stream blocks per scale
        let base = (j as u64 + 1) << 40;
        let ends = endpoints(&w, env.lattice().origin(), h, samples, base)?;
        let s = ScaledSamples::from_endpoints(env, n, t, &ends);
        scaled.push(ScaledSummary {
            n,
            t,
            survivors: s.points.len(),
            killed: s.killed,
            mean: s.mean(),
            covariance: s.covariance(),
            warnings: s.warnings.clone(),
        });
    }
    out.json(
        "walk.json",
        &WalkSummary {
            t,
            samples,
            start: env.lattice().coord(x0),
            killed_fraction: kern.killed_fraction(),
            mean_displacement: mean_disp,
            scaled,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct KernelEntry {
    t: f64,
    mass: f64,
    sup: f64,
    at_start: f64,
}

#[derive(Serialize)]
struct KernelSummary {
    start: Vec<i64>,
    tol: f64,
    entries: Vec<KernelEntry>,
    ondiag: Option<rcm_core::kernel::OnDiagReport>,
    ondiag_error: Option<String>,
}

pub fn kernel(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let times = k.t.clone().unwrap_or_else(|| vec![1.0, 4.0, 16.0]);
    let tol = k.tol.unwrap_or(1e-12);
    let factor = k.factor.unwrap_or(3.0);
    let x0 = start_site(env, k)?;
    let fields = propagate(env, &LatticeField::delta(env.num_sites(), x0), &times, tol)?;
    let d = env.dim();
    let mut header = vec!["t".to_string()];
    header.extend(coord_header("x", d));
    header.push("p".into());
    let mut table = Table::new(&header);
    let mut entries = Vec::new();
    for (&t, f) in times.iter().zip(&fields) {
        for (x, &v) in f.values().iter().enumerate() {
            if v != 0.0 {
                let mut row = vec![Cell::F(t)];
                row.extend(env.lattice().coord(x).into_iter().map(Cell::I));
                row.push(v.into());
                table.row(row);
            }
        }
        entries.push(KernelEntry {
            t,
            mass: f.sum(),
            sup: f.sup_norm(),
            at_start: f[x0],
        });
    }
    out.csv("kernel.csv", &table)?;
    let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let (ondiag, ondiag_error) = match ondiag_check(env, &positive, tol, factor) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    out.json(
        "kernel.json",
        &KernelSummary {
            start: env.lattice().coord(x0),
            tol,
            entries,
            ondiag,
            ondiag_error,
        },
    )?;
    Ok(())
}
