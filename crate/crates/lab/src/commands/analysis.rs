use rayon::prelude::*;
use rcm_core::corrector::{self as corr, diffusion_matrix, solve_corrector, DiffusionMatrix};
use rcm_core::llt::{curve, llt_error, GaussianKernelParams, LltGrid};
use rcm_core::Environment;
use serde::Serialize;

use super::{exponents, reach};
use crate::config::Knobs;
use crate::error::{LabError, LabResult};
use crate::output::{coord_header, Cell, Output, Table};

#[derive(Serialize)]
struct CorrectorSummary {
    tol: f64,
    max_iter: usize,
    gauge_site: Vec<i64>,
    residuals: Vec<f64>,
    iterations: Vec<usize>,
    sup_norm: f64,
    diffusion_matrix: DiffusionMatrix,
    sublinearity: corr::SublinearityReport,
}

fn default_radii(env: &Environment) -> Vec<f64> {
    let r = reach(env);
    let mut v: Vec<f64> = [r / 8.0, r / 4.0, r / 2.0, r]
        .iter()
        .map(|x| x.floor())
        .filter(|&x| x >= 1.0)
        .collect();
    v.dedup();
    v
}

fn solve(k: &Knobs, env: &Environment) -> LabResult<(corr::CorrectorField, DiffusionMatrix)> {
    let tol = k.tol.unwrap_or(corr::DEFAULT_TOL);
    let max_iter = k.max_iter.unwrap_or(100_000);
    let chi = solve_corrector(env, tol, max_iter)?;
    let m = diffusion_matrix(env, &chi)?;
    Ok((chi, m))
}

pub fn corrector(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    if !env.is_torus() {
        return Err(rcm_core::Error::NotTorus.into());
    }
    let radii = k.radii.clone().unwrap_or_else(|| default_radii(env));
    let e = exponents(k, env.dim())?;
    let (chi, m) = solve(k, env)?;
    let sub = corr::sublinearity_report(env, &chi, &radii, &e)?;
    let d = env.dim();
    let mut header = coord_header("x", d);
    header.extend(coord_header("chi", d));
    let mut t = Table::new(&header);
    for x in 0..env.num_sites() {
        let mut row: Vec<Cell> = env.lattice().coord(x).into_iter().map(Cell::I).collect();
        row.extend(chi.chi.iter().map(|c| Cell::F(c[x])));
        t.row(row);
    }
    out.csv("corrector.csv", &t)?;
    out.json(
        "corrector.json",
        &CorrectorSummary {
            tol: chi.tol,
            max_iter: k.max_iter.unwrap_or(100_000),
            gauge_site: env.lattice().coord(chi.gauge_site),
            residuals: chi.residuals.clone(),
            iterations: chi.iterations.clone(),
            sup_norm: chi.sup_norm(),
            diffusion_matrix: m,
            sublinearity: sub,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct LltSummary {
    matrix: DiffusionMatrix,
    /// `given` or `corrector`.
    matrix_source: &'static str,
    curve: rcm_core::llt::LltErrorCurve,
}

pub fn llt(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<()> {
    let n_list =
        k.n.clone()
            .ok_or_else(|| LabError::config("llt needs --n, e.g. 8,16,32"))?;
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::config("--n must be positive and strictly increasing"));
    }
    let mut grid = LltGrid::new(k.big_r.unwrap_or(1.0), k.t1.unwrap_or(1.0), k.t2.unwrap_or(2.0));
    if let Some(s) = k.t_steps {
        grid.t_steps = s;
    }
    grid.x_step = k.x_step;
    if let Some(t) = k.tol {
        grid.tol = t;
    }
    if let Some(t) = k.threshold {
        grid.threshold = t;
    }
    grid.keep_samples = k.keep_samples.unwrap_or(false);

    let d = env.dim();
    let (matrix, source) = match &k.matrix {
        Some(m) => {
            if m.len() != d * d {
                return Err(LabError::config(format!("--M needs {} entries", d * d)));
            }
            (DiffusionMatrix::new(d, m.clone())?, "given")
        }
        None if env.is_torus() => {
            let corrector_knobs = Knobs { tol: None, ..k.clone() };
            (solve(&corrector_knobs, env)?.1, "corrector")
        }
        None => {
            return Err(LabError::config(
                "--M is required on a box (the corrector needs a torus)",
            ))
        }
    };
    let params = GaussianKernelParams::new(matrix.clone())?;
    let points = n_list
        .par_iter()
        .map(|&n| llt_error(env, &params, n, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let c = curve(grid, points);

    let mut header = vec!["n".to_string(), "error".into(), "argmax_t".into()];
    header.extend(coord_header("argmax_x", d));
    header.extend(["truncation".into(), "num_samples".into()]);
    let mut t = Table::new(&header);
    for p in &c.points {
        let mut row = vec![Cell::U(p.n as u64), p.error.into(), p.argmax_t.into()];
        row.extend(p.argmax_x.iter().map(|&v| Cell::F(v)));
        row.push(p.truncation.into());
        row.push(p.num_samples.into());
        t.row(row);
    }
    out.csv("llt.csv", &t)?;
    if c.grid.keep_samples {
        let mut header = vec!["n".to_string(), "t".into()];
        header.extend(coord_header("x", d));
        header.extend(["rescaled".into(), "gaussian".into(), "abs_err".into()]);
        let mut s = Table::new(&header);
        for p in &c.points {
            for q in &p.samples {
                let mut row = vec![Cell::U(p.n as u64), q.t.into()];
                row.extend(q.x.iter().map(|&v| Cell::F(v)));
                row.extend([q.rescaled.into(), q.gaussian.into(), q.abs_err.into()]);
                s.row(row);
            }
        }
        out.csv("llt_samples.csv", &s)?;
    }
    out.json(
        "llt.json",
        &LltSummary {
            matrix,
            matrix_source: source,
            curve: c,
        },
    )?;
    Ok(())
}
