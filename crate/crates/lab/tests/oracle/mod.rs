//! Direct-summation recomputation of the audit reports. Balls come from a
//! brute-force scan with minimal-image distances, windows from a scan of the
//! grid times, and every sum is written out from the edge rows.

use rcm_core::diagnostics::{
    holder_report, maximal_report, poincare_audit, sobolev_audit, wphi_report, DataSpec, InequalityReport,
    MaximalParams, Profile, WphiOptions,
};
use rcm_core::environment::{long_range_percolation, polynomial_conductance};
use rcm_core::kernel::{solve_caloric, Cylinder, ExteriorData};
use rcm_core::rng::{Domain, Stream, StreamFactory};
use rcm_core::{Environment, Error, ExponentSet, Lattice, LatticeField, SpaceTimeField, TimeGrid, XiSpec};

/// Relative deviation, with `floor` guarding values that may cancel to 0.
fn dev(a: f64, b: f64, floor: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if !a.is_finite() || !b.is_finite() {
        return f64::INFINITY;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

struct Tally {
    worst: f64,
    what: String,
}

impl Tally {
    fn see(&mut self, what: &str, a: f64, b: f64, floor: f64) {
        let d = dev(a, b, floor);
        if !(d <= self.worst) {
            self.worst = d;
            self.what = format!("{what}: {a} vs {b}");
        }
    }
}

fn origin(env: &Environment) -> Vec<i64> {
    let lat = env.lattice();
    lat.coord(lat.origin())
}

fn dist2(env: &Environment, a: &[i64], b: &[i64]) -> f64 {
    let lat = env.lattice();
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let mut d = (x - y).abs();
            if lat.is_torus() {
                let s = lat.side() as i64;
                d %= s;
                d = d.min(s - d);
            }
            (d * d) as f64
        })
        .sum()
}

fn ball(env: &Environment, r: f64) -> Vec<usize> {
    let c = origin(env);
    (0..env.num_sites())
        .filter(|&x| dist2(env, &env.lattice().coord(x), &c) <= r * r)
        .collect()
}

fn window(g: &TimeGrid, lo: f64, hi: f64) -> Vec<usize> {
    let eps = 1e-9 * g.dt;
    (0..g.len())
        .filter(|&k| g.time(k) >= lo - eps && g.time(k) <= hi + eps)
        .collect()
}

fn power_mean(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    (v.iter().map(|x| x.abs().powf(p)).sum::<f64>() / v.len() as f64).powf(1.0 / p)
}

/// Integral mean in time of equally spaced samples: piecewise linear.
fn time_mean(g: &[f64]) -> f64 {
    if g.len() == 1 {
        return g[0];
    }
    let area: f64 = g.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum();
    area / (g.len() - 1) as f64
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `(sum |z|^2 C, sum |z|^m C, sum_{|z|=1} 1/C)` at `x`.
fn site_moments(env: &Environment, x: usize, m: f64) -> (f64, f64, f64) {
    let row = env.row(x);
    let (mut mu, mut mum, mut nu, mut nn) = (0.0, 0.0, 0.0, 0);
    for k in 0..row.len() {
        let l2: f64 = row.disp(k).iter().map(|&v| (v as f64).powi(2)).sum();
        mu += l2 * row.conds[k];
        mum += l2.sqrt().powf(m) * row.conds[k];
        if l2 == 1.0 {
            nu += 1.0 / row.conds[k];
            nn += 1;
        }
    }
    (mu, mum, if nn == 2 * env.dim() { nu } else { f64::INFINITY })
}

/// Ordered nearest-neighbour pairs inside `inside`, with conductances.
fn nn_pairs(env: &Environment, inside: &[usize]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for &x in inside {
        let row = env.row(x);
        for k in 0..row.len() {
            let y = row.targets[k] as usize;
            let l1: i64 = row.disp(k).iter().map(|&v| (v as i64).abs()).sum();
            if l1 == 1 && inside.binary_search(&y).is_ok() {
                out.push((x, y, row.conds[k]));
            }
        }
    }
    out
}

fn random_env(s: &mut Stream, seed: u64) -> Environment {
    let lat = if s.uniform() < 0.5 {
        Lattice::torus(2, 18 + 2 * s.below(3)).unwrap()
    } else {
        Lattice::cube(2, 9 + s.below(3)).unwrap()
    };
    let cutoff = 2.0 + 2.5 * s.uniform();
    if s.uniform() < 0.5 {
        long_range_percolation(lat, 1.0 + 4.0 * s.uniform(), cutoff, seed).unwrap()
    } else {
        let xi = XiSpec::Exponential {
            rate: 0.3 + s.uniform(),
        };
        polynomial_conductance(lat, 2.2 + 3.0 * s.uniform(), xi, cutoff, seed).unwrap()
    }
}

fn random_field(s: &mut Stream, grid: TimeGrid, n: usize) -> SpaceTimeField {
    let slices = (0..grid.len())
        .map(|_| LatticeField::new((0..n).map(|_| 2.0 * s.uniform() - 1.0).collect()))
        .collect();
    SpaceTimeField::new(grid, slices).unwrap()
}

fn sobolev_case(env: &Environment, s: &mut Stream, t: &mut Tally) {
    let p = 1.5 + 6.0 * s.uniform();
    let q = (1.0 / (0.5 - 0.5 / p)) * (1.0 + 2.0 * s.uniform());
    let e = ExponentSet::new(2, p, q).unwrap();
    let radius = 1.0 + (env.lattice().inscribed_radius() - 1.0) * s.uniform();
    let u = LatticeField::new((0..env.num_sites()).map(|_| 2.0 * s.uniform() - 1.0).collect());
    let rep = sobolev_audit(env, &u, radius, &e).unwrap();

    let b = ball(env, radius);
    let v = u.values();
    let sq: Vec<f64> = b.iter().map(|&x| v[x] * v[x]).collect();
    let lhs = power_mean(&sq, e.rho);
    let nu: Vec<f64> = b.iter().map(|&x| site_moments(env, x, 2.0).2).collect();
    let energy: f64 = nn_pairs(env, &b)
        .iter()
        .map(|&(x, y, c)| (v[x] - v[y]).powi(2) * c)
        .sum::<f64>()
        / b.len() as f64;
    let first = (b.len() as f64) * power_mean(&nu, q) * energy;
    let second = power_mean(&sq, e.p_star);
    t.see("sobolev lhs", rep.lhs, lhs, 0.0);
    t.see("sobolev energy", rep.rhs_term("energy").unwrap(), first, 0.0);
    t.see("sobolev lower order", rep.rhs_term("lower_order").unwrap(), second, 0.0);
    t.see(
        "sobolev C",
        rep.implied_constant,
        ratio((lhs - second).max(0.0), first),
        lhs / first,
    );
}

fn profile_eval(p: &Profile, r: f64, big_r: f64) -> f64 {
    match p {
        Profile::Indicator => (r <= big_r) as u8 as f64,
        Profile::Linear => (1.0 - r / big_r).max(0.0),
        Profile::Tabulated { radii, values } => {
            if r < radii[0] {
                return values[0];
            }
            for i in 1..radii.len() {
                if r < radii[i] {
                    let w = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                    return values[i - 1] * (1.0 - w) + values[i] * w;
                }
            }
            *values.last().unwrap()
        }
    }
}

fn poincare_case(env: &Environment, s: &mut Stream, t: &mut Tally) {
    let radius = 1.5 + (env.lattice().inscribed_radius() - 1.5) * s.uniform();
    let profile = match s.below(3) {
        0 => Profile::Indicator,
        1 => Profile::Linear,
        _ => {
            let mut radii = vec![0.0];
            let mut values = vec![1.0];
            for _ in 0..3 {
                radii.push(radii.last().unwrap() + 0.5 + radius * s.uniform() / 2.0);
                values.push(values.last().unwrap() * s.uniform());
            }
            Profile::Tabulated { radii, values }
        }
    };
    let u = LatticeField::new((0..env.num_sites()).map(|_| 5.0 + s.uniform()).collect());
    let rep = poincare_audit(env, &u, radius, &profile).unwrap();

    let b = ball(env, radius);
    let c = origin(env);
    let v = u.values();
    let mut eta2 = vec![0.0; env.num_sites()];
    for &x in &b {
        eta2[x] = profile_eval(&profile, dist2(env, &env.lattice().coord(x), &c).sqrt(), radius).powi(2);
    }
    let wsum: f64 = b.iter().map(|&x| eta2[x]).sum();
    let mean = b.iter().map(|&x| eta2[x] * v[x]).sum::<f64>() / wsum;
    let lhs: f64 = b.iter().map(|&x| eta2[x] * (v[x] - mean).powi(2)).sum();
    let energy: f64 = nn_pairs(env, &b)
        .iter()
        .map(|&(x, y, cd)| (v[x] - v[y]).powi(2) * eta2[x].max(eta2[y]) * cd)
        .sum();
    let nu: Vec<f64> = b.iter().map(|&x| site_moments(env, x, 2.0).2).collect();
    let rhs = power_mean(&nu, 1.0) * energy;
    t.see("poincare lhs", rep.lhs, lhs, 0.0);
    t.see("poincare rhs", rep.rhs_term("energy").unwrap(), rhs, 0.0);
    t.see("poincare C", rep.implied_constant, ratio(lhs, rhs), 0.0);
}

fn maximal_case(env: &Environment, s: &mut Stream, t: &mut Tally) {
    let thp = 0.5 + 0.2 * s.uniform();
    let th = thp + 0.05 + (0.95 - thp - 0.05) * s.uniform();
    let inscribed = env.lattice().inscribed_radius();
    let n = (1.0 / thp).max(1.0) + (inscribed / th - (1.0 / thp).max(1.0)) * s.uniform();
    let m = 2.5 + 3.5 * s.uniform();
    let params = MaximalParams {
        n,
        m,
        theta: th,
        theta_prime: thp,
    };
    let e = ExponentSet::new(2, 1.5 + 4.0 * s.uniform(), 1.5 + 4.0 * s.uniform()).unwrap();
    let grid = TimeGrid::span(
        -n * n * (1.0 + 0.5 * s.uniform()),
        2.0 * s.uniform() + 0.1,
        8 + s.below(33),
    )
    .unwrap();
    let u = random_field(s, grid, env.num_sites());
    let rep = maximal_report(env, &u, &params, &e).unwrap();

    let (inner, outer) = (ball(env, thp * n), ball(env, th * n));
    let abs = |k: usize, x: usize| u.slice(k)[x].abs();
    let lhs = window(&grid, -thp * n * n, 0.0)
        .iter()
        .flat_map(|&k| inner.iter().map(move |&x| abs(k, x)))
        .fold(0.0, f64::max);
    let sup = window(&grid, -n * n, 0.0)
        .iter()
        .flat_map(|&k| (0..env.num_sites()).map(move |x| abs(k, x)))
        .fold(0.0, f64::max);
    let first = n.powf(2.0 - m) * sup;
    let mo: Vec<(f64, f64, f64)> = outer.iter().map(|&x| site_moments(env, x, m)).collect();
    let clipped = |f: fn(&(f64, f64, f64)) -> f64| mo.iter().map(|v| f(v).max(1.0)).collect::<Vec<_>>();
    let m_n =
        power_mean(&clipped(|v| v.0), e.p) * power_mean(&clipped(|v| v.1), e.p) * power_mean(&clipped(|v| v.2), e.q);
    let wo = window(&grid, -th * n * n, 0.0);
    let means: Vec<f64> = wo
        .iter()
        .map(|&k| outer.iter().map(|&x| abs(k, x)).sum::<f64>() / outer.len() as f64)
        .collect();
    let second = m_n / (th - thp).powf(m + 3.0) * time_mean(&means);
    t.see("maximal lhs", rep.lhs, lhs, 0.0);
    t.see("maximal global", rep.rhs_term("global_sup").unwrap(), first, 0.0);
    t.see("maximal M_n", rep.rhs_term("m_n").unwrap(), m_n, 0.0);
    t.see("maximal local", rep.rhs_term("local_l11").unwrap(), second, 0.0);
    t.see("maximal C", rep.implied_constant, ratio(lhs, first + second), 0.0);
}

fn holder_case(env: &Environment, s: &mut Stream, t: &mut Tally) {
    let radius = 2.5 + (env.lattice().inscribed_radius() - 2.5) * s.uniform();
    let base = 1.5 + 3.5 * s.uniform();
    let h = radius * radius / 2.0;
    let grid = TimeGrid::span(-h * (1.0 + s.uniform()), h * (1.0 + s.uniform()), 4 + s.below(27)).unwrap();
    let u = random_field(s, grid, env.num_sites());
    let rep = holder_report(env, &u, radius, base).unwrap();

    let mut osc = Vec::new();
    let mut rho = radius;
    while rho > 2.0 {
        let w = window(&grid, -rho * rho / 2.0, rho * rho / 2.0);
        if w.is_empty() {
            break;
        }
        let b = ball(env, rho);
        let vals: Vec<f64> = w
            .iter()
            .flat_map(|&k| b.iter().map(move |&x| (k, x)))
            .map(|(k, x)| u.slice(k)[x])
            .collect();
        osc.push(
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min),
        );
        rho /= base;
    }
    if osc.len() != rep.oscillations.len() {
        t.see("holder levels", rep.oscillations.len() as f64, osc.len() as f64, 0.0);
        return;
    }
    for (a, b) in rep.oscillations.iter().zip(&osc) {
        t.see("holder oscillation", *a, *b, 0.0);
    }
    let pts: Vec<(f64, f64)> = osc
        .iter()
        .enumerate()
        .filter(|p| *p.1 > 0.0)
        .map(|(k, o)| (k as f64, o.ln()))
        .collect();
    if pts.len() >= 2 {
        let k = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
        t.see("holder beta", rep.beta.unwrap_or(f64::NAN), -slope / base.ln(), 1e-3);
    } else if rep.beta.is_some() {
        t.see("holder beta", 1.0, 0.0, 0.0);
    }
}

fn wphi_case(env: &Environment, s: &mut Stream, t: &mut Tally) {
    let lat = env.lattice();
    let big_r = 8.5 + (lat.inscribed_radius().min(10.0) - 8.5) * s.uniform();
    let r = 2.0 + ((big_r - 0.01) / 4.0 - 2.0) * s.uniform();
    let slack = big_r * big_r - 4.0 * r * r;
    let t0 = slack * (2.0 * s.uniform() - 1.0);
    let p = 1.0 + 3.0 * s.uniform();
    let c = origin(env);
    let big = ball(env, big_r);
    let (data, halo_value): (DataSpec, Box<dyn Fn(&[i64]) -> f64>) = match s.below(3) {
        0 => {
            let v = 0.5 + s.uniform();
            (DataSpec::Constant { value: v }, Box::new(move |_| v))
        }
        1 => {
            let x = big[s.below(big.len())];
            (
                DataSpec::Kernel {
                    source: lat.coord(x),
                    mass: 1.0,
                },
                Box::new(|_| 0.0),
            )
        }
        _ => {
            let (a, b, rad) = (1.0, -0.05 * s.uniform(), big_r + 3.0 * s.uniform());
            (
                DataSpec::SignedExterior {
                    interior: a,
                    exterior: b,
                    radius: rad,
                },
                Box::new(move |z: &[i64]| {
                    if ((z[0] * z[0] + z[1] * z[1]) as f64).sqrt() > rad {
                        b
                    } else {
                        a
                    }
                }),
            )
        }
    };
    let opts = WphiOptions::new(t0, r, big_r, p);
    let steps = (4.0 * big_r * big_r / (r * r / 4.0) - 1e-9).ceil() as usize;
    let grid = TimeGrid::span(-2.0 * big_r * big_r, 2.0 * big_r * big_r, steps).unwrap();
    let n = env.num_sites();
    let init = LatticeField::new(match &data {
        DataSpec::Kernel { source, .. } => {
            let mut v = vec![0.0; n];
            v[lat.index(source).unwrap()] = 1.0;
            v
        }
        _ => (0..n).map(|_| halo_value(&[0, 0])).collect(),
    });
    let ext = match &data {
        DataSpec::Constant { value } => ExteriorData::constant(env, grid, *value),
        DataSpec::Kernel { .. } => ExteriorData::killed(env, grid),
        DataSpec::SignedExterior { .. } => ExteriorData::stationary(env, grid, |z| halo_value(z)),
    };
    let u = solve_caloric(env, &Cylinder::harnack(0.0, &c, big_r).unwrap(), &init, &ext, opts.tol).unwrap();
    let rep: InequalityReport = match wphi_report(env, &opts, &data) {
        Ok(rep) => rep,
        Err(Error::Negative { .. }) => {
            let negative = (0..grid.len()).any(|k| big.iter().any(|&x| u.slice(k)[x] < 0.0));
            t.see("wphi negativity", negative as u8 as f64, 1.0, 0.0);
            return;
        }
        Err(e) => panic!("wphi: {e}"),
    };
    t.see("wphi steps", rep.meta.grid.unwrap().steps as f64, steps as f64, 0.0);

    let small = ball(env, r);
    let in_big = |x: usize| big.binary_search(&x).is_ok();
    let at = |k: usize, id: u32| -> f64 {
        if (id as usize) < n && in_big(id as usize) {
            u.slice(k)[id as usize]
        } else {
            halo_value(&env.coord(id))
        }
    };
    let means: Vec<f64> = window(&grid, t0 - 2.0 * r * r, t0 - r * r)
        .iter()
        .map(|&k| small.iter().map(|&x| u.slice(k)[x]).sum::<f64>() / small.len() as f64)
        .collect();
    let lhs = time_mean(&means);
    let inf = window(&grid, t0 + r * r, t0 + 2.0 * r * r)
        .iter()
        .flat_map(|&k| small.iter().map(move |&x| (k, x)))
        .map(|(k, x)| u.slice(k)[x])
        .fold(f64::INFINITY, f64::min);
    let double = ball(env, 2.0 * r);
    let mut sup = 0.0f64;
    for k in window(&grid, t0 - 4.0 * r * r, t0 + 4.0 * r * r) {
        let tails: Vec<f64> = double
            .iter()
            .map(|&x| {
                let row = env.row(x);
                (0..row.len())
                    .filter(|&j| row.length(j) > big_r)
                    .map(|j| (-at(k, row.targets[j])).max(0.0) * row.conds[j])
                    .sum::<f64>()
                    * big_r
                    * big_r
            })
            .collect();
        sup = sup.max(power_mean(&tails, p));
    }
    let tail = (r / big_r).powi(2) * sup;
    t.see("wphi lhs", rep.lhs, lhs, 0.0);
    t.see("wphi inf", rep.rhs_term("inf_u_plus").unwrap(), inf, 0.0);
    t.see("wphi tail", rep.rhs_term("tail").unwrap(), tail, 0.0);
    t.see("wphi C", rep.implied_constant, ratio(lhs, inf + tail), 0.0);
}

/// Runs `cases` random cases of every audit; returns the worst deviation.
pub fn run_cases(cases: u64) -> Result<(f64, u64), String> {
    let mut t = Tally {
        worst: 0.0,
        what: String::new(),
    };
    let streams = StreamFactory::new(2024, Domain::Trials);
    for i in 0..cases {
        let mut s = streams.stream(i);
        let env = random_env(&mut s, 7000 + i);
        sobolev_case(&env, &mut s, &mut t);
        poincare_case(&env, &mut s, &mut t);
        maximal_case(&env, &mut s, &mut t);
        holder_case(&env, &mut s, &mut t);
        wphi_case(&env, &mut s, &mut t);
    }
    if t.worst > 1e-10 {
        return Err(format!("max relative deviation {:.2e} at {}", t.worst, t.what));
    }
    Ok((t.worst, cases))
}
