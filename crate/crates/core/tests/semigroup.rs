#![allow(clippy::needless_range_loop)]
mod common;

use common::{dense_expm, dense_generator, random_torus, to_vec};
use rcm_core::field::{LatticeField, TimeGrid};
use rcm_core::kernel::{evolve_on_grid, heat_kernel, propagate, solve_caloric, Cylinder, ExteriorData};
use rcm_core::{Environment, Lattice};

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn small_tori_match_dense_exponential() {
    for side in 3..=7 {
        for seed in 0..4u64 {
            let env = random_torus(side, seed);
            let l = dense_generator(&env);
            let n = env.num_sites();
            let u0: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 4.0).collect();
            let times = [0.0, 0.3, 1.7, 6.0];
            let got = propagate(&env, &LatticeField::new(u0.clone()), &times, 1e-13).unwrap();
            for (t, g) in times.iter().zip(&got) {
                let want = dense_expm(&l, *t) * to_vec(&u0);
                assert!(sup(g.values(), want.as_slice()) < 1e-9, "side {side} seed {seed} t {t}");
            }
        }
    }
}

#[test]
fn killed_box_matches_dense_exponential() {
    let base = Environment::nearest_neighbour(Lattice::cube(2, 3).unwrap(), 1.0).unwrap();
    let env = base
        .map_conductances(|x, y, c| c * (1.0 + ((x * 31 + y as usize * 17) % 5) as f64 / 4.0))
        .unwrap();
    let l = dense_generator(&env);
    let o = env.lattice().origin();
    let p = heat_kernel(&env, 2.5, o, 1e-13).unwrap();
    let want = dense_expm(&l, 2.5).column(o).into_owned();
    assert!(sup(p.values(), want.as_slice()) < 1e-10);
    assert!(p.sum() < 1.0);
}

#[test]
fn kernel_is_symmetric_and_conservative() {
    let env = random_torus(5, 11);
    let n = env.num_sites();
    let cols: Vec<LatticeField> = (0..n).map(|x| heat_kernel(&env, 1.3, x, 1e-13).unwrap()).collect();
    for x in 0..n {
        assert!((cols[x].sum() - 1.0).abs() < 1e-11);
        for y in 0..n {
            assert!((cols[x][y] - cols[y][x]).abs() < 1e-11);
        }
    }
}

#[test]
fn chapman_kolmogorov() {
    let env = random_torus(4, 5);
    let n = env.num_sites();
    let (s, t) = (0.8, 1.9);
    let ps: Vec<LatticeField> = (0..n).map(|x| heat_kernel(&env, s, x, 1e-13).unwrap()).collect();
    let pt: Vec<LatticeField> = (0..n).map(|x| heat_kernel(&env, t, x, 1e-13).unwrap()).collect();
    for x in 0..n {
        let direct = heat_kernel(&env, s + t, x, 1e-13).unwrap();
        for y in 0..n {
            let composed: f64 = (0..n).map(|z| ps[x][z] * pt[z][y]).sum();
            assert!((composed - direct[y]).abs() < 1e-10);
        }
    }
}

#[test]
fn grid_evolution_agrees_with_independent_steps() {
    let env = random_torus(6, 2);
    let u0 = LatticeField::delta(env.num_sites(), 0);
    let g = TimeGrid::span(0.0, 3.0, 6).unwrap();
    let u = evolve_on_grid(&env, &u0, g, 1e-13).unwrap();
    let mut step = u0.clone();
    for k in 1..g.len() {
        step = propagate(&env, &step, &[g.dt], 1e-13).unwrap().remove(0);
        assert!(sup(step.values(), u.slice(k).values()) < 1e-11);
    }
}

/// Caloric function with exterior data frozen at a stationary profile,
/// against the dense affine ODE `u' = L_B u + b`.
#[test]
fn caloric_solve_matches_dense_affine_ode() {
    let lat = Lattice::torus(2, 12).unwrap();
    let env = random_torus_on(lat, 9);
    let center = env.lattice().coord(env.lattice().origin());
    let cyl = Cylinder::q(0.0, &center, 2.0, 3.0).unwrap();
    let (lo, hi) = cyl.interval();
    let g = TimeGrid::span(lo, hi, 8).unwrap();
    let f = |c: &[i64]| 1.0 + 0.1 * c[0] as f64 - 0.05 * (c[1] * c[1]) as f64;
    let ext = ExteriorData::stationary(&env, g, f);
    let init = LatticeField::from_fn(&env, |c| 2.0 + (c[0] + c[1]) as f64 * 0.1);
    let u = solve_caloric(&env, &cyl, &init, &ext, 1e-13).unwrap();

    let ball = cyl.sites(&env);
    let m = ball.len();
    let pos = |x: usize| ball.iter().position(|&b| b == x);
    let mut a = nalgebra::DMatrix::zeros(m, m);
    let mut b = nalgebra::DVector::zeros(m);
    for (i, &x) in ball.iter().enumerate() {
        let row = env.row(x);
        for k in 0..row.len() {
            let y = row.targets[k] as usize;
            a[(i, i)] -= row.conds[k];
            match pos(y) {
                Some(j) => a[(i, j)] += row.conds[k],
                None => b[i] += row.conds[k] * f(&env.coord(row.targets[k])),
            }
        }
    }
    // u(t) = e^{tA} (u0 + A^{-1} b) - A^{-1} b
    let ainv_b = a.clone().lu().solve(&b).unwrap();
    let u0 = nalgebra::DVector::from_iterator(m, ball.iter().map(|&x| init[x]));
    for k in 0..g.len() {
        let t = g.time(k) - g.t0;
        let want = dense_expm(&a, t) * (&u0 + &ainv_b) - &ainv_b;
        for (i, &x) in ball.iter().enumerate() {
            assert!((u.slice(k)[x] - want[i]).abs() < 1e-9, "k {k}");
        }
    }
}

fn random_torus_on(lat: Lattice, seed: u64) -> Environment {
    rcm_core::environment::long_range_percolation(lat, 1.5, 4.0, seed).unwrap()
}
