mod common;

use proptest::prelude::*;
use rcm_core::diagnostics::{lp_average, norm, NormSpec};
use rcm_core::environment::{check_assumptions, long_range_percolation, moments, tail, MomentRequest};
use rcm_core::kernel::{apply_generator_all, dirichlet_energy, propagate};
use rcm_core::{Environment, ExponentSet, Lattice, LatticeField};

fn lrp(side: usize, seed: u64) -> Environment {
    long_range_percolation(Lattice::torus(2, side).unwrap(), 2.5, 5.0, seed).unwrap()
}

fn field(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 1.0
        })
        .collect()
}

/// Every stored directed edge, brute force by coordinates.
fn all_edges(env: &Environment) -> Vec<(usize, Vec<i64>, Vec<i64>, f64)> {
    let lat = env.lattice();
    let mut out = Vec::new();
    for x in 0..env.num_sites() {
        let row = env.row(x);
        let cx = lat.coord(x);
        for k in 0..row.len() {
            let z: Vec<i64> = row.disp(k).iter().map(|&v| v as i64).collect();
            out.push((x, cx.clone(), z, row.conds[k]));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conductances_are_symmetric(seed in 0u64..1000) {
        let env = lrp(9, seed);
        let n = env.num_sites() as u32;
        for x in 0..env.num_sites() {
            prop_assert!(env.pi(x) >= 4.0);
            let row = env.row(x);
            for k in 0..row.len() {
                let y = row.targets[k];
                prop_assert!(y < n);
                prop_assert_eq!(env.conductance(y as usize, x as u32).to_bits(), row.conds[k].to_bits());
                if row.length(k) == 1.0 {
                    prop_assert_eq!(row.conds[k], 1.0);
                }
            }
        }
    }

    #[test]
    fn tail_matches_brute_force(seed in 0u64..1000, r in 0.5f64..6.0, x in 0usize..81) {
        let env = lrp(9, seed);
        let u = field(env.num_sites(), seed ^ 77);
        let lat = env.lattice();
        let mut want = 0.0;
        for (src, cx, z, c) in all_edges(&env) {
            if src != x { continue; }
            let len2: i64 = z.iter().map(|v| v * v).sum();
            if (len2 as f64) > r * r {
                let mut y: Vec<i64> = cx.iter().zip(&z).map(|(a, b)| a + b).collect();
                lat.wrap(&mut y);
                want += u[lat.index(&y).unwrap()] * c;
            }
        }
        want *= r * r;
        let got = tail(&env, &u, r, x);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn moments_match_brute_force(seed in 0u64..1000, m in 2.1f64..5.0) {
        let env = lrp(7, seed);
        let e = ExponentSet::new(2, 3.0, 2.5).unwrap();
        let prof = moments(&env, &MomentRequest { m_list: vec![m], exponents: Some(e.clone()) });
        let n = env.num_sites();
        let (mut mu, mut mum, mut nu, mut star) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (x, _, z, c) in all_edges(&env) {
            let l = (z.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
            mu[x] += l * l * c;
            mum[x] += l.powf(m) * c;
            star[x] += l.powf(e.gamma) * c.powf(e.mu_star_power());
            if l == 1.0 { nu[x] += 1.0 / c; }
        }
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        prop_assert!(close(&prof.mu, &mu));
        prop_assert!(close(&prof.mu_m[0].values, &mum));
        prop_assert!(close(&prof.nu, &nu));
        prop_assert!(close(prof.mu_star.as_ref().unwrap(), &star));
    }

    #[test]
    fn assumptions_are_monotone(p in 1.1f64..20.0, q in 1.1f64..20.0, dp in 0.0f64..10.0, dq in 0.0f64..10.0, d in 1usize..5) {
        let a = check_assumptions(&ExponentSet::new(d, p, q).unwrap());
        let b = check_assumptions(&ExponentSet::new(d, p + dp, q + dq).unwrap());
        prop_assert!(!a.qip || b.qip);
        prop_assert!(!a.llt_second || b.llt_second);
        prop_assert!(!a.sobolev || b.sobolev);
    }

    #[test]
    fn normalized_norms_increase_with_p(seed in 0u64..1000, p in 1.0f64..8.0, dp in 0.0f64..8.0) {
        let f = field(50, seed);
        let region: Vec<usize> = (0..50).collect();
        let a = norm(&f, &region, NormSpec::spatial(p).unwrap()).unwrap();
        let b = norm(&f, &region, NormSpec::spatial(p + dp).unwrap()).unwrap();
        let c = norm(&f, &region, NormSpec::spatial(f64::INFINITY).unwrap()).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
        prop_assert!(b <= c * (1.0 + 1e-12));
        prop_assert!((lp_average(f.iter().map(|v| 3.0 * v), p) - 3.0 * a).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn energy_scales_and_matches_generator(seed in 0u64..1000, a in -5.0f64..5.0) {
        let env = lrp(7, seed);
        let f = LatticeField::new(field(env.num_sites(), seed));
        let e = dirichlet_energy(&env, &f);
        prop_assert!(e >= 0.0);
        prop_assert!((dirichlet_energy(&env, &f.scaled(a)) - a * a * e).abs() <= 1e-10 * e.max(1.0) * a * a + 1e-14);
        // on a torus, E(f) = -<f, Lf>
        let lf = apply_generator_all(&env, &f);
        let pairing: f64 = f.values().iter().zip(lf.values()).map(|(a, b)| a * b).sum();
        prop_assert!((e + pairing).abs() <= 1e-10 * e.max(1.0));
    }

    #[test]
    fn semigroup_is_linear_and_positive(seed in 0u64..1000, a in -3.0f64..3.0, t in 0.0f64..4.0) {
        let env = lrp(6, seed);
        let n = env.num_sites();
        let f = LatticeField::new(field(n, seed));
        let g = LatticeField::new(field(n, seed + 1));
        let pf = propagate(&env, &f, &[t], 1e-13).unwrap().remove(0);
        let pg = propagate(&env, &g, &[t], 1e-13).unwrap().remove(0);
        let pc = propagate(&env, &f.combine(a, &g, 1.0), &[t], 1e-13).unwrap().remove(0);
        for x in 0..n {
            prop_assert!((pc[x] - (a * pf[x] + pg[x])).abs() < 1e-10);
        }
        let pos = LatticeField::new(f.values().iter().map(|v| v.abs()).collect());
        let pp = propagate(&env, &pos, &[t], 1e-13).unwrap().remove(0);
        prop_assert!(pp.values().iter().all(|&v| v >= 0.0));
        let lo = pos.values().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(pp.values().iter().all(|&v| v >= lo - 1e-12));
    }
}
