mod common;

use common::{dense_generator, random_torus, to_vec};
use rcm_core::corrector::{corrected_energy, diffusion_matrix, drift, solve_corrector};

#[test]
fn matches_pseudo_inverse_after_gauge() {
    for seed in 0..6u64 {
        let env = random_torus(4, 100 + seed);
        let neg_l = -dense_generator(&env);
        let pinv = neg_l.clone().pseudo_inverse(1e-12).unwrap();
        let chi = solve_corrector(&env, 1e-13, 10_000).unwrap();
        let g = chi.gauge_site;
        for i in 0..2 {
            let want = &pinv * to_vec(&drift(&env, i));
            let shift = want[g];
            for x in 0..env.num_sites() {
                assert!(
                    (chi.chi[i][x] - (want[x] - shift)).abs() < 1e-9,
                    "seed {seed} i {i} x {x}"
                );
            }
        }
    }
}

#[test]
fn corrector_minimizes_corrected_energy() {
    let env = random_torus(6, 3);
    let chi = solve_corrector(&env, 1e-12, 10_000).unwrap();
    let m = diffusion_matrix(&env, &chi).unwrap();
    let n = env.num_sites() as f64;
    for i in 0..2 {
        let e0 = corrected_energy(&env, i, &chi.chi[i]);
        assert!((e0 / n - m.get(i, i)).abs() < 1e-10);
        for bump in 0..env.num_sites() {
            let mut psi = chi.chi[i].clone();
            psi[bump] += 1e-2;
            assert!(corrected_energy(&env, i, &psi) >= e0);
        }
    }
    // homogenized matrix never exceeds the mean of sum_z C z z^T
    let raw: f64 = (0..env.num_sites())
        .map(|x| {
            let r = env.row(x);
            (0..r.len())
                .map(|k| r.disp(k)[0] as f64 * r.disp(k)[0] as f64 * r.conds[k])
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    assert!(m.get(0, 0) <= raw + 1e-12);
}
