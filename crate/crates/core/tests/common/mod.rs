#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rcm_core::environment::polynomial_conductance;
use rcm_core::{Environment, Lattice, XiSpec};

/// Dense generator on the stored sites; exits to halo sites only enter the
/// diagonal, so on a box this is the killed generator.
pub fn dense_generator(env: &Environment) -> DMatrix<f64> {
    let n = env.num_sites();
    let mut l = DMatrix::zeros(n, n);
    for x in 0..n {
        let row = env.row(x);
        for k in 0..row.len() {
            let y = row.targets[k] as usize;
            if y < n {
                l[(x, y)] += row.conds[k];
            }
            l[(x, x)] -= row.conds[k];
        }
    }
    l
}

/// `e^{tL}` through the eigendecomposition of the symmetric generator.
pub fn dense_expm(l: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(l.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| (v * t).exp()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn to_vec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Random environment on a small torus: random long bonds and a random
/// factor on every bond.
pub fn random_torus(side: usize, seed: u64) -> Environment {
    let lat = Lattice::torus(2, side).unwrap();
    let cutoff = ((side - 1) / 2) as f64 * 1.5;
    let env = polynomial_conductance(lat, 3.0, XiSpec::Exponential { rate: 1.0 }, cutoff.max(1.0), seed).unwrap();
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    env.map_conductances(|_, _, c| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        c * (0.25 + 1.75 * (state >> 11) as f64 / (1u64 << 53) as f64)
    })
    .unwrap()
}
