use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::origin_ball;
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::serde_ext;
use crate::Environment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub radius: f64,
    pub base: f64,
    /// `rho_k = base^{-k} R`.
    pub radii: Vec<f64>,
    /// `max - min` of `u` over `[-rho_k^2/2, rho_k^2/2] x B_{rho_k}`.
    pub oscillations: Vec<f64>,
    /// `-slope / ln(base)` of the least-squares fit of `ln osc_k` on `k`;
    /// absent when fewer than two oscillations are positive.
    #[serde(with = "serde_ext::opt")]
    pub beta: Option<f64>,
    pub nonincreasing: bool,
    pub notes: Vec<String>,
}

/// Oscillation decay of `u` on the nested cylinders `Q(base^{-k} R)`,
/// `k = 0, 1, ...` while `base^{-k} R > 2`.
pub fn holder_report(env: &Environment, u: &SpaceTimeField, radius: f64, base: f64) -> Result<HolderReport> {
    u.check(env)?;
    if !(base > 1.0) {
        return Err(Error::param("shrink_base", "must exceed 1"));
    }
    if !(radius > 2.0) {
        return Err(Error::param("R", "radius must exceed 2"));
    }
    let grid = *u.grid();
    let half = radius * radius / 2.0;
    if !grid.covers(-half, half) {
        return Err(Error::pre(format!(
            "field on [{}, {}] does not cover [-R^2/2, R^2/2]",
            grid.t0,
            grid.end()
        )));
    }
    let mut radii = Vec::new();
    let mut oscillations = Vec::new();
    let mut notes = Vec::new();
    let mut rho = radius;
    while rho > 2.0 {
        let (_, ball) = origin_ball(env, rho)?;
        let h = rho * rho / 2.0;
        let Some((k0, k1)) = grid.window(-h, h) else {
            notes.push(format!("no grid time within [-{h}, {h}]; stopped at rho = {rho}"));
            break;
        };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in k0..=k1 {
            for &x in &ball {
                let v = u.slice(k)[x];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        radii.push(rho);
        oscillations.push(hi - lo);
        rho /= base;
    }
    let pts: Vec<(f64, f64)> = oscillations
        .iter()
        .enumerate()
        .filter(|(_, &o)| o > 0.0)
        .map(|(k, &o)| (k as f64, libm::log(o)))
        .collect();
    let beta = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(-(sxy / sxx) / libm::log(base))
    } else {
        notes.push("fewer than two positive oscillations: exponent undefined".into());
        None
    };
    Ok(HolderReport {
        radius,
        base,
        nonincreasing: oscillations.windows(2).all(|w| w[1] <= w[0]),
        radii,
        oscillations,
        beta,
        notes,
    })
}
