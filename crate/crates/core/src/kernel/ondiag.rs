use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::serde_ext;
use crate::Environment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnDiagEntry {
    pub t: f64,
    pub radius: f64,
    /// `sup_{B_radius} p(t, 0, .)`, absent when `t` was excluded.
    #[serde(with = "serde_ext::opt")]
    pub sup: Option<f64>,
    /// `t^{d/2} sup`, the rescaled on-diagonal value.
    #[serde(with = "serde_ext::opt")]
    pub scaled: Option<f64>,
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnDiagReport {
    pub entries: Vec<OnDiagEntry>,
    #[serde(with = "serde_ext::opt")]
    pub max: Option<f64>,
    #[serde(with = "serde_ext::opt")]
    pub min: Option<f64>,
    #[serde(with = "serde_ext::opt")]
    pub ratio: Option<f64>,
    pub factor: f64,
    pub tol: f64,
    pub bounded: bool,
}

/// `S(t) = t^{d/2} sup_{|x| <= sqrt(t)/4} p(t, 0, x)` over a grid of times.
///
/// Times whose ball exceeds the inscribed radius of the lattice are excluded
/// and flagged. The verdict is `bounded` when `max S / min S <= factor` over
/// the remaining times.
pub fn ondiag_check(env: &Environment, times: &[f64], tol: f64, factor: f64) -> Result<OnDiagReport> {
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::param("t", "on-diagonal times must be positive"));
    }
    if !(factor >= 1.0) {
        return Err(Error::param("factor", "must be at least 1"));
    }
    let lat = env.lattice();
    let inscribed = lat.inscribed_radius();
    let o = lat.origin();
    let origin = lat.coord(o);
    let kept: Vec<f64> = times
        .iter()
        .copied()
        .filter(|t| libm::sqrt(*t) / 4.0 <= inscribed)
        .collect();
    let fields = super::propagate(env, &LatticeField::delta(env.num_sites(), o), &kept, tol)?;
    let d = env.dim() as f64;
    let mut it = fields.iter();
    let entries: Vec<OnDiagEntry> = times
        .iter()
        .map(|&t| {
            let radius = libm::sqrt(t) / 4.0;
            if radius > inscribed {
                return OnDiagEntry {
                    t,
                    radius,
                    sup: None,
                    scaled: None,
                    excluded: true,
                };
            }
            let p = it.next().expect("one field per kept time");
            let sup = lat
                .ball(&origin, radius)
                .into_iter()
                .map(|x| p[x])
                .fold(f64::NEG_INFINITY, f64::max);
            OnDiagEntry {
                t,
                radius,
                sup: Some(sup),
                scaled: Some(libm::pow(t, d / 2.0) * sup),
                excluded: false,
            }
        })
        .collect();
    let vals: Vec<f64> = entries.iter().filter_map(|e| e.scaled).collect();
    let (max, min) = if vals.is_empty() {
        (None, None)
    } else {
        (
            Some(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Some(vals.iter().copied().fold(f64::INFINITY, f64::min)),
        )
    };
    let ratio = match (max, min) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        (Some(_), Some(_)) => Some(f64::INFINITY),
        _ => None,
    };
    Ok(OnDiagReport {
        entries,
        max,
        min,
        ratio,
        factor,
        tol,
        bounded: ratio.is_some_and(|r| r <= factor),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Lattice;

    #[test]
    fn constant_env_is_bounded_and_flags_large_times() {
        let env = Environment::nearest_neighbour(Lattice::torus(2, 40).unwrap(), 1.0).unwrap();
        let r = ondiag_check(&env, &[4.0, 16.0, 64.0, 1e5], 1e-10, 3.0).unwrap();
        assert!(r.bounded);
        assert!(r.entries[3].excluded);
        // S(t) approaches 1/(4 pi) for M = 2I
        let s = r.entries[2].scaled.unwrap();
        assert!((s - 0.25 / core::f64::consts::PI).abs() < 5e-3, "{s}");
        assert!(ondiag_check(&env, &[0.0], 1e-10, 3.0).is_err());
    }
}
