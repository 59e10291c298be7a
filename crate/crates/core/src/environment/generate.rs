//! The two conductance families: long-range percolation and polynomially
//! decaying conductances with i.i.d. weights.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EnvMeta, Environment, EnvironmentBuilder, Model};
use crate::error::{Error, Result};
use crate::lattice::{half_space_offsets, norm, norm2, Lattice};
use crate::rng::{Domain, Stream, StreamFactory};

/// Long-range conductances below this value are not stored.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// Distribution of the i.i.d. weights `xi` on long bonds.
///
/// Text form (used on the command line): `const:v`, `uniform:lo:hi`,
/// `exp:rate`, `bernoulli:p:v`, `pareto:alpha:scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum XiSpec {
    Constant {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `value` with probability `p`, else 0.
    Bernoulli {
        p: f64,
        value: f64,
    },
    /// `P(xi > t) = (scale / t)^alpha` for `t >= scale`.
    Pareto {
        alpha: f64,
        scale: f64,
    },
}

impl XiSpec {
    /// Rejects parameters that are not finite or admit negative values.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        let good = match *self {
            XiSpec::Constant { value } => ok(value) && value >= 0.0,
            XiSpec::Uniform { lo, hi } => ok(lo) && ok(hi) && lo >= 0.0 && hi >= lo,
            XiSpec::Exponential { rate } => ok(rate) && rate > 0.0,
            XiSpec::Bernoulli { p, value } => ok(p) && ok(value) && (0.0..=1.0).contains(&p) && value >= 0.0,
            XiSpec::Pareto { alpha, scale } => ok(alpha) && ok(scale) && alpha > 0.0 && scale > 0.0,
        };
        if good {
            Ok(())
        } else {
            Err(Error::param(
                "xi_spec",
                format!("{self} is not a nonnegative distribution"),
            ))
        }
    }

    /// Inverse-CDF sample from a uniform `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            XiSpec::Constant { value } => value,
            XiSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            XiSpec::Exponential { rate } => -libm::log1p(-u) / rate,
            XiSpec::Bernoulli { p, value } => {
                if u < p {
                    value
                } else {
                    0.0
                }
            }
            XiSpec::Pareto { alpha, scale } => scale * libm::pow(1.0 - u, -1.0 / alpha),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            XiSpec::Constant { value } => value,
            XiSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            XiSpec::Exponential { rate } => 1.0 / rate,
            XiSpec::Bernoulli { p, value } => p * value,
            XiSpec::Pareto { alpha, scale } => {
                if alpha > 1.0 {
                    alpha * scale / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Supremum of the orders `r` with `E[xi^r] < inf`.
    pub fn moment_bound(&self) -> f64 {
        match *self {
            XiSpec::Pareto { alpha, .. } => alpha,
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for XiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            XiSpec::Constant { value } => write!(f, "const:{value}"),
            XiSpec::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            XiSpec::Exponential { rate } => write!(f, "exp:{rate}"),
            XiSpec::Bernoulli { p, value } => write!(f, "bernoulli:{p}:{value}"),
            XiSpec::Pareto { alpha, scale } => write!(f, "pareto:{alpha}:{scale}"),
        }
    }
}

impl FromStr for XiSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|p| p.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::param("xi_spec", format!("cannot parse `{s}`")))
        };
        let spec = match (parts[0], parts.len()) {
            ("const" | "constant", 2) => XiSpec::Constant { value: num(1)? },
            ("uniform", 3) => XiSpec::Uniform {
                lo: num(1)?,
                hi: num(2)?,
            },
            ("exp" | "exponential", 2) => XiSpec::Exponential { rate: num(1)? },
            ("bernoulli", 2) => XiSpec::Bernoulli { p: num(1)?, value: 1.0 },
            ("bernoulli", 3) => XiSpec::Bernoulli {
                p: num(1)?,
                value: num(2)?,
            },
            ("pareto", 3) => XiSpec::Pareto {
                alpha: num(1)?,
                scale: num(2)?,
            },
            _ => return Err(Error::param("xi_spec", format!("unknown distribution `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Long-range percolation: every unordered pair within `cutoff` is open
/// (`C = 1`) independently with probability `min(1, |x - y|^{-(d+s)})`.
///
/// Nearest-neighbour bonds are therefore always open.
pub fn long_range_percolation(lattice: Lattice, s: f64, cutoff: f64, seed: u64) -> Result<Environment> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::param("s", "long-range percolation needs s > 0"));
    }
    let d = lattice.dim() as f64;
    let meta = EnvMeta {
        model: Model::LongRangePercolation { s },
        seed: Some(seed),
    };
    generate(lattice, cutoff, seed, meta, |len, rng| {
        let prob = libm::pow(len, -(d + s));
        if prob >= 1.0 || rng.uniform() < prob {
            1.0
        } else {
            0.0
        }
    })
}

/// Polynomially decaying conductances `C = xi / |x - y|^{d+s}` with `xi = 1`
/// on nearest-neighbour bonds and i.i.d. `xi ~ xi_spec` on longer ones.
pub fn polynomial_conductance(lattice: Lattice, s: f64, xi: XiSpec, cutoff: f64, seed: u64) -> Result<Environment> {
    if !(s > 2.0 && s.is_finite()) {
        return Err(Error::param("s", "polynomial conductances need s > 2"));
    }
    xi.validate()?;
    let d = lattice.dim() as f64;
    let meta = EnvMeta {
        model: Model::Polynomial { s, xi: xi.clone() },
        seed: Some(seed),
    };
    generate(lattice, cutoff, seed, meta, |len, rng| {
        if len <= 1.0 {
            return 1.0;
        }
        let c = xi.sample(rng.uniform()) * libm::pow(len, -(d + s));
        if c > DROP_THRESHOLD {
            c
        } else {
            0.0
        }
    })
}

fn generate(
    lattice: Lattice,
    cutoff: f64,
    seed: u64,
    meta: EnvMeta,
    mut draw: impl FnMut(f64, &mut Stream) -> f64,
) -> Result<Environment> {
    let dim = lattice.dim();
    let limit = match lattice.boundary() {
        crate::Boundary::Box => {
            if lattice.half_width() < 2 {
                return Err(Error::param("L", "box half-width must be at least 2"));
            }
            2 * lattice.half_width()
        }
        crate::Boundary::Torus => {
            if lattice.side() < 3 {
                return Err(Error::param("side", "torus side must be at least 3"));
            }
            lattice.side()
        }
    };
    if !(cutoff >= 1.0) || cutoff > limit as f64 {
        return Err(Error::param("l_max", format!("jump cutoff must lie in [1, {limit}]")));
    }
    let side = lattice.side() as i64;
    let mut offsets = half_space_offsets(dim, cutoff);
    if lattice.is_torus() {
        // keep offsets with a unique minimal image
        offsets.retain(|z| z.iter().all(|&c| 2 * c.abs() < side));
    }
    let lengths: Vec<f64> = offsets.iter().map(|z| norm(z)).collect();

    // Pair keys index the box extended by the cutoff so that exit edges get
    // their own streams as well.
    let pad = libm::ceil(cutoff) as i64;
    let ext_side = if lattice.is_torus() { side } else { side + 2 * pad };
    let ext_lo = if lattice.is_torus() {
        lattice.lo()
    } else {
        lattice.lo() - pad
    };
    let mut ext_n: u64 = 1;
    for _ in 0..dim {
        ext_n = ext_n
            .checked_mul(ext_side as u64)
            .ok_or_else(|| Error::param("L", "lattice too large for pair keys"))?;
    }
    ext_n
        .checked_mul(ext_n)
        .ok_or_else(|| Error::param("L", "lattice too large for pair keys"))?;
    let ext_index = |c: &[i64]| -> u64 {
        c.iter().fold(0u64, |acc, &v| {
            let w = if lattice.is_torus() {
                (v - ext_lo).rem_euclid(side)
            } else {
                v - ext_lo
            };
            acc * ext_side as u64 + w as u64
        })
    };

    let factory = StreamFactory::new(seed, Domain::Edges);
    let mut rng = factory.stream(0);
    let mut builder = EnvironmentBuilder::new(lattice.clone()).cutoff(cutoff).meta(meta);
    let mut x = vec![0i64; dim];
    let mut y = vec![0i64; dim];
    for i in 0..lattice.num_sites() {
        lattice.coord_into(i, &mut x);
        for (z, &len) in offsets.iter().zip(&lengths) {
            for sign in [1i64, -1] {
                for k in 0..dim {
                    y[k] = x[k] + sign * z[k];
                }
                let inside = lattice.contains(&y);
                // interior pairs are visited from their lower endpoint only
                if sign < 0 && inside {
                    continue;
                }
                let (a, b) = (ext_index(&x), ext_index(&y));
                rng.reset(a.min(b) * ext_n + a.max(b));
                let c = draw(len, &mut rng);
                if c > 0.0 {
                    builder.add_edge(&x, &y, c)?;
                }
            }
        }
    }
    builder.finish()
}

/// `sum_{|z| > cutoff} E[C_{0,z}] |z|^2`, the second-moment mass removed by
/// the jump cutoff, for a family with `E[C_{0,z}] = mean_xi |z|^{-(d+s)}`.
///
/// Computed as an exact lattice sum up to a larger radius plus the integral
/// tail beyond it. Infinite when `s <= 2`.
pub fn dropped_second_moment(dim: usize, s: f64, mean_xi: f64, cutoff: f64) -> f64 {
    if !(s > 2.0) || !mean_xi.is_finite() {
        return f64::INFINITY;
    }
    let d = dim as f64;
    let outer = (4.0 * cutoff).max(cutoff + 16.0);
    let r = libm::floor(outer) as i64;
    let mut sum = 0.0;
    crate::lattice::for_each_offset(dim, r, |z| {
        let l2 = norm2(z) as f64;
        let l = libm::sqrt(l2);
        if l > cutoff && l <= outer {
            sum += l2 * libm::pow(l, -(d + s));
        }
    });
    // surface area of the unit sphere in R^d
    let omega = 2.0 * libm::pow(core::f64::consts::PI, d / 2.0) / libm::tgamma(d / 2.0);
    let tail = omega * libm::pow(outer, 2.0 - s) / (s - 2.0);
    mean_xi * (sum + tail)
}

impl Model {
    /// Text label used in reports.
    pub fn label(&self) -> String {
        match self {
            Model::Custom => "custom".to_string(),
            Model::LongRangePercolation { .. } => "lrp".to_string(),
            Model::Polynomial { .. } => "poly".to_string(),
        }
    }
}
