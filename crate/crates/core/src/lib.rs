//! Numerical workbench for random conductance models with long-range jumps.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core: environment generation, the variable speed random walk, heat kernels
//! by uniformization, the periodized corrector and diffusion matrix, audits of
//! the functional inequalities, and the local limit theorem error. File
//! formats, the experiment runner and the command line live in `rcm-lab`.
//!
//! Sites of an [`Environment`] are addressed by their index in the underlying
//! [`Lattice`]; coordinates are only materialized at the edges of the API.
#![no_std]
// `!(x > 0.0)` style checks are how NaN gets rejected here
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corrector;
pub mod diagnostics;
pub mod environment;
mod error;
pub mod field;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod llt;
pub mod rng;
pub mod serde_ext;
pub mod walk;

pub use crate::environment::{Environment, ExponentSet, XiSpec};
pub use crate::error::{Error, Result};
pub use crate::field::{LatticeField, SpaceTimeField, TimeGrid};
pub use crate::lattice::{Boundary, Lattice};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
