//! Multi-objective policy optimization over discrete token sequences.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure numerics:
//!
//! - [`pareto`]: dominance, Pareto fronts, exact and Monte-Carlo hypervolume.
//! - [`aggregate`]: turning batches of reward vectors into scalar training signals.
//! - [`mgda`]: the Frank-Wolfe min-norm solver behind multiple-gradient descent.
//! - [`policy`]: a small autoregressive MLP policy with an on-policy soft-Q loss.
//! - [`env`]: synthetic reward channels with conflicting objectives.
//! - [`train`]: the volume-based and MGDA training loops, plus method comparison.
//!
//! File formats, the CLI and wall-clock timing live in the `moprompt` crate.

#![no_std]
#![forbid(unsafe_code)]
// NaN must fail `!(x > 0.0)` style checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod aggregate;
pub mod env;
mod error;
pub mod mgda;
pub mod optim;
pub mod pareto;
pub mod policy;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
