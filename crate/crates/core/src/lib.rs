//! Monte Carlo and analytic tools for symmetric jump processes whose jumping
//! kernel is stable-like below unit range and has a `φ`-damped
//! `r^{-(d+2)}` tail beyond it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod davies;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod heatkernel;
pub mod io;
pub mod kernel;
pub mod lil;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Exec;
pub use kernel::{JumpKernel, TailProfile};
pub use sampler::{Ensemble, PathSample, Sampler, SamplerConfig};
