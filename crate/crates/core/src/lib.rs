//! Simulation and verification toolkit for super-linear preferential-attachment
//! growing networks (the GN process with kernel `f(x) = (x + 1)^p`, `p > 1`).
//!
//! Numerical code is generic over the [`Scalar`] type (`f32` or `f64`); the
//! `*64` aliases below fix it to `f64`, which is what the experiments use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discrete;
pub mod embed;
pub mod error;
pub mod kernel;
pub mod oracles;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod tree;

pub use error::{Error, Result};
pub use kernel::{critical_k, Kernel, TailSum};
pub use rng::ClockSource;
pub use scalar::Scalar;
pub use tree::{Label, LabelledTree, Shape};

pub type Kernel64 = kernel::Kernel<f64>;
pub type Kernel32 = kernel::Kernel<f32>;
pub type GnState64 = discrete::GnState<f64>;
pub type EmbedState64 = embed::EmbedState<f64>;
pub type TailSum64 = kernel::TailSum<f64>;
