//! Linearly alignable representations for optimal-transport domain adaptation.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical core:
//!
//! * [`linalg`]: a small dense row-major matrix type and a symmetric eigensolver.
//! * [`gaussian_ot`]: Gaussian sufficient statistics, Bures-Wasserstein distance
//!   and the closed-form linear Monge map.
//! * [`discrete_ot`]: exact (network simplex) and entropic (log-domain Sinkhorn)
//!   Kantorovich solvers plus the barycentric mapping.
//! * [`nn`]: one-hidden-layer ReLU networks with analytic gradients and Adam.
//! * [`laot`]: the coupled autoencoder training loop.
//! * [`evaluation`]: kNN transfer evaluation, baselines, reverse validation and
//!   the worst-case bound diagnostic.
//!
//! File formats, the experiment runner and timing live in the `laot` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod discrete_ot;
pub mod error;
pub mod evaluation;
pub mod gaussian_ot;
pub mod laot;
pub mod linalg;
mod math;
pub mod rng;
pub mod nn;

pub use error::{Error, Result};
pub use linalg::Matrix;
