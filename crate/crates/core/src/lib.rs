//! Universal Kriging with the Gibbs reference posterior on anisotropic Matérn
//! correlation lengths.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure numerics:
//! kernels, the marginalized likelihood, the conditional reference priors, the
//! random-scan Gibbs sampler, plug-in estimators, predictive distributions, the
//! existence checklist and the Monte-Carlo coverage harness. File formats, the
//! command line and thread pools live in the companion `refkrig` crate.
//!
//! Kernels follow the `2√ν` argument scaling: the one-dimensional correlation at
//! lag `t` is `(2√ν t)^ν K_ν(2√ν t) / (Γ(ν) 2^(ν-1))`. Code written for the more
//! common `√(2ν)` convention uses a lag `d` related by `d = √2 · t`, so a length
//! `θ` here corresponds to `θ / √2` there.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod error;
pub mod estimation;
pub mod existence;
pub mod gibbs;
pub mod kernels;
pub mod linalg;
pub mod linear_model;
pub mod prediction;
pub mod reference_prior;
pub mod special;

pub use error::{Error, Result};
pub use kernels::{DesignSet, KernelFamily, KernelSpec, LengthVector};
pub use linear_model::{KrigingModel, TrendBasis};
