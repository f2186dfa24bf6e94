//! Numerical machinery for scalar conservation laws driven by transport and
//! affine-linear noise along geometric p-rough paths (p in [1,3)).
//!
//! The pipeline is:
//! 1. [`roughpath`] — canonical level-2 lifts of piecewise-linear drivers with
//!    p-variation / Hölder metrics,
//! 2. [`flows`] — flows of volume-preserving diffeomorphisms with Jacobians,
//!    inverse flows and the scalar/affine data mu, rho,
//! 3. [`transform`] — the robust transformed flux and the change of unknown
//!    between u-space and v-space,
//! 4. [`fvsolver`] — a monotone local Lax–Friedrichs finite-volume scheme with
//!    discrete norms and the Kruzkov entropy-residual audit,
//! 5. [`estimates`] — stability constants and machine-checkable evaluations of
//!    the quantitative L-infinity / TV / L1-local bounds.
//!
//! The crate is `no_std`-compatible (with `alloc`); all IO, configuration and
//! the experiment harness live in the companion `rclaw` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// Index-coupled loops over flat multi-dimensional buffers are the dominant
// idiom here; iterator rewrites obscure the stencil arithmetic.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod estimates;
pub mod flows;
pub mod fvsolver;
pub mod math;
pub mod transform;

pub mod roughpath;

mod error;

pub use error::CoreError;
