//! Heavy-tailed sample-path large deviations on step paths.
//!
//! The crate is `no_std` (with `alloc`) and covers:
//!
//! - [`paths`]: càdlàg step paths and piecewise-linear paths, with the path
//!   functionals used throughout (running supremum, first-passage inverse,
//!   flat stretches, top-k truncation).
//! - [`metrics`]: uniform, J1 and M1′ distances between step paths plus a
//!   randomized bracketing oracle.
//! - [`rates`]: closed-form rate functions and the jump-merging minimizer.
//! - [`queueopt`]: the many-server queue concave program, its extreme-point
//!   solution and independent search oracles.
//! - [`sim`]: Weibull-tail samplers, scaled walks, compound-Poisson paths,
//!   ordered largest jumps and renewal inputs for the queue bound.
//! - [`mc`]: Monte Carlo estimates, Wilson intervals and slope fits.
//! - [`special`]: log-gamma and regularized incomplete gamma functions.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod mc;
pub mod metrics;
pub mod paths;
pub mod queueopt;
pub mod rates;
pub mod sim;
pub mod special;

mod float;

pub use metrics::{d_j1, d_m1p, d_uniform, J1Distance, MetricError};
pub use paths::{FlatStretch, Jump, PathError, PiecewisePath, StepPath};
pub use queueopt::{QueueSolution, QueueSpec, SolutionKind};
pub use rates::RateValue;
pub use sim::{RngStream, TailModel};

/// Absolute tolerance used for path equality and "distance zero" decisions.
pub const TOL: f64 = 1e-12;
