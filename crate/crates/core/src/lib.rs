//! Numerical laboratory for the one-dimensional Euler-Poisson system with a
//! Boltzmann electron closure.
//!
//! The crate provides an implicit pseudo-spectral solver, a Lagrangian
//! characteristic solver for the pressureless model, energy and Riemann
//! diagnostics, evaluators for blow-up criteria, an ODE laboratory for the
//! comparison lemmas, and the plumbing used by the `eplab` command line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod experiments;
pub mod grid;
mod krylov;
pub mod lagrangian;
pub mod ode_lab;
pub mod output;
pub mod plotdata;
pub mod poisson;
pub mod scenario;
pub mod spline;
pub mod sweep;

pub use error::{Error, Result, StepFailureKind};
pub use eulerian::{initialize, run, run_with, step, FluidState, RunResult, Termination};
pub use grid::{Field, Grid};
pub use scenario::Scenario;
