//! Forward, adjoint, and inverse-source solvers for a viscoelastic membrane
//! whose damping carries a Riemann-Liouville fractional derivative in time.
//!
//! The crate is organized as
//!
//! * [`fracops`] — time grids, Grünwald-Letnikov weights, discrete
//!   fractional operators and analytic oracles;
//! * [`fem2d`] — P1 elements on a structured rectangle mesh, operator
//!   assembly, projections, sparse solves;
//! * [`solver`] — time marching of the forward problem and of the backward
//!   adjoint problem via time reversal;
//! * [`inversion`] — Tikhonov cost, adjoint gradient, and the
//!   Polak-Ribière conjugate-gradient reconstruction loop;
//! * [`harness`] — experiment configuration, synthetic data, seeded noise,
//!   metrics and table/figure drivers behind the `fracmem` CLI;
//! * [`export`] — CSV and legacy-VTK writers for run outputs.

pub mod error;
pub mod export;
pub mod fem2d;
pub mod fracops;
pub mod harness;
pub mod inversion;
pub mod solver;

pub use error::{Error, Result};
