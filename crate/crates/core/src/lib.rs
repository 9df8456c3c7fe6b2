//! Phase demodulation of a single fringe pattern `g = a + b cos(omega + phi)`
//! with total-variation regularization of `phi`, `a` and `b`.
//!
//! Two solvers are provided: an augmented Lagrangian scheme ([`alm`]) that
//! splits each gradient into an auxiliary field handled by shrinkage, and
//! the lagged-diffusivity fixed-point baseline ([`fp`]). [`denoise`] holds the
//! same splitting applied to plain ROF denoising.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod alm;
pub mod config;
pub mod denoise;
pub mod error;
pub mod field;
pub mod fp;
pub mod io;
pub mod linsolve;
pub mod model;
pub mod report;
pub mod synth;

pub use alm::{alm_demodulate, AlmSolver, AlmState};
pub use config::SolverConfig;
pub use denoise::{tv_denoise, TvDenoiseState};
pub use error::{FringeError, Result};
pub use field::{ScalarField, VectorField};
pub use fp::fp_demodulate;
pub use linsolve::{cg_solve, LinSolveConfig, ScreenedPoissonOperator};
pub use model::FringeEstimate;
pub use report::{IterationRecord, Method, RunReport};
pub use synth::{eval_fringe, q_error, synthesize, GroundTruth, SyntheticSpec};
