//! ROF total-variation denoising by the augmented Lagrangian splitting
//! `q = grad u`:
//!
//! * `u`-step: `(lambda - r Lap) u = lambda f - div(mu) - r div(q)`,
//! * `q`-step: `q = shrink(r grad u - mu, r)`,
//! * multiplier: `mu += r (q - grad u)`.
//!
//! The model is equivariant under constant shifts of `f`, so the solver runs
//! on `f - mean(f)` and adds the mean back; this makes
//! `tv_denoise(f + c) = tv_denoise(f) + c` hold to rounding.

use std::time::Instant;

use crate::config::SolverConfig;
use crate::error::{FringeError, Result};
use crate::field::{div, grad, relative_change, soft_threshold, ScalarField, VectorField};
use crate::linsolve::{cg_solve, LinSolveConfig, ScreenedPoissonOperator};
use crate::model::smoothed_tv;
use crate::report::{IterationRecord, Method, RunReport};

#[derive(Debug, Clone, PartialEq)]
pub struct TvDenoiseState {
    pub u: ScalarField,
    pub q: VectorField,
    pub mu: VectorField,
    pub iteration: usize,
}

impl TvDenoiseState {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: ScalarField::zeros(width, height),
            q: VectorField::zeros(width, height),
            mu: VectorField::zeros(width, height),
            iteration: 0,
        }
    }

    /// Augmented Lagrangian
    /// `(lambda/2)|u - f|^2 + |q| + mu.(q - grad u) + (r/2)|q - grad u|^2`, summed.
    pub fn lagrangian(&self, f: &ScalarField, lambda: f64, r: f64) -> Result<f64> {
        let g = grad(&self.u);
        let gap = self.q.add_scaled(-1.0, &g)?;
        let data = 0.5 * lambda * self.u.zip_map(f, |u, f| (u - f) * (u - f))?.values().iter().sum::<f64>();
        let tv = self.q.magnitude().values().iter().sum::<f64>();
        Ok(data + tv + self.mu.dot(&gap)? + 0.5 * r * gap.norm().powi(2))
    }

    /// `||q - grad u|| / max(||grad u||, 1e-12)`.
    pub fn constraint_residual(&self) -> f64 {
        let g = grad(&self.u);
        self.q.distance(&g).expect("same shape") / g.norm().max(1e-12)
    }
}

/// Solves `(lambda - r Lap) u = lambda f - div(mu) - r div(q)`.
pub fn solve_u_subproblem(
    f: &ScalarField,
    q: &VectorField,
    mu: &VectorField,
    lambda: f64,
    r: f64,
    x0: &ScalarField,
    linsolve: &LinSolveConfig,
) -> Result<ScalarField> {
    let penalty = div(&mu.add_scaled(r, q)?);
    let rhs = f.zip_map(&penalty, |f, p| lambda * f - p)?;
    let op = ScreenedPoissonOperator::new(ScalarField::filled(f.width(), f.height(), lambda), r)?;
    Ok(cg_solve(&op, &rhs, x0, linsolve)?.solution)
}

/// Denoises `f` using `cfg.lambda`, `cfg.r`, `cfg.eps`, `cfg.max_outer_iters`
/// and `cfg.linsolve`. Hitting the iteration cap returns the last iterate
/// with `report.converged == false`.
pub fn tv_denoise(f: &ScalarField, cfg: &SolverConfig) -> Result<(ScalarField, RunReport)> {
    tv_denoise_with_truth(f, cfg, None)
}

/// As [`tv_denoise`], recording `Q(u, truth)` per iteration.
pub fn tv_denoise_with_truth(
    f: &ScalarField,
    cfg: &SolverConfig,
    truth: Option<&ScalarField>,
) -> Result<(ScalarField, RunReport)> {
    let (state, report, mean) = run(f, cfg, truth)?;
    Ok((state.u.map(|v| v + mean), report))
}

/// Runs the iteration on the centred input and returns the final state
/// (still centred), the trace and the removed mean.
pub(crate) fn run(
    f: &ScalarField,
    cfg: &SolverConfig,
    truth: Option<&ScalarField>,
) -> Result<(TvDenoiseState, RunReport, f64)> {
    cfg.validate()?;
    if let Some(t) = truth {
        f.check_shape(t)?;
    }
    if !f.is_finite() {
        return Err(FringeError::InvalidConfig("input image is not finite".into()));
    }
    let mean = f.mean();
    let centred = f.map(|v| v - mean);
    let started = Instant::now();
    let mut report = RunReport::new(Method::TvDenoise);
    let mut state = TvDenoiseState::zeros(f.width(), f.height());
    while state.iteration < cfg.max_outer_iters {
        let outer = state.iteration + 1;
        let u = solve_u_subproblem(&centred, &state.q, &state.mu, cfg.lambda, cfg.r, &state.u, &cfg.linsolve)
            .map_err(|source| FringeError::Solve {
                solve: "u",
                outer,
                source: Box::new(source),
            })?;
        let rel = relative_change(&u, &state.u)?;
        let g = grad(&u);
        let w = state.mu.scaled(-1.0).add_scaled(cfg.r, &g)?;
        let q = soft_threshold(&w, cfg.r);
        let mu = state.mu.add_scaled_difference(cfg.r, &q, &g)?;
        state = TvDenoiseState {
            u,
            q,
            mu,
            iteration: outer,
        };
        let data = 0.5 * cfg.lambda * state.u.zip_map(&centred, |u, f| (u - f) * (u - f))?.values().iter().sum::<f64>();
        report.records.push(IterationRecord {
            iter: outer,
            rel_change: [Some(rel), None, None],
            energy: data + smoothed_tv(&state.u, cfg.report_beta),
            constraint_residual: Some([state.constraint_residual(), f64::NAN, f64::NAN]),
            multiplier_norm: Some([state.mu.norm(), f64::NAN, f64::NAN]),
            q_err: truth.and_then(|t| crate::synth::q_error(&state.u.map(|v| v + mean), t).ok()),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if rel <= cfg.eps {
            report.converged = true;
            break;
        }
    }
    Ok((state, report, mean))
}
