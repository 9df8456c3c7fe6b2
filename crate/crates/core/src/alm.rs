//! Augmented Lagrangian demodulation.
//!
//! Each of `phi`, `b`, `a` gets a splitting variable `q_d = grad d` and a
//! multiplier `mu_d`. One outer iteration performs
//!
//! 1. a primal step: three screened Poisson solves
//!    `(c_d - r Lap) d^{k+1} = f_d - div(mu_d^k) - r div(q_d^k)`, with the data
//!    coefficients `c_d` and right-hand sides `f_d` of the linearized fringe
//!    model. With [`Sweep::GaussSeidel`] each solve sees the unknowns already
//!    updated in this iteration; with [`Sweep::Jacobi`] all of them come from
//!    iteration `k`;
//! 2. a shrinkage step `q_d = shrink(r grad d^{k+1} - mu_d^k, r)`;
//! 3. the multiplier ascent `mu_d += r (q_d - grad d^{k+1})`.
//!
//! Iteration stops when the relative change of every unknown is at most `eps`.

use std::time::Instant;

use crate::config::{SolverConfig, Sweep};
use crate::error::{FringeError, Result};
use crate::field::{div, grad, relative_change, soft_threshold, ScalarField, VectorField};
use crate::linsolve::{cg_solve, ScreenedPoissonOperator};
use crate::model::{energy, linearized_data_system, FringeEstimate, Unknown};
use crate::report::{IterationRecord, Method, RunReport};
use crate::synth::q_error;

/// Full iterate of the augmented Lagrangian scheme. Arrays are ordered
/// `(phi, b, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmState {
    pub estimate: FringeEstimate,
    pub q: [VectorField; 3],
    pub mu: [VectorField; 3],
    pub iteration: usize,
}

impl AlmState {
    /// All-zero start.
    pub fn zeros(width: usize, height: usize) -> Self {
        let z = || VectorField::zeros(width, height);
        Self {
            estimate: FringeEstimate::zeros(width, height),
            q: [z(), z(), z()],
            mu: [z(), z(), z()],
            iteration: 0,
        }
    }

    fn unknowns(&self) -> [&ScalarField; 3] {
        [&self.estimate.phi, &self.estimate.b, &self.estimate.a]
    }

    /// `||q_d - grad d|| / max(||grad d||, 1e-12)` per unknown.
    pub fn constraint_residuals(&self) -> [f64; 3] {
        let d = self.unknowns();
        std::array::from_fn(|k| {
            let g = grad(d[k]);
            let num = self.q[k].distance(&g).expect("state fields share a shape");
            num / g.norm().max(1e-12)
        })
    }

    pub fn multiplier_norms(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.mu[k].norm())
    }
}

/// Primal update: the three linear solves, each warm-started from the
/// current iterate.
pub fn alm_primal_step(
    state: &AlmState,
    g: &ScalarField,
    omega: &ScalarField,
    cfg: &SolverConfig,
) -> Result<FringeEstimate> {
    g.check_shape(omega)?;
    g.check_shape(&state.estimate.phi)?;
    let outer = state.iteration + 1;
    let mut next = state.estimate.clone();
    for unknown in Unknown::ALL {
        let source = match cfg.sweep {
            Sweep::Jacobi => &state.estimate,
            Sweep::GaussSeidel => &next,
        };
        let k = unknown.index();
        let wrap = |source| FringeError::Solve {
            solve: unknown.name(),
            outer,
            source: Box::new(source),
        };
        let system = linearized_data_system(source, g, omega, cfg.lambda, unknown)?;
        // rhs = f_d - div(mu_d + r q_d)
        let penalty = div(&state.mu[k].add_scaled(cfg.r, &state.q[k])?);
        let rhs = system.rhs.zip_map(&penalty, |f, p| f - p)?;
        let op = ScreenedPoissonOperator::new(system.coeff, cfg.r).map_err(wrap)?;
        let out = cg_solve(&op, &rhs, unknown.of(&state.estimate), &cfg.linsolve).map_err(wrap)?;
        *unknown.of_mut(&mut next) = out.solution;
    }
    Ok(next)
}

/// Shrinkage `q_d = shrink(r grad d - mu_d, r)`; expects `state.estimate` to
/// already hold the new primal iterate.
pub fn alm_shrink_step(state: &AlmState, cfg: &SolverConfig) -> [VectorField; 3] {
    let d = state.unknowns();
    std::array::from_fn(|k| {
        let g = grad(d[k]);
        let w = state.mu[k]
            .scaled(-1.0)
            .add_scaled(cfg.r, &g)
            .expect("state fields share a shape");
        soft_threshold(&w, cfg.r)
    })
}

/// Multiplier ascent `mu_d + r (q_d - grad d)`.
pub fn alm_multiplier_update(state: &AlmState, cfg: &SolverConfig) -> [VectorField; 3] {
    let d = state.unknowns();
    std::array::from_fn(|k| {
        state.mu[k]
            .add_scaled_difference(cfg.r, &state.q[k], &grad(d[k]))
            .expect("state fields share a shape")
    })
}

/// Iterative solver owning its state; [`alm_demodulate`] drives it to
/// convergence.
#[derive(Debug, Clone)]
pub struct AlmSolver<'a> {
    g: &'a ScalarField,
    omega: &'a ScalarField,
    truth: Option<&'a ScalarField>,
    cfg: SolverConfig,
    state: AlmState,
    report: RunReport,
    started: Instant,
}

impl<'a> AlmSolver<'a> {
    pub fn new(
        g: &'a ScalarField,
        omega: &'a ScalarField,
        truth: Option<&'a ScalarField>,
        cfg: SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        g.check_shape(omega)?;
        if let Some(t) = truth {
            g.check_shape(t)?;
        }
        Ok(Self {
            g,
            omega,
            truth,
            cfg,
            state: AlmState::zeros(g.width(), g.height()),
            report: RunReport::new(Method::Alm),
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &AlmState {
        &self.state
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    /// Runs one outer iteration and returns whether the stopping rule holds.
    pub fn step(&mut self) -> Result<bool> {
        let next = alm_primal_step(&self.state, self.g, self.omega, &self.cfg)?;
        let prev = std::mem::replace(&mut self.state.estimate, next);
        self.state.q = alm_shrink_step(&self.state, &self.cfg);
        self.state.mu = alm_multiplier_update(&self.state, &self.cfg);
        self.state.iteration += 1;

        let est = &self.state.estimate;
        let rel = [
            relative_change(&est.phi, &prev.phi)?,
            relative_change(&est.b, &prev.b)?,
            relative_change(&est.a, &prev.a)?,
        ];
        let q_err = match self.truth {
            Some(t) => q_error(&est.phi, t).ok(),
            None => None,
        };
        self.report.records.push(IterationRecord {
            iter: self.state.iteration,
            rel_change: rel.map(Some),
            energy: energy(est, self.g, self.omega, self.cfg.lambda, self.cfg.report_beta)?,
            constraint_residual: Some(self.state.constraint_residuals()),
            multiplier_norm: Some(self.state.multiplier_norms()),
            q_err,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
        Ok(rel.iter().all(|&c| c <= self.cfg.eps))
    }

    pub fn run(mut self) -> Result<(AlmState, RunReport)> {
        self.started = Instant::now();
        while self.state.iteration < self.cfg.max_outer_iters {
            if self.step()? {
                self.report.converged = true;
                break;
            }
        }
        Ok((self.state, self.report))
    }
}

/// Demodulates `g` given the carrier `omega`, starting from the all-zero
/// state. `truth`, when given, is only used to record `Q` per iteration.
pub fn alm_demodulate(
    g: &ScalarField,
    omega: &ScalarField,
    cfg: &SolverConfig,
    truth: Option<&ScalarField>,
) -> Result<(FringeEstimate, RunReport)> {
    let (state, report) = AlmSolver::new(g, omega, truth, *cfg)?.run()?;
    Ok((state.estimate, report))
}
