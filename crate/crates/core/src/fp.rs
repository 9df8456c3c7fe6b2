//! Lagged-diffusivity fixed-point demodulation, the baseline solver.
//!
//! Every iteration freezes the TV weight `1/sqrt(|grad d^k|^2 + beta)` and
//! the linearized data terms at iteration `k`, then solves
//! `(c_d - div(w_d grad)) d^{k+1} = f_d` for `d = phi, b, a` in that order.

use std::time::Instant;

use crate::config::{SolverConfig, Sweep};
use crate::error::{FringeError, Result};
use crate::field::{grad, magnitude_smoothed, relative_change, ScalarField};
use crate::linsolve::{cg_solve, ScreenedPoissonOperator};
use crate::model::{energy, linearized_data_system, FringeEstimate, Unknown};
use crate::report::{IterationRecord, Method, RunReport};
use crate::synth::q_error;

#[derive(Debug, Clone, PartialEq)]
pub struct FpState {
    pub estimate: FringeEstimate,
    /// `omega + phi` of the current estimate.
    pub psi: ScalarField,
    pub iteration: usize,
}

impl FpState {
    pub fn zeros(omega: &ScalarField) -> Self {
        Self {
            estimate: FringeEstimate::zeros(omega.width(), omega.height()),
            psi: omega.clone(),
            iteration: 0,
        }
    }
}

/// Lagged TV weight `1 / sqrt(|grad d|^2 + beta)`.
pub fn lagged_diffusivity(d: &ScalarField, beta: f64) -> ScalarField {
    magnitude_smoothed(&grad(d), beta).map(|m| 1.0 / m)
}

/// One pass over `phi`, `b`, `a`. Lagged weights always come from iteration
/// `k`; the data terms follow `cfg.sweep`.
pub fn fp_step(
    state: &FpState,
    g: &ScalarField,
    omega: &ScalarField,
    cfg: &SolverConfig,
) -> Result<FpState> {
    g.check_shape(omega)?;
    g.check_shape(&state.estimate.phi)?;
    let outer = state.iteration + 1;
    let mut next = state.estimate.clone();
    for unknown in Unknown::ALL {
        let source = match cfg.sweep {
            Sweep::Jacobi => &state.estimate,
            Sweep::GaussSeidel => &next,
        };
        let wrap = |source| FringeError::Solve {
            solve: unknown.name(),
            outer,
            source: Box::new(source),
        };
        let system = linearized_data_system(source, g, omega, cfg.lambda, unknown)?;
        let current = unknown.of(&state.estimate);
        let op = ScreenedPoissonOperator::new(system.coeff, 1.0)
            .and_then(|op| op.with_diffusivity(lagged_diffusivity(current, cfg.beta)))
            .map_err(wrap)?;
        let out = cg_solve(&op, &system.rhs, current, &cfg.linsolve).map_err(wrap)?;
        *unknown.of_mut(&mut next) = out.solution;
    }
    Ok(FpState {
        psi: next.psi(omega)?,
        estimate: next,
        iteration: outer,
    })
}

/// Demodulates `g` with the fixed-point scheme from the all-zero start.
pub fn fp_demodulate(
    g: &ScalarField,
    omega: &ScalarField,
    cfg: &SolverConfig,
    truth: Option<&ScalarField>,
) -> Result<(FringeEstimate, RunReport)> {
    cfg.validate()?;
    g.check_shape(omega)?;
    if let Some(t) = truth {
        g.check_shape(t)?;
    }
    let started = Instant::now();
    let mut report = RunReport::new(Method::FixedPoint);
    let mut state = FpState::zeros(omega);
    while state.iteration < cfg.max_outer_iters {
        let next = fp_step(&state, g, omega, cfg)?;
        let (e, p) = (&next.estimate, &state.estimate);
        let rel = [
            relative_change(&e.phi, &p.phi)?,
            relative_change(&e.b, &p.b)?,
            relative_change(&e.a, &p.a)?,
        ];
        report.records.push(IterationRecord {
            iter: next.iteration,
            rel_change: rel.map(Some),
            energy: energy(e, g, omega, cfg.lambda, cfg.beta)?,
            constraint_residual: None,
            multiplier_norm: None,
            q_err: truth.and_then(|t| q_error(&e.phi, t).ok()),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        state = next;
        if rel.iter().all(|&c| c <= cfg.eps) {
            report.converged = true;
            break;
        }
    }
    Ok((state.estimate, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::div;
    use crate::linsolve::LinSolveConfig;
    use crate::model::data_gradient;
    use crate::synth::{synthesize, SyntheticSpec};

    #[test]
    fn single_pixel_reduces_to_pointwise_least_squares() {
        let g = ScalarField::filled(1, 1, 0.8);
        let omega = ScalarField::filled(1, 1, 0.3);
        let (est, report) = fp_demodulate(&g, &omega, &SolverConfig::default(), None).unwrap();
        assert!(report.converged);
        assert_eq!(est.phi.get(0, 0), 0.0);
        assert!(est.data_residual(&g, &omega).unwrap() <= 1e-6);
    }

    #[test]
    fn zero_modulation_leaves_the_phase_at_zero() {
        let truth = synthesize(&SyntheticSpec::canonical(16, 12)).unwrap();
        let state = FpState::zeros(&truth.omega);
        let next = fp_step(&state, &truth.g, &truth.omega, &SolverConfig::default()).unwrap();
        assert!(next.estimate.phi.values().iter().all(|&v| v == 0.0));
        assert_eq!(next.psi, truth.omega);
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn psi_tracks_the_phase() {
        let truth = synthesize(&SyntheticSpec::canonical(16, 12)).unwrap();
        let cfg = SolverConfig::default();
        let mut state = FpState::zeros(&truth.omega);
        for _ in 0..3 {
            state = fp_step(&state, &truth.g, &truth.omega, &cfg).unwrap();
        }
        let expected = state.estimate.psi(&truth.omega).unwrap();
        for (x, y) in state.psi.values().iter().zip(expected.values()) {
            assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn energy_decreases_over_ten_step_windows() {
        let truth = synthesize(&SyntheticSpec::canonical(48, 36)).unwrap();
        let cfg = SolverConfig::default();
        let (_, report) = fp_demodulate(&truth.g, &truth.omega, &cfg, Some(&truth.phi)).unwrap();
        assert!(report.converged);
        let e: Vec<f64> = report.records.iter().map(|r| r.energy).collect();
        for k in 10..e.len() {
            assert!(e[k] <= e[k - 10] * (1.0 + 1e-8), "window ending at {k}");
        }
    }

    #[test]
    fn euler_lagrange_residual_is_small_at_convergence() {
        let truth = synthesize(&SyntheticSpec::canonical(40, 30)).unwrap();
        let cfg = SolverConfig {
            linsolve: LinSolveConfig { rel_residual_tol: 1e-10, max_inner_iters: 2000, ..Default::default() },
            ..Default::default()
        };
        let (est, report) = fp_demodulate(&truth.g, &truth.omega, &cfg, None).unwrap();
        assert!(report.converged);
        let data = data_gradient(&est, &truth.g, &truth.omega, cfg.lambda).unwrap();
        for (k, d) in [&est.phi, &est.b, &est.a].into_iter().enumerate() {
            let gd = grad(d);
            let w = magnitude_smoothed(&gd, cfg.beta);
            let flux = crate::field::VectorField::from_planes(
                d.width(),
                d.height(),
                gd.xs().iter().zip(w.values()).map(|(x, m)| x / m).collect(),
                gd.ys().iter().zip(w.values()).map(|(y, m)| y / m).collect(),
            )
            .unwrap();
            let tv = div(&flux);
            let el = data[k].zip_map(&tv, |a, b| a - b).unwrap();
            let rel = el.norm() / (data[k].norm() + tv.norm());
            assert!(rel <= 10.0 * cfg.eps, "equation {k}: {rel}");
        }
    }

    #[test]
    fn constant_carrier_offset_moves_into_the_phase() {
        let truth = synthesize(&SyntheticSpec::canonical(32, 24)).unwrap();
        let cfg = SolverConfig::default();
        let (est, _) = fp_demodulate(&truth.g, &truth.omega, &cfg, None).unwrap();
        let c = 0.37;
        let shifted_omega = truth.omega.map(|o| o + c);
        let shifted_phi = est.phi.map(|p| p - c);
        let moved = FringeEstimate { phi: shifted_phi, b: est.b.clone(), a: est.a.clone() };
        let r0 = est.data_residual(&truth.g, &truth.omega).unwrap();
        let r1 = moved.data_residual(&truth.g, &shifted_omega).unwrap();
        assert!((r0 - r1).abs() <= 1e-6);
    }

    #[test]
    fn small_benchmark_recovers_the_phase() {
        let truth = synthesize(&SyntheticSpec::canonical(48, 36)).unwrap();
        let (_, report) = fp_demodulate(&truth.g, &truth.omega, &SolverConfig::default(), Some(&truth.phi)).unwrap();
        assert!(report.converged);
        assert!(report.records.iter().all(|r| r.constraint_residual.is_none()));
        assert!(report.final_q().unwrap() <= 0.2);
    }

    #[test]
    fn steps_are_deterministic() {
        let truth = synthesize(&SyntheticSpec::canonical(16, 12)).unwrap();
        let cfg = SolverConfig::default();
        let s0 = FpState::zeros(&truth.omega);
        let a = fp_step(&fp_step(&s0, &truth.g, &truth.omega, &cfg).unwrap(), &truth.g, &truth.omega, &cfg).unwrap();
        let b = fp_step(&fp_step(&s0, &truth.g, &truth.omega, &cfg).unwrap(), &truth.g, &truth.omega, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
