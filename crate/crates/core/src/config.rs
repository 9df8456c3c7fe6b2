use crate::error::{FringeError, Result};
use crate::linsolve::LinSolveConfig;

/// How the three primal solves of one outer iteration see each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Every solve uses the iteration-`k` values of the other unknowns.
    Jacobi,
    /// Solves run in the order `phi`, `b`, `a`, each using the newest values.
    GaussSeidel,
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Jacobi => "jacobi",
            Sweep::GaussSeidel => "gauss-seidel",
        }
    }
}

/// Parameters shared by the demodulation solvers and the TV denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Data-fidelity weight.
    pub lambda: f64,
    /// Augmented Lagrangian penalty.
    pub r: f64,
    /// TV smoothing constant of the fixed-point solver.
    pub beta: f64,
    /// Relative-change stopping threshold, applied to every unknown.
    pub eps: f64,
    pub max_outer_iters: usize,
    pub sweep: Sweep,
    pub linsolve: LinSolveConfig,
    /// Smoothing used only when reporting the TV energy of an iterate.
    pub report_beta: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            r: 11.5,
            beta: 1e-3,
            eps: 1e-5,
            max_outer_iters: 20_000,
            sweep: Sweep::GaussSeidel,
            linsolve: LinSolveConfig::default(),
            report_beta: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("r", self.r),
            ("beta", self.beta),
            ("eps", self.eps),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(FringeError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.max_outer_iters == 0 {
            return Err(FringeError::InvalidConfig(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        if !(self.report_beta >= 0.0) {
            return Err(FringeError::InvalidConfig(
                "report_beta must be non-negative".into(),
            ));
        }
        self.linsolve.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_benchmark_parameters() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.r, 11.5);
        assert_eq!(cfg.beta, 1e-3);
        assert_eq!(cfg.eps, 1e-5);
        assert_eq!(cfg.lambda, 10.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_parameters() {
        for bad in [
            SolverConfig { lambda: 0.0, ..Default::default() },
            SolverConfig { r: -1.0, ..Default::default() },
            SolverConfig { beta: 0.0, ..Default::default() },
            SolverConfig { eps: f64::NAN, ..Default::default() },
            SolverConfig { max_outer_iters: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
