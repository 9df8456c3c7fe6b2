//! Conjugate-gradient solver for the screened Poisson systems
//! `(c(x) Id - r div(k(x) grad)) d = rhs` that every primal update reduces to.
//!
//! `c >= 0` pointwise and `k > 0` pointwise, so the operator is symmetric
//! positive semi-definite; it is singular only when `c` vanishes everywhere,
//! in which case a tiny shift pins the constant mode.

use rayon::prelude::*;

use crate::error::{FringeError, Result};
use crate::field::{self, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinSolveConfig {
    /// Stop once `||A x - rhs|| <= rel_residual_tol * ||rhs||`.
    pub rel_residual_tol: f64,
    pub max_inner_iters: usize,
    /// Added to the zeroth-order coefficient when it vanishes everywhere.
    pub nullspace_shift: f64,
}

impl Default for LinSolveConfig {
    fn default() -> Self {
        Self {
            rel_residual_tol: 1e-6,
            max_inner_iters: 200,
            nullspace_shift: 1e-12,
        }
    }
}

impl LinSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_residual_tol > 0.0) {
            return Err(FringeError::InvalidConfig(
                "inner residual tolerance must be positive".into(),
            ));
        }
        if self.max_inner_iters == 0 {
            return Err(FringeError::InvalidConfig(
                "inner iteration cap must be at least 1".into(),
            ));
        }
        if !(self.nullspace_shift >= 0.0) {
            return Err(FringeError::InvalidConfig(
                "nullspace shift must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `A d = c d - r div(k grad d)`, with `k = 1` when no diffusivity is given.
#[derive(Debug, Clone)]
pub struct ScreenedPoissonOperator {
    coeff: ScalarField,
    weight: f64,
    diffusivity: Option<ScalarField>,
}

impl ScreenedPoissonOperator {
    pub fn new(coeff: ScalarField, weight: f64) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(FringeError::InvalidConfig(format!(
                "diffusion weight must be positive, got {weight}"
            )));
        }
        if coeff.values().iter().any(|&c| !(c >= 0.0)) {
            return Err(FringeError::InvalidConfig(
                "zeroth-order coefficient must be non-negative".into(),
            ));
        }
        Ok(Self {
            coeff,
            weight,
            diffusivity: None,
        })
    }

    /// Attaches a per-pixel diffusivity (the lagged TV weight).
    pub fn with_diffusivity(mut self, diffusivity: ScalarField) -> Result<Self> {
        self.coeff.check_shape(&diffusivity)?;
        if diffusivity.values().iter().any(|&k| !(k > 0.0)) {
            return Err(FringeError::InvalidConfig(
                "diffusivity must be positive".into(),
            ));
        }
        self.diffusivity = Some(diffusivity);
        Ok(self)
    }

    pub fn coeff(&self) -> &ScalarField {
        &self.coeff
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn diffusivity(&self) -> Option<&ScalarField> {
        self.diffusivity.as_ref()
    }

    pub fn apply(&self, d: &ScalarField) -> Result<ScalarField> {
        self.coeff.check_shape(d)?;
        let mut out = ScalarField::zeros(d.width(), d.height());
        self.apply_into(d.values(), out.values_mut());
        Ok(out)
    }

    fn apply_into(&self, d: &[f64], out: &mut [f64]) {
        let w = self.coeff.width();
        let h = self.coeff.height();
        let c = self.coeff.values();
        let r = self.weight;
        let k = self.diffusivity.as_ref().map(|f| f.values());
        let kappa = |idx: usize| k.map_or(1.0, |k| k[idx]);
        out.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
            let base = j * w;
            for (i, o) in row.iter_mut().enumerate() {
                let idx = base + i;
                let di = d[idx];
                // Fluxes through the four faces; each is zero on the far boundary.
                let mut flux = 0.0;
                if i + 1 < w {
                    flux += kappa(idx) * (d[idx + 1] - di);
                }
                if i > 0 {
                    flux -= kappa(idx - 1) * (di - d[idx - 1]);
                }
                if j + 1 < h {
                    flux += kappa(idx) * (d[idx + w] - di);
                }
                if j > 0 {
                    flux -= kappa(idx - w) * (di - d[idx - w]);
                }
                *o = c[idx] * di - r * flux;
            }
        });
    }

    fn is_singular(&self) -> bool {
        self.coeff.values().iter().all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: ScalarField,
    pub iterations: usize,
    /// `||A x - rhs|| / ||rhs||` at exit (recursively updated residual).
    pub relative_residual: f64,
    pub converged: bool,
    /// Relative residual after each iteration, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

/// Conjugate gradient from the warm start `x0`.
///
/// Hitting `max_inner_iters` is reported through `converged`, not as an error.
pub fn cg_solve(
    op: &ScreenedPoissonOperator,
    rhs: &ScalarField,
    x0: &ScalarField,
    cfg: &LinSolveConfig,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    op.coeff.check_shape(rhs)?;
    op.coeff.check_shape(x0)?;

    let shifted;
    let op = if op.is_singular() && cfg.nullspace_shift > 0.0 {
        shifted = ScreenedPoissonOperator {
            coeff: op.coeff.map(|c| c + cfg.nullspace_shift),
            weight: op.weight,
            diffusivity: op.diffusivity.clone(),
        };
        &shifted
    } else {
        op
    };

    let n = rhs.len();
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return Ok(SolveOutcome {
            solution: ScalarField::zeros(rhs.width(), rhs.height()),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            residual_history: vec![0.0],
        });
    }

    let mut x = x0.clone().into_values();
    let mut ax = vec![0.0; n];
    op.apply_into(&x, &mut ax);
    let mut res: Vec<f64> = rhs
        .values()
        .par_iter()
        .zip(ax.par_iter())
        .map(|(b, a)| b - a)
        .collect();
    let mut rr = field::dot(&res, &res);
    if !rr.is_finite() {
        return Err(FringeError::NonFinite { iteration: 0 });
    }
    let target = cfg.rel_residual_tol * rhs_norm;
    let mut history = vec![rr.sqrt() / rhs_norm];
    let mut p = res.clone();
    let mut ap = ax;
    let mut iterations = 0;

    while rr.sqrt() > target && iterations < cfg.max_inner_iters {
        iterations += 1;
        op.apply_into(&p, &mut ap);
        let pap = field::dot(&p, &ap);
        if !pap.is_finite() {
            return Err(FringeError::NonFinite {
                iteration: iterations,
            });
        }
        if pap <= 0.0 {
            // Exhausted the Krylov space of a semi-definite operator.
            break;
        }
        let alpha = rr / pap;
        x.par_iter_mut()
            .zip(res.par_iter_mut())
            .zip(p.par_iter().zip(ap.par_iter()))
            .for_each(|((xi, ri), (pi, api))| {
                *xi += alpha * pi;
                *ri -= alpha * api;
            });
        let rr_next = field::dot(&res, &res);
        if !rr_next.is_finite() {
            return Err(FringeError::NonFinite {
                iteration: iterations,
            });
        }
        history.push(rr_next.sqrt() / rhs_norm);
        let beta = rr_next / rr;
        rr = rr_next;
        p.par_iter_mut()
            .zip(res.par_iter())
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }

    let relative_residual = rr.sqrt() / rhs_norm;
    Ok(SolveOutcome {
        solution: ScalarField::from_vec(rhs.width(), rhs.height(), x)?,
        iterations,
        relative_residual,
        converged: rr.sqrt() <= target,
        residual_history: history,
    })
}
