//! The demodulation unknowns, the TV energy, and the linearized data-term
//! systems shared by both demodulation solvers.

use rayon::prelude::*;

use crate::error::Result;
use crate::field::{self, grad, magnitude_smoothed, ScalarField};
use crate::synth::eval_fringe;

/// Phase, modulation and background estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeEstimate {
    pub phi: ScalarField,
    pub b: ScalarField,
    pub a: ScalarField,
}

impl FringeEstimate {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            phi: ScalarField::zeros(width, height),
            b: ScalarField::zeros(width, height),
            a: ScalarField::zeros(width, height),
        }
    }

    /// `psi = omega + phi`.
    pub fn psi(&self, omega: &ScalarField) -> Result<ScalarField> {
        omega.zip_map(&self.phi, |o, p| o + p)
    }

    /// Modelled intensity `a + b cos(omega + phi)`.
    pub fn intensity(&self, omega: &ScalarField) -> Result<ScalarField> {
        eval_fringe(&self.a, &self.b, &self.phi, omega)
    }

    /// `||I - g|| / ||g||`; `||I - g||` when `g` is identically zero.
    pub fn data_residual(&self, g: &ScalarField, omega: &ScalarField) -> Result<f64> {
        let i = self.intensity(omega)?;
        let diff = field::sq_distance(i.values(), g.values()).sqrt();
        let gn = g.norm();
        Ok(if gn > 0.0 { diff / gn } else { diff })
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.b.is_finite() && self.a.is_finite()
    }
}

/// `(lambda/2) sum (I - g)^2`.
pub fn data_energy(est: &FringeEstimate, g: &ScalarField, omega: &ScalarField, lambda: f64) -> Result<f64> {
    let i = est.intensity(omega)?;
    g.check_shape(&i)?;
    Ok(0.5 * lambda * field::sq_distance(i.values(), g.values()))
}

/// Sum of `sqrt(|grad d|^2 + beta)` over the grid.
pub fn smoothed_tv(d: &ScalarField, beta: f64) -> f64 {
    field::sum(magnitude_smoothed(&grad(d), beta).values())
}

/// Discrete TV energy with each TV term smoothed by `beta`:
/// `(lambda/2) sum (I - g)^2 + TV_beta(phi) + TV_beta(a) + TV_beta(b)`.
pub fn energy(
    est: &FringeEstimate,
    g: &ScalarField,
    omega: &ScalarField,
    lambda: f64,
    beta: f64,
) -> Result<f64> {
    Ok(data_energy(est, g, omega, lambda)?
        + smoothed_tv(&est.phi, beta)
        + smoothed_tv(&est.a, beta)
        + smoothed_tv(&est.b, beta))
}

/// Gradient of [`data_energy`] with respect to `(phi, b, a)`:
/// `lambda (I - g) (-b sin psi)`, `lambda (I - g) cos psi`, `lambda (I - g)`.
pub fn data_gradient(
    est: &FringeEstimate,
    g: &ScalarField,
    omega: &ScalarField,
    lambda: f64,
) -> Result<[ScalarField; 3]> {
    let psi = est.psi(omega)?;
    g.check_shape(&psi)?;
    let (w, h) = (g.width(), g.height());
    let n = w * h;
    let (pv, bv, av, gv) = (psi.values(), est.b.values(), est.a.values(), g.values());
    let mut d_phi = vec![0.0; n];
    let mut d_b = vec![0.0; n];
    let mut d_a = vec![0.0; n];
    d_phi
        .par_iter_mut()
        .zip(d_b.par_iter_mut().zip(d_a.par_iter_mut()))
        .enumerate()
        .for_each(|(k, (gp, (gb, ga)))| {
            let (s, c) = pv[k].sin_cos();
            let res = lambda * (av[k] + bv[k] * c - gv[k]);
            *gp = -res * bv[k] * s;
            *gb = res * c;
            *ga = res;
        });
    Ok([
        ScalarField::from_vec(w, h, d_phi)?,
        ScalarField::from_vec(w, h, d_b)?,
        ScalarField::from_vec(w, h, d_a)?,
    ])
}

/// The three unknowns, in update order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Phi,
    B,
    A,
}

impl Unknown {
    pub const ALL: [Unknown; 3] = [Unknown::Phi, Unknown::B, Unknown::A];

    pub fn name(&self) -> &'static str {
        match self {
            Unknown::Phi => "phi",
            Unknown::B => "b",
            Unknown::A => "a",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn of<'e>(&self, est: &'e FringeEstimate) -> &'e ScalarField {
        match self {
            Unknown::Phi => &est.phi,
            Unknown::B => &est.b,
            Unknown::A => &est.a,
        }
    }

    pub fn of_mut<'e>(&self, est: &'e mut FringeEstimate) -> &'e mut ScalarField {
        match self {
            Unknown::Phi => &mut est.phi,
            Unknown::B => &mut est.b,
            Unknown::A => &mut est.a,
        }
    }
}

/// Zeroth-order coefficient and data right-hand side of one linearized solve.
pub struct DataSystem {
    pub coeff: ScalarField,
    pub rhs: ScalarField,
}

/// Data part of the linear system for `unknown` obtained by linearizing
/// `cos(psi')` about the current `psi`, with every other term taken from
/// `est`:
///
/// * phi: `lambda b^2 sin^2 psi`, rhs `lambda (a b sin psi + b^2 cos psi sin psi + phi b^2 sin^2 psi - g b sin psi)`
/// * b:   `lambda cos^2 psi`, rhs `-lambda (a - g) cos psi`
/// * a:   `lambda`, rhs `-lambda (b cos psi - g)`
pub fn linearized_data_system(
    est: &FringeEstimate,
    g: &ScalarField,
    omega: &ScalarField,
    lambda: f64,
    unknown: Unknown,
) -> Result<DataSystem> {
    g.check_shape(omega)?;
    g.check_shape(&est.phi)?;
    let (w, h) = (g.width(), g.height());
    let n = w * h;
    let (ov, phv, bv, av, gv) = (
        omega.values(),
        est.phi.values(),
        est.b.values(),
        est.a.values(),
        g.values(),
    );
    let mut coeff = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    coeff
        .par_iter_mut()
        .zip(rhs.par_iter_mut())
        .enumerate()
        .for_each(|(k, (ck, fk))| {
            let (s, c) = (ov[k] + phv[k]).sin_cos();
            let (a, b, phi, gk) = (av[k], bv[k], phv[k], gv[k]);
            match unknown {
                Unknown::Phi => {
                    let bs = b * s;
                    *ck = lambda * bs * bs;
                    *fk = lambda * (a * bs + b * b * c * s + phi * bs * bs - gk * bs);
                }
                Unknown::B => {
                    *ck = lambda * c * c;
                    *fk = -lambda * (a - gk) * c;
                }
                Unknown::A => {
                    *ck = lambda;
                    *fk = -lambda * (b * c - gk);
                }
            }
        });
    Ok(DataSystem {
        coeff: ScalarField::from_vec(w, h, coeff)?,
        rhs: ScalarField::from_vec(w, h, rhs)?,
    })
}
