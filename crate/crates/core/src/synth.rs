//! Synthetic fringe patterns with a known, discontinuous phase, the fringe
//! model itself, and the normalized error `Q` used to score estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FringeError, Result};
use crate::field::{self, ScalarField};

/// Half-open pixel rectangle `[i0, i1) x [j0, j1)` (columns, rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl PixelRect {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..self.i1).contains(&i) && (self.j0..self.j1).contains(&j)
    }

    /// Rectangle covering the normalized span `[x0, x1] x [y0, y1]` of a
    /// `width x height` grid, where pixel `(i, j)` sits at
    /// `(i / (width - 1), j / (height - 1))`.
    pub fn from_normalized(width: usize, height: usize, x: (f64, f64), y: (f64, f64)) -> Self {
        let span = |n: usize, lo: f64, hi: f64| {
            let scale = (n.max(2) - 1) as f64;
            let start = (lo * scale).ceil().max(0.0) as usize;
            let end = ((hi * scale).floor() as usize + 1).min(n);
            (start.min(end), end)
        };
        let (i0, i1) = span(width, x.0, x.1);
        let (j0, j1) = span(height, y.0, y.1);
        Self { i0, i1, j0, j1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Carrier frequency along the column axis, radians per pixel.
    pub carrier_fx: f64,
    /// Scale of the smooth two-Gaussian surface, radians.
    pub phase_amplitude: f64,
    /// Phase jump added inside `step_region`, radians.
    pub step_height: f64,
    pub step_region: PixelRect,
    /// Background level at the image centre.
    pub background_a: f64,
    /// Change of the background across the full width, `a = a0 + tilt (x - 1/2)`.
    pub background_tilt: f64,
    /// Modulation at the image centre.
    pub modulation_b: f64,
    /// Radial vignetting, `b = b0 (1 - falloff ((x - 1/2)^2 + (y - 1/2)^2))`;
    /// must stay below 2 so that `b > 0` in the corners.
    pub modulation_falloff: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::canonical(640, 480)
    }
}

impl SyntheticSpec {
    /// The benchmark pattern at an arbitrary size: the step occupies the
    /// normalized rectangle `[0.55, 0.95] x [0.55, 0.9]`.
    pub fn canonical(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            carrier_fx: 0.7,
            phase_amplitude: 1.0,
            step_height: 0.6,
            step_region: PixelRect::from_normalized(width, height, (0.55, 0.95), (0.55, 0.9)),
            background_a: 1.0,
            background_tilt: 0.5,
            modulation_b: 1.0,
            modulation_falloff: 1.2,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(FringeError::InvalidConfig(format!(
                "synthetic pattern must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.modulation_b > 0.0) {
            return Err(FringeError::InvalidConfig(
                "modulation must be positive".into(),
            ));
        }
        if !(0.0..2.0).contains(&self.modulation_falloff) {
            return Err(FringeError::InvalidConfig(
                "modulation falloff must lie in [0, 2)".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(FringeError::InvalidConfig(
                "noise sigma must be non-negative".into(),
            ));
        }
        let finite = [
            self.carrier_fx,
            self.phase_amplitude,
            self.step_height,
            self.background_a,
            self.background_tilt,
            self.noise_sigma,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(FringeError::InvalidConfig(
                "synthetic parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Known parameters of a synthetic pattern together with the pattern itself.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub phi: ScalarField,
    pub a: ScalarField,
    pub b: ScalarField,
    pub omega: ScalarField,
    pub g: ScalarField,
    pub g_noisy: ScalarField,
}

/// Fringe model `a + b cos(omega + phi)`.
pub fn eval_fringe(
    a: &ScalarField,
    b: &ScalarField,
    phi: &ScalarField,
    omega: &ScalarField,
) -> Result<ScalarField> {
    a.check_shape(b)?;
    a.check_shape(phi)?;
    a.check_shape(omega)?;
    let (w, h) = (a.width(), a.height());
    let (av, bv, pv, ov) = (a.values(), b.values(), phi.values(), omega.values());
    Ok(ScalarField::from_fn(w, h, |i, j| {
        let k = j * w + i;
        av[k] + bv[k] * (ov[k] + pv[k]).cos()
    }))
}

/// Smooth part of the benchmark phase in unit-normalized coordinates.
fn smooth_surface(x: f64, y: f64) -> f64 {
    let peak = (-((x - 0.4).powi(2) + (y - 0.5).powi(2)) / 0.08).exp();
    let dip = (-((x - 0.7).powi(2) + (y - 0.3).powi(2)) / 0.05).exp();
    peak - 0.7 * dip
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let sx = (w - 1) as f64;
    let sy = (h - 1) as f64;
    let phi = ScalarField::from_fn(w, h, |i, j| {
        let smooth = spec.phase_amplitude * smooth_surface(i as f64 / sx, j as f64 / sy);
        if spec.step_region.contains(i, j) {
            smooth + spec.step_height
        } else {
            smooth
        }
    });
    let omega = ScalarField::from_fn(w, h, |i, _| spec.carrier_fx * i as f64);
    let a = ScalarField::from_fn(w, h, |i, _| {
        spec.background_a + spec.background_tilt * (i as f64 / sx - 0.5)
    });
    let b = ScalarField::from_fn(w, h, |i, j| {
        let (x, y) = (i as f64 / sx - 0.5, j as f64 / sy - 0.5);
        spec.modulation_b * (1.0 - spec.modulation_falloff * (x * x + y * y))
    });
    let g = eval_fringe(&a, &b, &phi, &omega)?;
    let g_noisy = add_noise(&g, spec.noise_sigma, spec.seed);
    Ok(GroundTruth {
        phi,
        a,
        b,
        omega,
        g,
        g_noisy,
    })
}

/// Adds i.i.d. `N(0, sigma^2)` noise drawn from a generator seeded with `seed`.
pub fn add_noise(g: &ScalarField, sigma: f64, seed: u64) -> ScalarField {
    assert!(sigma >= 0.0, "noise sigma must be non-negative");
    if sigma == 0.0 {
        return g.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut out = g.clone();
    for v in out.values_mut() {
        *v += normal.sample(&mut rng);
    }
    out
}

/// Normalized error `||mu - nu|| / (||mu|| + ||nu||)`, in `[0, 1]`.
pub fn q_error(mu: &ScalarField, nu: &ScalarField) -> Result<f64> {
    mu.check_shape(nu)?;
    let denom = mu.norm() + nu.norm();
    if denom == 0.0 {
        return Err(FringeError::BothZero);
    }
    Ok(field::sq_distance(mu.values(), nu.values()).sqrt() / denom)
}
