//! Scalar and vector fields on a regular pixel grid.
//!
//! Differences use a unit grid step. `grad` is the forward difference with a
//! zero component on the last column/row (zero normal derivative at the
//! boundary), and `div` is its negative adjoint, so that
//! `<grad s, v> = -<s, div v>` holds exactly in exact arithmetic.

use rayon::prelude::*;

use crate::error::{FringeError, Result};

/// Chunk length for parallel reductions. Partial sums are combined in a
/// fixed order so results do not depend on the thread count.
const REDUCE_CHUNK: usize = 8192;

/// Denominator guard for [`relative_change`].
pub const RELATIVE_CHANGE_GUARD: f64 = 1e-12;

/// Grid bookkeeping shared by every field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    /// Grid step in pixels. Fixed.
    pub const SPACING: f64 = 1.0;

    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FringeError::InvalidDimensions { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A `width x height` grid of reals stored row-major: pixel `(i, j)` (column
/// `i`, row `j`) lives at `j * width + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        GridGeometry::new(width, height)?;
        if data.len() != width * height {
            return Err(FringeError::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a field from `f(i, j)` with `i` the column and `j` the row.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        let mut data = vec![0.0; width * height];
        data.par_chunks_mut(width).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        });
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            width: self.width,
            height: self.height,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.width + i] = value;
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &ScalarField) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(FringeError::DimensionMismatch {
                left: (self.width, self.height),
                right: (other.width, other.height),
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.data.par_iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two same-shape fields.
    pub fn zip_map(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Result<ScalarField> {
        self.check_shape(other)?;
        Ok(ScalarField {
            width: self.width,
            height: self.height,
            data: self
                .data
                .par_iter()
                .zip(other.data.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Field inner product `sum_x s(x) t(x)`.
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        sum(&self.data) / self.data.len() as f64
    }
}

/// A `width x height` grid of 2-vectors, stored as two row-major planes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        let n = width * height;
        Self {
            width,
            height,
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn from_planes(width: usize, height: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        GridGeometry::new(width, height)?;
        for plane in [&x, &y] {
            if plane.len() != width * height {
                return Err(FringeError::LengthMismatch {
                    expected: width * height,
                    actual: plane.len(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            x,
            y,
        })
    }

    /// Same value `(v1, v2)` at every pixel.
    pub fn filled(width: usize, height: usize, v1: f64, v2: f64) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        let n = width * height;
        Self {
            width,
            height,
            x: vec![v1; n],
            y: vec![v2; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// First component (along the column index `i`).
    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    /// Second component (along the row index `j`).
    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        let k = j * self.width + i;
        (self.x[k], self.y[k])
    }

    pub fn set(&mut self, i: usize, j: usize, v: (f64, f64)) {
        let k = j * self.width + i;
        self.x[k] = v.0;
        self.y[k] = v.1;
    }

    pub fn check_shape(&self, other: &VectorField) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(FringeError::DimensionMismatch {
                left: (self.width, self.height),
                right: (other.width, other.height),
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }

    /// Pointwise magnitude `|v|`.
    pub fn magnitude(&self) -> ScalarField {
        magnitude_smoothed(self, 0.0)
    }

    /// Inner product `sum_x v(x) . w(x)`.
    pub fn dot(&self, other: &VectorField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(dot(&self.x, &other.x) + dot(&self.y, &other.y))
    }

    pub fn norm(&self) -> f64 {
        (dot(&self.x, &self.x) + dot(&self.y, &self.y)).sqrt()
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &VectorField) -> Result<VectorField> {
        self.check_shape(other)?;
        let plane = |s: &[f64], p: &[f64]| -> Vec<f64> {
            s.par_iter().zip(p.par_iter()).map(|(&s, &p)| s + scale * p).collect()
        };
        Ok(VectorField {
            width: self.width,
            height: self.height,
            x: plane(&self.x, &other.x),
            y: plane(&self.y, &other.y),
        })
    }

    pub fn scaled(&self, scale: f64) -> VectorField {
        VectorField {
            width: self.width,
            height: self.height,
            x: self.x.par_iter().map(|v| scale * v).collect(),
            y: self.y.par_iter().map(|v| scale * v).collect(),
        }
    }

    /// `self + scale * (a - b)`, the shape of a multiplier ascent step.
    pub fn add_scaled_difference(
        &self,
        scale: f64,
        a: &VectorField,
        b: &VectorField,
    ) -> Result<VectorField> {
        self.check_shape(a)?;
        self.check_shape(b)?;
        let plane = |s: &[f64], p: &[f64], q: &[f64]| -> Vec<f64> {
            s.par_iter()
                .zip(p.par_iter().zip(q.par_iter()))
                .map(|(&s, (&p, &q))| s + scale * (p - q))
                .collect()
        };
        Ok(VectorField {
            width: self.width,
            height: self.height,
            x: plane(&self.x, &a.x, &b.x),
            y: plane(&self.y, &a.y, &b.y),
        })
    }

    /// `L2` norm of `self - other`.
    pub fn distance(&self, other: &VectorField) -> Result<f64> {
        self.check_shape(other)?;
        Ok((sq_distance(&self.x, &other.x) + sq_distance(&self.y, &other.y)).sqrt())
    }
}

/// Deterministic parallel dot product.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub(crate) fn sum(a: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .map(|x| x.iter().sum())
        .collect();
    partial.iter().sum()
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum())
        .collect();
    partial.iter().sum()
}

/// Forward-difference gradient with zero normal derivative on the far edges.
pub fn grad(s: &ScalarField) -> VectorField {
    let (w, h) = (s.width, s.height);
    let d = &s.data;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    gx.par_chunks_mut(w)
        .zip(gy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(j, (rx, ry))| {
            let row = &d[j * w..(j + 1) * w];
            for i in 0..w - 1 {
                rx[i] = row[i + 1] - row[i];
            }
            if j + 1 < h {
                let next = &d[(j + 1) * w..(j + 2) * w];
                for i in 0..w {
                    ry[i] = next[i] - row[i];
                }
            }
        });
    VectorField {
        width: w,
        height: h,
        x: gx,
        y: gy,
    }
}

/// Backward-difference divergence, the negative adjoint of [`grad`].
pub fn div(v: &VectorField) -> ScalarField {
    let (w, h) = (v.width, v.height);
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        let vx = &v.x[j * w..(j + 1) * w];
        for i in 0..w {
            let right = if i + 1 < w { vx[i] } else { 0.0 };
            let left = if i > 0 { vx[i - 1] } else { 0.0 };
            row[i] = right - left;
        }
        let vy = &v.y[j * w..(j + 1) * w];
        if j + 1 < h {
            for i in 0..w {
                row[i] += vy[i];
            }
        }
        if j > 0 {
            let above = &v.y[(j - 1) * w..j * w];
            for i in 0..w {
                row[i] -= above[i];
            }
        }
    });
    ScalarField {
        width: w,
        height: h,
        data: out,
    }
}

/// Pointwise shrinkage
/// `q = (1/r)(1 - 1/|w|) w` where `|w| > 1`, and `q = 0` elsewhere.
///
/// With `w = r grad(u) - mu` this is the exact minimizer of
/// `|q| + mu.q + (r/2)|q - grad(u)|^2` at every pixel.
pub fn soft_threshold(w: &VectorField, r: f64) -> VectorField {
    assert!(r > 0.0, "shrinkage penalty must be positive");
    let (xs, ys): (Vec<f64>, Vec<f64>) = w
        .x
        .par_iter()
        .zip(w.y.par_iter())
        .map(|(&a, &b)| shrink_pair(a, b, r))
        .unzip();
    VectorField {
        width: w.width,
        height: w.height,
        x: xs,
        y: ys,
    }
}

#[inline]
pub(crate) fn shrink_pair(a: f64, b: f64, r: f64) -> (f64, f64) {
    let m = a.hypot(b);
    if m > 1.0 {
        let s = (1.0 - 1.0 / m) / r;
        (s * a, s * b)
    } else {
        (0.0, 0.0)
    }
}

/// `||curr - prev|| / ||prev||`.
///
/// When `||prev||` is below [`RELATIVE_CHANGE_GUARD`] the ratio is undefined;
/// the result is `0` if the step is also below the guard and `+inf`
/// (not converged) otherwise.
pub fn relative_change(curr: &ScalarField, prev: &ScalarField) -> Result<f64> {
    curr.check_shape(prev)?;
    let step = sq_distance(&curr.data, &prev.data).sqrt();
    let base = prev.norm();
    if base < RELATIVE_CHANGE_GUARD {
        return Ok(if step < RELATIVE_CHANGE_GUARD {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(step / base)
}

/// Pointwise `sqrt(v1^2 + v2^2 + beta)`.
pub fn magnitude_smoothed(v: &VectorField, beta: f64) -> ScalarField {
    assert!(beta >= 0.0, "smoothing constant must be non-negative");
    ScalarField {
        width: v.width,
        height: v.height,
        data: v
            .x
            .par_iter()
            .zip(v.y.par_iter())
            .map(|(&a, &b)| (a * a + b * b + beta).sqrt())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scalar(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ScalarField {
        let data = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        ScalarField::from_vec(w, h, data).unwrap()
    }

    fn random_vector(w: usize, h: usize, rng: &mut ChaCha8Rng) -> VectorField {
        let x = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        VectorField::from_planes(w, h, x, y).unwrap()
    }

    #[test]
    fn grad_of_constant_is_zero() {
        let g = grad(&ScalarField::filled(7, 5, 3.25));
        assert!(g.xs().iter().chain(g.ys()).all(|&v| v == 0.0));
    }

    #[test]
    fn grad_one_row() {
        let s = ScalarField::from_vec(3, 1, vec![0.0, 1.0, 3.0]).unwrap();
        let g = grad(&s);
        assert_eq!(g.xs(), &[1.0, 2.0, 0.0]);
        assert_eq!(g.ys(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn div_of_zero_is_zero() {
        let d = div(&VectorField::zeros(4, 6));
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn div_of_ramp_gradient() {
        let s = ScalarField::from_fn(4, 4, |i, _| i as f64);
        let d = div(&grad(&s));
        for j in 0..4 {
            assert_eq!(d.get(0, j), 1.0);
            assert_eq!(d.get(1, j), 0.0);
            assert_eq!(d.get(2, j), 0.0);
            assert_eq!(d.get(3, j), -1.0);
        }
    }

    #[test]
    fn div_of_constant_vector_vanishes_inside() {
        let d = div(&VectorField::filled(6, 5, 0.7, -1.3));
        for j in 1..4 {
            for i in 1..5 {
                assert!(d.get(i, j).abs() < 1e-15);
            }
        }
    }

    // Brute-force inner products, written out pixel by pixel.
    #[test]
    fn grad_div_adjoint_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(w, h) in &[(16, 16), (8, 8), (1, 5), (5, 1), (1, 1), (13, 7)] {
            let s = random_scalar(w, h, &mut rng);
            let v = random_vector(w, h, &mut rng);
            let g = grad(&s);
            let d = div(&v);
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for j in 0..h {
                for i in 0..w {
                    let (gx, gy) = g.get(i, j);
                    let (vx, vy) = v.get(i, j);
                    lhs += gx * vx + gy * vy;
                    rhs += s.get(i, j) * d.get(i, j);
                }
            }
            assert!((lhs + rhs).abs() <= 1e-12, "{w}x{h}: {}", lhs + rhs);
        }
    }

    #[test]
    fn soft_threshold_cases() {
        let w = VectorField::from_planes(3, 1, vec![0.5, 2.0, 0.0], vec![0.5, 0.0, 0.0]).unwrap();
        let q = soft_threshold(&w, 1.0);
        assert_eq!(q.get(0, 0), (0.0, 0.0));
        assert_eq!(q.get(1, 0), (1.0, 0.0));
        assert_eq!(q.get(2, 0), (0.0, 0.0));
        let q = soft_threshold(&VectorField::zeros(2, 2), 11.5);
        assert!(q.xs().iter().chain(q.ys()).all(|&v| v == 0.0));
    }

    #[test]
    fn soft_threshold_unit_circle_is_zero() {
        for k in 0..32 {
            let t = k as f64 * std::f64::consts::TAU / 32.0;
            let w = VectorField::filled(1, 1, t.cos(), t.sin());
            assert_eq!(soft_threshold(&w, 3.0).get(0, 0), (0.0, 0.0));
        }
    }

    #[test]
    fn soft_threshold_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_vector(9, 9, &mut rng);
        let w = VectorField::from_planes(
            9,
            9,
            w.xs().iter().map(|v| 4.0 * v).collect(),
            w.ys().iter().map(|v| 4.0 * v).collect(),
        )
        .unwrap();
        let r = 11.5;
        let q = soft_threshold(&w, r);
        let wm = w.magnitude();
        let qm = q.magnitude();
        for k in 0..81 {
            let expected = if wm.values()[k] > 1.0 {
                (wm.values()[k] - 1.0) / r
            } else {
                0.0
            };
            assert!((qm.values()[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn relative_change_cases() {
        let ones = ScalarField::filled(5, 3, 1.0);
        assert_eq!(relative_change(&ones, &ones).unwrap(), 0.0);
        let scaled = ScalarField::filled(5, 3, 1.1);
        assert!((relative_change(&scaled, &ones).unwrap() - 0.1).abs() < 1e-12);
        let zeros = ScalarField::zeros(5, 3);
        assert_eq!(relative_change(&ones, &zeros).unwrap(), f64::INFINITY);
        assert_eq!(relative_change(&zeros, &zeros).unwrap(), 0.0);
        assert!(relative_change(&ones, &ScalarField::zeros(3, 5)).is_err());
    }

    #[test]
    fn magnitude_smoothed_cases() {
        let m = magnitude_smoothed(&VectorField::zeros(3, 2), 1e-3);
        assert!(m.values().iter().all(|&v| v == 1e-3f64.sqrt()));
        let m = magnitude_smoothed(&VectorField::filled(1, 1, 3.0, 4.0), 0.0);
        assert_eq!(m.values()[0], 5.0);
    }

    #[test]
    fn operations_are_bit_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let s = random_scalar(300, 200, &mut rng);
        let v = random_vector(300, 200, &mut rng);
        assert_eq!(grad(&s), grad(&s));
        assert_eq!(div(&v), div(&v));
        assert_eq!(s.norm().to_bits(), s.norm().to_bits());
        assert_eq!(soft_threshold(&v, 0.3), soft_threshold(&v, 0.3));
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(ScalarField::from_vec(3, 3, vec![0.0; 8]).is_err());
        assert!(ScalarField::from_vec(0, 3, vec![]).is_err());
    }
}
