//! Per-iteration convergence traces.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Alm,
    FixedPoint,
    TvDenoise,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Alm => "alm",
            Method::FixedPoint => "fp",
            Method::TvDenoise => "tv-denoise",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One outer iteration. Unknowns are ordered `(phi, b, a)`; the denoiser
/// fills only the first slot.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub rel_change: [Option<f64>; 3],
    pub energy: f64,
    /// `||q_d - grad d|| / max(||grad d||, 1e-12)`; splitting solvers only.
    pub constraint_residual: Option<[f64; 3]>,
    /// `||mu_d||`; splitting solvers only.
    pub multiplier_norm: Option<[f64; 3]>,
    /// Normalized error against the supplied ground truth.
    pub q_err: Option<f64>,
    /// Cumulative wall time since the solve started.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl RunReport {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            records: Vec::new(),
            converged: false,
        }
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_q(&self) -> Option<f64> {
        self.last().and_then(|r| r.q_err)
    }

    pub fn wall_ms(&self) -> f64 {
        self.last().map_or(0.0, |r| r.wall_ms)
    }

    /// Copy with wall times cleared to NaN, for comparing or archiving runs
    /// byte-for-byte.
    pub fn without_timing(&self) -> RunReport {
        let mut out = self.clone();
        for r in &mut out.records {
            r.wall_ms = f64::NAN;
        }
        out
    }
}
