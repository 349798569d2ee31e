//! Dense optical flow between consecutive frames.

mod pyramid;
mod tvl1;
mod warp;

pub use tvl1::{compute_flow, tvl1_energy};
pub use warp::{bilinear_taps, warp_scalar_field, Taps};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel displacement in pixels, with a validity mask.
///
/// Non-finite displacements are never stored; such pixels are zeroed and
/// flagged invalid on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![[0.0; 2]; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn new(width: usize, height: usize, u: Vec<[f64; 2]>, valid: Vec<bool>) -> Result<Self> {
        if u.len() != width * height || valid.len() != width * height {
            return Err(Error::Domain("flow buffers do not match dims".into()));
        }
        let mut f = Self {
            width,
            height,
            u,
            valid,
        };
        f.sanitize();
        Ok(f)
    }

    /// Builds a field from `f(x, y)`; `None` marks the pixel invalid.
    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> Option<[f64; 2]>,
    ) -> Self {
        let mut u = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                match f(x, y) {
                    Some(v) => {
                        u.push(v);
                        valid.push(true);
                    }
                    None => {
                        u.push([0.0; 2]);
                        valid.push(false);
                    }
                }
            }
        }
        let mut out = Self {
            width,
            height,
            u,
            valid,
        };
        out.sanitize();
        out
    }

    fn sanitize(&mut self) {
        for (v, ok) in self.u.iter_mut().zip(self.valid.iter_mut()) {
            if !(v[0].is_finite() && v[1].is_finite()) {
                *ok = false;
            }
            if !*ok {
                *v = [0.0; 2];
            }
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[f64; 2]> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.u[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Mean endpoint error against `truth` over pixels valid in both.
    pub fn mean_endpoint_error(&self, truth: &FlowField) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..self.u.len().min(truth.u.len()) {
            if self.valid[i] && truth.valid[i] {
                let dx = self.u[i][0] - truth.u[i][0];
                let dy = self.u[i][1] - truth.u[i][1];
                sum += (dx * dx + dy * dy).sqrt();
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// TV-L1 solver settings.
///
/// `iterations` is the total inner iteration budget per pyramid level and is
/// split evenly across `warps_per_level`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub lambda: f64,
    pub theta: f64,
    pub tau: f64,
    pub iterations: usize,
    pub pyramid_scale: f64,
    pub levels: usize,
    pub warps_per_level: usize,
    /// 3×3 median filter on the flow after every warp.
    pub median_filter: bool,
    /// Treat the horizontal axis as periodic (equirectangular input).
    pub wrap_horizontal: bool,
    /// Coarser levels are dropped once either side would fall below this.
    pub min_level_size: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            theta: 0.3,
            tau: 0.25,
            iterations: 115,
            pyramid_scale: 0.5,
            levels: 6,
            warps_per_level: 5,
            median_filter: true,
            wrap_horizontal: true,
            min_level_size: 16,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lambda, self.theta, self.tau]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(Error::Config(
                "lambda, theta and tau must be positive".into(),
            ));
        }
        if self.iterations == 0 || self.warps_per_level == 0 || self.levels == 0 {
            return Err(Error::Config(
                "iterations, warps_per_level and levels must be at least 1".into(),
            ));
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(Error::Config("pyramid_scale must be in (0, 1)".into()));
        }
        if self.min_level_size == 0 {
            return Err(Error::Config("min_level_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iterations_per_warp(&self) -> usize {
        (self.iterations / self.warps_per_level).max(1)
    }
}
