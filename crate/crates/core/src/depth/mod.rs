//! Depth from motion on the sphere and the foreground probability map.
//!
//! Flow fields consumed here are *backward* flows: defined on the grid of the
//! current frame `t` and pointing to correspondences in frame `t-1`. That way
//! triangulated depth is indexed by current-frame pixels and older depth
//! maps can be brought forward with [`crate::flow::warp_scalar_field`].

mod divergence;
mod fusion;
mod probability;
mod triangulate;

pub use divergence::{
    divergence_response, find_divergence_point, DivergenceEstimate, DivergenceParams,
    DivergenceSearchRegion, Polarity,
};
pub use fusion::fuse_depth_temporal;
pub use probability::{foreground_probability, sigmoid};
pub use triangulate::{depth_from_parallax, triangulate_depth, TriangulationParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depth estimation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthParams {
    /// Minimum parallax change in degrees; smaller changes are invalid.
    pub epsilon_tri_deg: f64,
    /// Upper clamp for valid depths, meters.
    pub d_max: f64,
    /// Temporal fusion window, frames.
    pub window: usize,
    /// Sigmoid scale of the foreground probability, 1/m.
    pub k: f64,
    /// Minimum camera baseline between frames, meters.
    pub baseline_min: f64,
    /// Probability assigned where real depth is unknown.
    pub p_unknown: f64,
    /// Use `sin α_t` in the numerator, giving distance from the previous
    /// camera instead of the current one.
    pub literal_numerator: bool,
    pub divergence: DivergenceParams,
}

impl Default for DepthParams {
    fn default() -> Self {
        Self {
            epsilon_tri_deg: 0.2,
            d_max: 1000.0,
            window: 5,
            k: 1.0,
            baseline_min: 0.01,
            p_unknown: 0.5,
            literal_numerator: false,
            divergence: DivergenceParams::default(),
        }
    }
}

impl DepthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tri_deg >= 0.0 && self.epsilon_tri_deg < 90.0) {
            return Err(Error::Config("epsilon_tri_deg must be in [0, 90)".into()));
        }
        if !(self.d_max.is_finite() && self.d_max > 0.0) {
            return Err(Error::Config("d_max must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.baseline_min >= 0.0) {
            return Err(Error::Config("baseline_min must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.p_unknown) {
            return Err(Error::Config("p_unknown must be in [0, 1]".into()));
        }
        self.divergence.validate()
    }

    pub fn triangulation(&self) -> TriangulationParams {
        TriangulationParams {
            epsilon_tri: self.epsilon_tri_deg.to_radians(),
            d_max: self.d_max,
            baseline_min: self.baseline_min,
            literal_numerator: self.literal_numerator,
        }
    }
}
