//! Analytic scenes with exact depth, flow, labels and CG layers.
//!
//! Scenes are ray cast against closed-form primitives, so ground truth is
//! exact up to floating point.

mod dataset;
mod presets;
mod render;
mod texture;

pub use dataset::write_dataset;
pub use presets::{lateral_wall, street, wall_approach};
pub use render::{
    cast_ray, ground_truth_flow, make_cg_layer, render_scene, Hit, RenderedFrame,
    BOUNDARY_UNCERTAINTY, INTERIOR_UNCERTAINTY,
};
pub use texture::{value_noise, Texture};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::poses::PoseRecord;
use crate::semantics::SemanticLabel;
use crate::sphere::CameraPose;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Parallelogram `center + a·u_axis + b·v_axis` for `|a|, |b| ≤ 1`.
    Quad {
        center: [f64; 3],
        u_axis: [f64; 3],
        v_axis: [f64; 3],
    },
    /// Infinite plane through `point`.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitive {
    pub shape: Shape,
    pub label: SemanticLabel,
    pub texture: Texture,
    /// Rendered into the CG layer instead of the real frame.
    #[serde(default)]
    pub cg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub primitives: Vec<Primitive>,
    pub camera_path: Vec<PoseRecord>,
    #[serde(default = "default_sky")]
    pub sky_color: [f32; 3],
}

fn default_sky() -> [f32; 3] {
    [0.45, 0.62, 0.9]
}

impl SceneSpec {
    pub fn new(
        width: usize,
        height: usize,
        primitives: Vec<Primitive>,
        path: &[CameraPose],
    ) -> Self {
        Self {
            width,
            height,
            primitives,
            camera_path: path
                .iter()
                .enumerate()
                .map(|(i, p)| PoseRecord::from_pose(i, p))
                .collect(),
            sky_color: default_sky(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width != 2 * self.height {
            return Err(Error::Domain(format!(
                "scene must be rendered 2:1, got {}x{}",
                self.width, self.height
            )));
        }
        if self.camera_path.is_empty() {
            return Err(Error::Domain("scene has no camera poses".into()));
        }
        for p in &self.primitives {
            p.shape.validate()?;
        }
        for r in &self.camera_path {
            r.to_pose()?;
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.camera_path.len()
    }

    pub fn pose(&self, index: usize) -> Result<CameraPose> {
        self.camera_path
            .get(index)
            .ok_or_else(|| Error::Domain(format!("no camera pose for frame {index}")))?
            .to_pose()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Sphere { radius, .. } => *radius > 0.0,
            Shape::Quad { u_axis, v_axis, .. } => {
                let n = Vector3::from(*u_axis).cross(&Vector3::from(*v_axis));
                n.norm() > 0.0
            }
            Shape::Plane { normal, .. } => Vector3::from(*normal).norm() > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("degenerate primitive {self:?}")))
        }
    }
}
