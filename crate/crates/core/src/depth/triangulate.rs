use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::image::{DepthMap, ScalarMap};
use crate::par;
use crate::sphere::{
    angle_between, pixel_to_direction_wrapped, AngularPoint, CameraPose, PixelCoord,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangulationParams {
    /// Minimum `α_t − α_{t−1}`, radians.
    pub epsilon_tri: f64,
    pub d_max: f64,
    pub baseline_min: f64,
    pub literal_numerator: bool,
}

impl Default for TriangulationParams {
    fn default() -> Self {
        Self {
            epsilon_tri: 0.2f64.to_radians(),
            d_max: 1000.0,
            baseline_min: 0.01,
            literal_numerator: false,
        }
    }
}

/// Law-of-sines depth from two parallax angles to the direction of motion.
///
/// With the camera moving `baseline` meters along the motion direction, a
/// point seen at angle `alpha_prev` before and `alpha_curr` after the move
/// lies `baseline · sin(alpha_prev) / sin(alpha_curr − alpha_prev)` from the
/// current camera. `literal` swaps the numerator to `sin(alpha_curr)`, the
/// distance from the previous camera. Returns `None` for singular or
/// non-positive configurations.
pub fn depth_from_parallax(
    baseline: f64,
    alpha_prev: f64,
    alpha_curr: f64,
    epsilon_tri: f64,
    literal: bool,
) -> Option<f64> {
    let spread = alpha_curr - alpha_prev;
    if !(spread > epsilon_tri) {
        return None;
    }
    let denom = alpha_curr.sin() * alpha_prev.cos() - alpha_curr.cos() * alpha_prev.sin();
    if !(denom > epsilon_tri.sin()) {
        return None;
    }
    let numer = if literal {
        alpha_curr.sin()
    } else {
        alpha_prev.sin()
    };
    let d = baseline * numer / denom;
    (d.is_finite() && d > 0.0).then_some(d)
}

/// Per-pixel depth of the current frame from a backward flow.
///
/// For each current pixel `s_t`, the correspondence in the previous frame is
/// `s_{t−1} = s_t + u(s_t)`. Both are turned into world rays with their
/// camera orientation and their angles to the divergence direction (given in
/// the current camera frame) are triangulated. Valid depths are clamped to
/// `(0, d_max]`.
pub fn triangulate_depth(
    flow: &FlowField,
    pose_prev: &CameraPose,
    pose_curr: &CameraPose,
    div: AngularPoint,
    params: &TriangulationParams,
) -> Result<DepthMap> {
    let (w, h) = flow.dims();
    let baseline = pose_curr.baseline(pose_prev);
    if !(baseline > params.baseline_min) {
        return Err(Error::BaselineTooShort {
            baseline,
            minimum: params.baseline_min,
        });
    }
    let motion = pose_curr.to_world(&div.direction());

    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    par::for_each_row2(&mut values, &mut valid, w, |y, vrow, mrow| {
        for x in 0..w {
            let Some([ux, uy]) = flow.get(x, y) else {
                continue;
            };
            let curr = PixelCoord::center(x, y);
            let prev = PixelCoord::new(curr.x + ux, curr.y + uy);
            if !(0.0..=h as f64).contains(&prev.y) {
                continue;
            }
            let (Ok(dc), Ok(dp)) = (
                pixel_to_direction_wrapped(curr, w, h),
                pixel_to_direction_wrapped(prev, w, h),
            ) else {
                continue;
            };
            let alpha_curr = angle_between(&pose_curr.to_world(&dc), &motion);
            let alpha_prev = angle_between(&pose_prev.to_world(&dp), &motion);
            if let Some(d) = depth_from_parallax(
                baseline,
                alpha_prev,
                alpha_curr,
                params.epsilon_tri,
                params.literal_numerator,
            ) {
                vrow[x] = d.min(params.d_max);
                mrow[x] = true;
            }
        }
    });
    Ok(DepthMap::from_scalar(ScalarMap::new(w, h, values, valid)?))
}
