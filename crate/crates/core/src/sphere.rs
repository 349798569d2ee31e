//! Equirectangular pixel, spherical angle and world ray conversions.
//!
//! Conventions:
//! - continuous pixel coordinates `(x, y)` with `x ∈ [0, w]`, `y ∈ [0, h]`;
//!   the center of pixel `(col, row)` sits at `(col + 0.5, row + 0.5)`.
//! - polar angle `θ = π·y/h` measured from `+z`, azimuth `φ = 2π·x/w`
//!   measured from `+x` towards `+y`.
//! - camera frame is right-handed with `+z` up; a pose maps camera
//!   directions into the world as `orientation · direction`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `sin θ` a direction is treated as a pole and gets column 0.
const POLE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Center of the integer pixel `(col, row)`.
    pub fn center(col: usize, row: usize) -> Self {
        Self {
            x: col as f64 + 0.5,
            y: row as f64 + 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularPoint {
    pub theta: f64,
    pub phi: f64,
}

impl AngularPoint {
    /// Builds a point, wrapping `phi` into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!(
                "angular point out of range: theta={theta}, phi={phi}"
            )));
        }
        Ok(Self {
            theta,
            phi: wrap_angle(phi),
        })
    }

    pub fn direction(&self) -> Vector3<f64> {
        angles_to_direction(self.theta, self.phi)
    }

    pub fn from_direction(d: &Vector3<f64>) -> Result<Self> {
        let n = d.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain("zero or non-finite direction".into()));
        }
        let d = d / n;
        let theta = d.z.clamp(-1.0, 1.0).acos();
        let phi = if theta.sin() < POLE_EPS {
            0.0
        } else {
            wrap_angle(d.y.atan2(d.x))
        };
        Ok(Self { theta, phi })
    }

    pub fn from_pixel(p: PixelCoord, width: usize, height: usize) -> Result<Self> {
        check_pixel(p, width, height)?;
        Ok(Self {
            theta: PI * p.y / height as f64,
            phi: wrap_angle(TAU * p.x / width as f64),
        })
    }

    pub fn to_pixel(&self, width: usize, height: usize) -> PixelCoord {
        PixelCoord {
            x: self.phi / TAU * width as f64,
            y: self.theta / PI * height as f64,
        }
    }
}

#[inline]
fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps a horizontal pixel coordinate into `[0, width)`.
#[inline]
pub fn wrap_x(x: f64, width: usize) -> f64 {
    let w = width as f64;
    let r = x.rem_euclid(w);
    if r >= w {
        0.0
    } else {
        r
    }
}

#[inline]
fn angles_to_direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

fn check_pixel(p: PixelCoord, width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Domain("empty frame".into()));
    }
    let in_x = (0.0..=width as f64).contains(&p.x);
    let in_y = (0.0..=height as f64).contains(&p.y);
    if !(in_x && in_y) {
        return Err(Error::Domain(format!(
            "pixel ({}, {}) outside {width}x{height}",
            p.x, p.y
        )));
    }
    Ok(())
}

/// Unit viewing direction in the camera frame for a continuous pixel position.
pub fn pixel_to_direction(p: PixelCoord, width: usize, height: usize) -> Result<Vector3<f64>> {
    check_pixel(p, width, height)?;
    let theta = PI * p.y / height as f64;
    let phi = TAU * p.x / width as f64;
    Ok(angles_to_direction(theta, phi))
}

/// Same as [`pixel_to_direction`] but wraps `x` first; `y` must be in range.
pub fn pixel_to_direction_wrapped(
    p: PixelCoord,
    width: usize,
    height: usize,
) -> Result<Vector3<f64>> {
    pixel_to_direction(PixelCoord::new(wrap_x(p.x, width), p.y), width, height)
}

/// Continuous pixel position of a camera-frame direction, `x ∈ [0, w)`.
pub fn direction_to_pixel(d: &Vector3<f64>, width: usize, height: usize) -> Result<PixelCoord> {
    let n = d.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Domain("zero or non-finite direction".into()));
    }
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("direction norm {n} is not unit")));
    }
    let a = AngularPoint::from_direction(d)?;
    Ok(a.to_pixel(width, height))
}

/// Great-circle angle between two directions, accurate near 0 and π.
#[inline]
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Angular offset of pixel `p` from the divergence point, in `[0, π]`.
pub fn parallax_angle(
    p: PixelCoord,
    div: AngularPoint,
    width: usize,
    height: usize,
) -> Result<f64> {
    let d = pixel_to_direction(p, width, height)?;
    Ok(angle_between(&d, &div.direction()))
}

/// Camera position and orientation (world-from-camera).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl CameraPose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn at(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    /// Builds a pose from a raw `(w, x, y, z)` quaternion, which must already
    /// be unit length within 1e-9.
    pub fn from_raw(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "orientation quaternion norm {norm} is not 1"
            )));
        }
        if position.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite camera position".into()));
        }
        Ok(Self {
            position: Vector3::from(position),
            orientation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    #[inline]
    pub fn to_world(&self, camera_dir: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * camera_dir
    }

    #[inline]
    pub fn to_camera(&self, world_dir: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(world_dir)
    }

    pub fn baseline(&self, other: &CameraPose) -> f64 {
        (self.position - other.position).norm()
    }
}
