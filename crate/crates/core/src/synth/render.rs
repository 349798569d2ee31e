use nalgebra::Vector3;

use super::{Primitive, SceneSpec, Shape};
use crate::error::Result;
use crate::flow::FlowField;
use crate::image::{CgLayer, DepthMap, RgbaImage, ScalarMap, SphericalFrame};
use crate::par;
use crate::semantics::{SemanticLabel, SemanticMap};
use crate::sphere::{direction_to_pixel, pixel_to_direction, CameraPose, PixelCoord};

const MIN_T: f64 = 1e-9;

/// Uncertainty reported for pixels whose 4-neighbourhood shares one label.
pub const INTERIOR_UNCERTAINTY: f64 = 0.01;
/// Uncertainty reported on label boundaries.
pub const BOUNDARY_UNCERTAINTY: f64 = 0.85;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Range from the ray origin along the unit direction.
    pub t: f64,
    pub primitive: usize,
}

#[derive(Clone, Debug)]
pub struct RenderedFrame {
    pub frame: SphericalFrame,
    /// Range to the nearest real surface; invalid on sky.
    pub depth: DepthMap,
    pub semantics: SemanticMap,
}

fn intersect(shape: &Shape, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    match shape {
        Shape::Sphere { center, radius } => {
            let oc = o - Vector3::from(*center);
            let b = oc.dot(d);
            let c = oc.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            let t0 = -b - s;
            let t1 = -b + s;
            if t0 > MIN_T {
                Some(t0)
            } else if t1 > MIN_T {
                Some(t1)
            } else {
                None
            }
        }
        Shape::Quad {
            center,
            u_axis,
            v_axis,
        } => {
            let c = Vector3::from(*center);
            let u = Vector3::from(*u_axis);
            let v = Vector3::from(*v_axis);
            let n = u.cross(&v);
            let t = plane_hit(&c, &n, o, d)?;
            let rel = o + d * t - c;
            let a = rel.dot(&u) / u.norm_squared();
            let b = rel.dot(&v) / v.norm_squared();
            (a.abs() <= 1.0 && b.abs() <= 1.0).then_some(t)
        }
        Shape::Plane { point, normal } => {
            plane_hit(&Vector3::from(*point), &Vector3::from(*normal), o, d)
        }
    }
}

fn plane_hit(
    p0: &Vector3<f64>,
    n: &Vector3<f64>,
    o: &Vector3<f64>,
    d: &Vector3<f64>,
) -> Option<f64> {
    let denom = d.dot(n);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (p0 - o).dot(n) / denom;
    (t > MIN_T && t.is_finite()).then_some(t)
}

/// Nearest intersection of a world-space ray with primitives whose `cg` flag
/// equals `cg`.
pub fn cast_ray(
    primitives: &[Primitive],
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    cg: bool,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, p) in primitives.iter().enumerate() {
        if p.cg != cg {
            continue;
        }
        if let Some(t) = intersect(&p.shape, origin, dir) {
            if best.is_none_or(|b| t < b.t) {
                best = Some(Hit { t, primitive: i });
            }
        }
    }
    best
}

fn pixel_ray(pose: &CameraPose, i: usize, w: usize, h: usize) -> Vector3<f64> {
    let p = PixelCoord::center(i % w, i / w);
    let d = pixel_to_direction(p, w, h).expect("pixel centers are in range");
    pose.to_world(&d)
}

/// Renders frame `index` of the scene: real primitives only.
pub fn render_scene(spec: &SceneSpec, index: usize) -> Result<RenderedFrame> {
    spec.validate()?;
    let pose = spec.pose(index)?;
    let (w, h) = (spec.width, spec.height);
    let samples: Vec<([f32; 3], Option<f64>, SemanticLabel)> = par::map_indexed(w * h, |i| {
        let dir = pixel_ray(&pose, i, w, h);
        match cast_ray(&spec.primitives, &pose.position, &dir, false) {
            Some(hit) => {
                let prim = &spec.primitives[hit.primitive];
                let x = pose.position + dir * hit.t;
                (prim.texture.color_at(&x), Some(hit.t), prim.label)
            }
            None => (spec.sky_color, None, SemanticLabel::Sky),
        }
    });
    let pixels = samples.iter().map(|s| s.0).collect();
    let valid: Vec<bool> = samples.iter().map(|s| s.1.is_some()).collect();
    let values = samples.iter().map(|s| s.1.unwrap_or(0.0)).collect();
    let labels: Vec<SemanticLabel> = samples.iter().map(|s| s.2).collect();
    let uncertainty = label_uncertainty(&labels, w, h);
    Ok(RenderedFrame {
        frame: SphericalFrame::new(w, h, pixels, index)?,
        depth: DepthMap::from_scalar(ScalarMap::new(w, h, values, valid)?),
        semantics: SemanticMap::new(w, h, labels, uncertainty)?,
    })
}

fn label_uncertainty(labels: &[SemanticLabel], w: usize, h: usize) -> Vec<f64> {
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let l = labels[i];
            let left = labels[y * w + (x + w - 1) % w];
            let right = labels[y * w + (x + 1) % w];
            let up = if y > 0 { labels[i - w] } else { l };
            let down = if y + 1 < h { labels[i + w] } else { l };
            if [left, right, up, down].iter().all(|&n| n == l) {
                INTERIOR_UNCERTAINTY
            } else {
                BOUNDARY_UNCERTAINTY
            }
        })
        .collect()
}

/// Exact flow on frame `from`'s grid pointing to where each pixel's surface
/// point appears in frame `to`.
///
/// Pixels whose surface point is hidden in `to` are invalid. Sky pixels are
/// treated as points at infinity and move only with camera rotation.
/// Horizontal components take the shortest way around the seam.
pub fn ground_truth_flow(spec: &SceneSpec, from: usize, to: usize) -> Result<FlowField> {
    spec.validate()?;
    let a = spec.pose(from)?;
    let b = spec.pose(to)?;
    let (w, h) = (spec.width, spec.height);
    let flows: Vec<Option<[f64; 2]>> = par::map_indexed(w * h, |i| {
        let p = PixelCoord::center(i % w, i / w);
        let dir = pixel_ray(&a, i, w, h);
        let target_dir = match cast_ray(&spec.primitives, &a.position, &dir, false) {
            Some(hit) => {
                let x = a.position + dir * hit.t;
                let rel = x - b.position;
                let dist = rel.norm();
                if dist < 1e-9 {
                    return None;
                }
                let world = rel / dist;
                if let Some(block) = cast_ray(&spec.primitives, &b.position, &world, false) {
                    if block.t < dist * (1.0 - 1e-7) - 1e-7 {
                        return None;
                    }
                }
                world
            }
            None => dir,
        };
        let q = direction_to_pixel(&b.to_camera(&target_dir), w, h).ok()?;
        let mut dx = q.x - p.x;
        let wf = w as f64;
        if dx > wf / 2.0 {
            dx -= wf;
        } else if dx <= -wf / 2.0 {
            dx += wf;
        }
        Some([dx, q.y - p.y])
    });
    let valid = flows.iter().map(Option::is_some).collect();
    let u = flows.iter().map(|f| f.unwrap_or([0.0, 0.0])).collect();
    FlowField::new(w, h, u, valid)
}

/// Renders only the CG-flagged primitives for frame `index`.
///
/// Coverage is binary; depth is the range to the CG surface.
pub fn make_cg_layer(spec: &SceneSpec, index: usize) -> Result<CgLayer> {
    spec.validate()?;
    let pose = spec.pose(index)?;
    let (w, h) = (spec.width, spec.height);
    let samples: Vec<Option<([f32; 3], f64)>> = par::map_indexed(w * h, |i| {
        let dir = pixel_ray(&pose, i, w, h);
        cast_ray(&spec.primitives, &pose.position, &dir, true).map(|hit| {
            let prim = &spec.primitives[hit.primitive];
            (prim.texture.color_at(&(pose.position + dir * hit.t)), hit.t)
        })
    });
    let mut color = RgbaImage::transparent(w, h);
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for (i, s) in samples.into_iter().enumerate() {
        if let Some((c, t)) = s {
            color.pixels[i] = [c[0], c[1], c[2], 1.0];
            values[i] = t;
            valid[i] = true;
        }
    }
    CgLayer::new(
        color,
        DepthMap::from_scalar(ScalarMap::new(w, h, values, valid)?),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::warp_scalar_field;
    use crate::synth::{lateral_wall, Texture};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sphere_scene(radius: f64, dist: f64, path: &[CameraPose]) -> SceneSpec {
        SceneSpec::new(
            64,
            32,
            vec![Primitive {
                shape: Shape::Sphere {
                    center: [0.0, 0.0, 0.0],
                    radius: dist + radius,
                },
                label: SemanticLabel::Building,
                texture: Texture::noisy(1, [0.5, 0.5, 0.5], 2.0),
                cg: false,
            }],
            path,
        )
    }

    #[test]
    fn camera_inside_sphere_sees_constant_depth() {
        let spec = sphere_scene(0.0, 4.0, &[CameraPose::at(Vector3::zeros())]);
        let r = render_scene(&spec, 0).unwrap();
        assert_eq!(r.depth.valid_count(), 64 * 32);
        for v in &r.depth.values {
            assert_abs_diff_eq!(*v, 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn small_sphere_on_axis_is_four_meters_away() {
        let (w, h) = (64, 32);
        let (cx, cy) = (w / 2, h / 2);
        let axis = pixel_to_direction(PixelCoord::center(cx, cy), w, h).unwrap();
        let c = axis * 5.0;
        let spec = SceneSpec::new(
            w,
            h,
            vec![Primitive {
                shape: Shape::Sphere {
                    center: [c.x, c.y, c.z],
                    radius: 1.0,
                },
                label: SemanticLabel::Car,
                texture: Texture::flat([0.5, 0.5, 0.5]),
                cg: false,
            }],
            &[CameraPose::at(Vector3::zeros())],
        );
        let r = render_scene(&spec, 0).unwrap();
        assert_abs_diff_eq!(r.depth.get(cx, cy).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(r.semantics.labels[cy * w + cx], SemanticLabel::Car);
    }

    #[test]
    fn lateral_flow_is_inverse_to_depth() {
        let (w, h) = (512, 256);
        let (x, y) = (w / 4, h / 2);
        let mut rates = Vec::new();
        for d in [4.0, 8.0, 16.0] {
            let spec = lateral_wall(w, h, d, 0.01, 2);
            let u = ground_truth_flow(&spec, 0, 1).unwrap().get(x, y).unwrap();
            rates.push(u[0].abs() * d);
        }
        for r in &rates[1..] {
            assert!((r / rates[0] - 1.0).abs() < 1e-3, "{rates:?}");
        }
    }

    #[test]
    fn forward_motion_flow_is_radial_about_the_foe() {
        // Radial on the sphere: start point, end point and the FOE lie on
        // one great circle, and the backward flow moves toward the FOE.
        let (w, h) = (256, 128);
        let spec = crate::synth::wall_approach(w, h, 10.0, 0.5, 2);
        let f = ground_truth_flow(&spec, 1, 0).unwrap();
        let foe = Vector3::new(1.0, 0.0, 0.0);
        let mut n = 0;
        for y in (h / 2 - 30..h / 2 + 30).step_by(5) {
            for x in (0..30).chain(w - 30..w).step_by(3) {
                let Some(u) = f.get(x, y) else { continue };
                let p = PixelCoord::center(x, y);
                let a = pixel_to_direction(p, w, h).unwrap();
                let q = PixelCoord::new(p.x + u[0], p.y + u[1]);
                let b = crate::sphere::pixel_to_direction_wrapped(q, w, h).unwrap();
                assert!(foe.dot(&a.cross(&b)).abs() < 1e-9, "({x},{y})");
                assert!(
                    crate::sphere::angle_between(&b, &foe) < crate::sphere::angle_between(&a, &foe)
                );
                n += 1;
            }
        }
        assert!(n > 50);
        let at = f.get(0, h / 2).unwrap();
        assert!(at[0].abs() < 0.05 && at[1].abs() < 0.05);
    }

    #[test]
    fn empty_scene_is_sky_without_depth() {
        let spec = SceneSpec::new(32, 16, vec![], &[CameraPose::at(Vector3::zeros())]);
        let r = render_scene(&spec, 0).unwrap();
        assert_eq!(r.depth.valid_count(), 0);
        assert!(r.semantics.labels.iter().all(|&l| l == SemanticLabel::Sky));
        assert!(r.frame.pixels.iter().all(|&p| p == spec.sky_color));
    }

    #[test]
    fn static_camera_has_zero_flow() {
        let pose = CameraPose::at(Vector3::new(0.3, -0.2, 0.1));
        let spec = sphere_scene(0.0, 5.0, &[pose, pose]);
        let f = ground_truth_flow(&spec, 1, 0).unwrap();
        assert_eq!(f.valid_count(), 64 * 32);
        for u in &f.u {
            assert!(u[0].abs() < 1e-9 && u[1].abs() < 1e-9);
        }
    }

    #[test]
    fn lateral_wall_flow_matches_parallax() {
        // Camera slides along +x in front of a wall at y = d; the pixel
        // looking straight at the wall sees it move by atan(B/d).
        let (d, b) = (10.0, 0.5);
        let spec = lateral_wall(256, 128, d, b, 2);
        let f = ground_truth_flow(&spec, 0, 1).unwrap();
        // Direction +y is θ = π/2, φ = π/2: column w/4, row h/2.
        let x = 256 / 4;
        let y = 128 / 2;
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let u = f.get(x, y).unwrap();
        // Exact expectation from the analytic surface point.
        let phi0 = 2.0 * PI * px / 256.0;
        let theta0 = PI * py / 128.0;
        let dir = Vector3::new(
            theta0.sin() * phi0.cos(),
            theta0.sin() * phi0.sin(),
            theta0.cos(),
        );
        let x_hit = dir * (d / dir.y);
        let rel = x_hit - Vector3::new(b, 0.0, 0.0);
        let phi1 = rel.y.atan2(rel.x);
        let expected = (phi1 - phi0) * 256.0 / (2.0 * PI);
        assert_abs_diff_eq!(u[0], expected, epsilon = 1e-9);
        // And it is close to the small-angle reading atan(B/d).
        let approx_px = (b / d).atan() * 256.0 / (2.0 * PI);
        assert!(
            (u[0].abs() - approx_px).abs() < 0.05,
            "{} vs {approx_px}",
            u[0]
        );
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-3);
    }

    #[test]
    fn flow_round_trip_returns_to_start() {
        let spec = crate::synth::street(128, 64, 3, 0.4);
        let fwd = ground_truth_flow(&spec, 1, 2).unwrap();
        let bwd = ground_truth_flow(&spec, 2, 1).unwrap();
        let mut checked = 0;
        for y in 0..64 {
            for x in 0..128 {
                let Some(u) = fwd.get(x, y) else { continue };
                let src = spec.pose(1).unwrap();
                let src_dir = pixel_ray(&src, y * 128 + x, 128, 64);
                let origin = cast_ray(&spec.primitives, &src.position, &src_dir, false);
                let qx = x as f64 + 0.5 + u[0];
                let qy = y as f64 + 0.5 + u[1];
                // Evaluate the reverse flow analytically at the landing point
                // by casting from frame 2 through that continuous pixel.
                let a = spec.pose(2).unwrap();
                let d = crate::sphere::pixel_to_direction_wrapped(PixelCoord::new(qx, qy), 128, 64);
                let Ok(d) = d else { continue };
                let dir = a.to_world(&d);
                let Some(hit) = cast_ray(&spec.primitives, &a.position, &dir, false) else {
                    continue;
                };
                // Landing points next to an occluding edge may see another
                // surface; only same-surface correspondences must invert.
                if origin.map(|o| o.primitive) != Some(hit.primitive) {
                    continue;
                }
                let b = spec.pose(1).unwrap();
                let back = (a.position + dir * hit.t - b.position).normalize();
                let r = direction_to_pixel(&b.to_camera(&back), 128, 64).unwrap();
                let mut ex = r.x - (x as f64 + 0.5);
                if ex > 64.0 {
                    ex -= 128.0;
                } else if ex < -64.0 {
                    ex += 128.0;
                }
                assert!(ex.abs() < 1e-6 && (r.y - (y as f64 + 0.5)).abs() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 1000);
        assert!(bwd.valid_count() > 1000);
    }

    #[test]
    fn warped_truth_depth_matches_geometry() {
        // Warp frame t-1 depth onto frame t with the backward flow and compare
        // against the range predicted from frame t-1's surface points.
        let (w, h) = (512, 256);
        let spec = lateral_wall(w, h, 8.0, 0.3, 2);
        let prev = render_scene(&spec, 0).unwrap();
        let curr = render_scene(&spec, 1).unwrap();
        let flow = ground_truth_flow(&spec, 1, 0).unwrap();
        let warped = warp_scalar_field(&prev.depth, &flow).unwrap();
        let (a, b) = (spec.pose(0).unwrap(), spec.pose(1).unwrap());
        let mut n = 0;
        for y in h / 3..2 * h / 3 {
            for x in w / 8..3 * w / 8 {
                let (Some(dw), Some(dc)) = (warped.get(x, y), curr.depth.get(x, y)) else {
                    continue;
                };
                // The warped value is the range from camera t-1 to the same
                // point, which differs from frame t's range by the baseline
                // geometry.
                let dir = pixel_ray(&b, y * w + x, w, h);
                let pt = b.position + dir * dc;
                let expect = (pt - a.position).norm();
                assert!((dw - expect).abs() < 1e-3 * expect, "{dw} vs {expect}");
                n += 1;
            }
        }
        assert!(n > 200);
    }

    #[test]
    fn cg_layer_only_contains_cg_primitives() {
        let mut spec = sphere_scene(0.0, 6.0, &[CameraPose::at(Vector3::zeros())]);
        spec.primitives.push(Primitive {
            shape: Shape::Sphere {
                center: [3.0, 0.0, 0.0],
                radius: 1.0,
            },
            label: SemanticLabel::Car,
            texture: Texture::flat([0.9, 0.1, 0.1]),
            cg: true,
        });
        let real = render_scene(&spec, 0).unwrap();
        assert!(real
            .semantics
            .labels
            .iter()
            .all(|&l| l == SemanticLabel::Building));
        let cg = make_cg_layer(&spec, 0).unwrap();
        assert!(cg.coverage_count() > 0);
        for i in 0..cg.color.pixels.len() {
            if cg.color.covered(i) {
                let d = cg.depth.values[i];
                assert!((2.0 - 1e-9..=4.0).contains(&d));
            }
        }
    }

    #[test]
    fn boundaries_are_uncertain() {
        let spec = crate::synth::street(128, 64, 1, 0.5);
        let r = render_scene(&spec, 0).unwrap();
        let g = &r.semantics.uncertainty;
        assert!(g.contains(&BOUNDARY_UNCERTAINTY));
        assert!(g.iter().filter(|&&v| v == INTERIOR_UNCERTAINTY).count() > g.len() / 2);
    }
}
