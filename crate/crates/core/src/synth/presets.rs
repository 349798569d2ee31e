//! Ready-made scenes used by tests, benches and the `synth` command.

use nalgebra::Vector3;

use super::{Primitive, SceneSpec, Shape, Texture};
use crate::semantics::SemanticLabel;
use crate::sphere::CameraPose;

fn prim(shape: Shape, label: SemanticLabel, texture: Texture) -> Primitive {
    Primitive {
        shape,
        label,
        texture,
        cg: false,
    }
}

fn quad(center: [f64; 3], u_axis: [f64; 3], v_axis: [f64; 3]) -> Shape {
    Shape::Quad {
        center,
        u_axis,
        v_axis,
    }
}

fn straight_path(frames: usize, step: Vector3<f64>) -> Vec<CameraPose> {
    (0..frames)
        .map(|i| CameraPose::at(step * i as f64))
        .collect()
}

/// A large textured wall in the plane `y = distance`, camera sliding along
/// `+x` by `baseline` per frame.
pub fn lateral_wall(
    width: usize,
    height: usize,
    distance: f64,
    baseline: f64,
    frames: usize,
) -> SceneSpec {
    let wall = prim(
        quad([0.0, distance, 0.0], [400.0, 0.0, 0.0], [0.0, 0.0, 400.0]),
        SemanticLabel::Building,
        Texture::noisy(11, [0.5, 0.42, 0.35], 1.5),
    );
    SceneSpec::new(
        width,
        height,
        vec![wall],
        &straight_path(frames, Vector3::new(baseline, 0.0, 0.0)),
    )
}

/// A wall facing the camera at `x = distance`, approached by `step` per
/// frame. The divergence point sits at the wall center.
pub fn wall_approach(
    width: usize,
    height: usize,
    distance: f64,
    step: f64,
    frames: usize,
) -> SceneSpec {
    let wall = prim(
        quad([distance, 0.0, 0.0], [0.0, 40.0, 0.0], [0.0, 0.0, 40.0]),
        SemanticLabel::Building,
        Texture::noisy(21, [0.45, 0.4, 0.38], 1.5),
    );
    let ground = prim(
        Shape::Plane {
            point: [0.0, 0.0, -1.6],
            normal: [0.0, 0.0, 1.0],
        },
        SemanticLabel::Road,
        Texture::noisy(22, [0.2, 0.2, 0.22], 1.2),
    );
    SceneSpec::new(
        width,
        height,
        vec![wall, ground],
        &straight_path(frames, Vector3::new(step, 0.0, 0.0)),
    )
}

/// A street canyon driven along `+x` by `step` meters per frame.
///
/// Real content: road, a grass verge, building walls on both sides, a far
/// facade, two trees and a parked car. CG content: a billboard hidden behind
/// the left facade, a dark sphere floating against the sky and a small
/// sphere resting on the road.
pub fn street(width: usize, height: usize, frames: usize, step: f64) -> SceneSpec {
    use SemanticLabel::*;
    let mut p = vec![
        prim(
            Shape::Plane {
                point: [0.0, 0.0, -1.6],
                normal: [0.0, 0.0, 1.0],
            },
            Road,
            Texture::noisy(101, [0.2, 0.2, 0.22], 1.5),
        ),
        prim(
            quad([15.0, -6.25, -1.59], [35.0, 0.0, 0.0], [0.0, 1.75, 0.0]),
            Grass,
            Texture::noisy(102, [0.12, 0.3, 0.08], 2.5),
        ),
        prim(
            quad([10.0, 6.0, 6.2], [30.0, 0.0, 0.0], [0.0, 0.0, 7.8]),
            Building,
            Texture::noisy(103, [0.42, 0.28, 0.2], 1.2),
        ),
        prim(
            quad([15.0, -8.0, 4.2], [35.0, 0.0, 0.0], [0.0, 0.0, 5.8]),
            Building,
            Texture::noisy(104, [0.33, 0.33, 0.36], 1.2),
        ),
        prim(
            quad([60.0, -1.0, 6.0], [0.0, 7.0, 0.0], [0.0, 0.0, 7.6]),
            Building,
            Texture::noisy(105, [0.38, 0.34, 0.3], 1.0),
        ),
        prim(
            quad([14.0, -3.5, -0.9], [2.0, 0.0, 0.0], [0.0, 0.0, 0.7]),
            Car,
            Texture::noisy(106, [0.5, 0.08, 0.06], 2.0),
        ),
    ];
    for (i, x) in [8.0, 22.0].into_iter().enumerate() {
        p.push(prim(
            Shape::Sphere {
                center: [x, -5.2, 2.4],
                radius: 1.5,
            },
            Tree,
            Texture::noisy(110 + i as u64, [0.1, 0.28, 0.07], 3.0),
        ));
        p.push(prim(
            quad([x, -5.2, -0.35], [0.25, 0.0, 0.0], [0.0, 0.0, 1.3]),
            TreeTrunk,
            Texture::noisy(120 + i as u64, [0.25, 0.16, 0.08], 3.0),
        ));
    }
    p.push(Primitive {
        shape: quad([12.0, 14.0, 3.0], [8.0, 0.0, 0.0], [0.0, 0.0, 4.0]),
        label: Building,
        texture: Texture {
            contrast: 0.3,
            ..Texture::noisy(130, [0.85, 0.75, 0.25], 0.8)
        },
        cg: true,
    });
    p.push(Primitive {
        shape: Shape::Sphere {
            center: [18.0, 0.0, 14.0],
            radius: 2.5,
        },
        label: Unknown,
        texture: Texture {
            contrast: 0.3,
            ..Texture::noisy(131, [0.12, 0.04, 0.04], 1.0)
        },
        cg: true,
    });
    p.push(Primitive {
        shape: Shape::Sphere {
            center: [9.0, 1.5, -1.0],
            radius: 0.6,
        },
        label: Unknown,
        texture: Texture {
            contrast: 0.3,
            ..Texture::noisy(132, [0.1, 0.35, 0.8], 2.0)
        },
        cg: true,
    });
    SceneSpec::new(
        width,
        height,
        p,
        &straight_path(frames, Vector3::new(step, 0.0, 0.0)),
    )
}
