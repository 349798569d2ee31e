//! Deterministic 3D value noise for procedural surface textures.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    pub seed: u64,
    /// Mean linear-light color.
    pub base: [f32; 3],
    /// Relative brightness swing, `0` for a flat color.
    pub contrast: f32,
    /// Lattice cells per meter of the first octave.
    pub frequency: f64,
    pub octaves: u32,
}

impl Texture {
    pub fn flat(base: [f32; 3]) -> Self {
        Self {
            seed: 0,
            base,
            contrast: 0.0,
            frequency: 1.0,
            octaves: 1,
        }
    }

    pub fn noisy(seed: u64, base: [f32; 3], frequency: f64) -> Self {
        Self {
            seed,
            base,
            contrast: 1.2,
            frequency,
            octaves: 3,
        }
    }

    pub fn color_at(&self, p: &Vector3<f64>) -> [f32; 3] {
        if self.contrast == 0.0 {
            return self.base;
        }
        let mut amp = 1.0;
        let mut freq = self.frequency;
        let mut sum = 0.0;
        let mut norm = 0.0;
        for o in 0..self.octaves.max(1) {
            sum += amp * value_noise(p * freq, self.seed.wrapping_add(o as u64 * 0x9E37));
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        let n = (sum / norm) as f32; // in [0, 1]
        let gain = (1.0 + self.contrast * (n - 0.5)).max(0.0);
        [
            (self.base[0] * gain).clamp(0.0, 1.0),
            (self.base[1] * gain).clamp(0.0, 1.0),
            (self.base[2] * gain).clamp(0.0, 1.0),
        ]
    }
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn lattice(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    let h = splitmix(seed ^ splitmix(ix as u64 ^ splitmix(iy as u64 ^ splitmix(iz as u64))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Trilinear-smoothstep interpolated lattice noise in `[0, 1]`.
pub fn value_noise(p: Vector3<f64>, seed: u64) -> f64 {
    let base = p.map(f64::floor);
    let f = p - base;
    let (ix, iy, iz) = (base.x as i64, base.y as i64, base.z as i64);
    let (sx, sy, sz) = (smooth(f.x), smooth(f.y), smooth(f.z));
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let wx = if dx == 0 { 1.0 - sx } else { sx };
                let wy = if dy == 0 { 1.0 - sy } else { sy };
                let wz = if dz == 0 { 1.0 - sz } else { sz };
                acc += wx * wy * wz * lattice(ix + dx, iy + dy, iz + dz, seed);
            }
        }
    }
    acc
}
