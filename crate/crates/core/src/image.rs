//! Raster containers shared by every stage.
//!
//! Color frames are stored in linear-light RGB; conversion to and from 8-bit
//! sRGB happens only at the IO boundary.

use std::ops::{Deref, DerefMut};

use crate::error::{check_dims, Error, Result};

/// Luma weights used for grayscale conversion and salience.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

#[inline]
pub fn luma(rgb: [f32; 3]) -> f32 {
    LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2]
}

#[inline]
pub fn srgb_to_linear(v: f32) -> f32 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn linear_to_srgb(v: f32) -> f32 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
pub fn decode_srgb8(v: u8) -> f32 {
    srgb_to_linear(v as f32 / 255.0)
}

#[inline]
pub fn encode_srgb8(v: f32) -> u8 {
    (linear_to_srgb(v) * 255.0).round() as u8
}

/// Single-channel float image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain("image must be non-empty".into()));
        }
        if data.len() != width * height {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let data = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Equirectangular color frame in linear-light RGB.
///
/// Columns span azimuth `[0, 2π)` and rows span polar angle `[0, π]`, so the
/// width is always twice the height.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f32; 3]>,
    pub timestamp_index: usize,
}

impl SphericalFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>, index: usize) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::Domain(format!(
                "equirectangular frame must be 2:1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Domain(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp_index: index,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height], 0)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|&p| luma(p)).collect(),
        }
    }
}

/// Per-pixel scalar with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(Error::Domain("scalar map buffers do not match dims".into()));
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Metric depth from the camera center in meters.
///
/// Valid entries are always finite and strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap(pub ScalarMap);

impl DepthMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        DepthMap(ScalarMap::invalid(width, height))
    }

    /// Wraps a scalar map, invalidating entries that are not positive and finite.
    pub fn from_scalar(mut map: ScalarMap) -> Self {
        for (v, ok) in map.values.iter_mut().zip(map.valid.iter_mut()) {
            if !(v.is_finite() && *v > 0.0) {
                *ok = false;
            }
            if !*ok {
                *v = 0.0;
            }
        }
        DepthMap(map)
    }

    pub fn into_inner(self) -> ScalarMap {
        self.0
    }
}

impl Deref for DepthMap {
    type Target = ScalarMap;
    fn deref(&self) -> &ScalarMap {
        &self.0
    }
}

impl DerefMut for DepthMap {
    fn deref_mut(&mut self) -> &mut ScalarMap {
        &mut self.0
    }
}

/// Probability that the real scene lies in front of the CG layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Domain(
                "probability buffer does not match dims".into(),
            ));
        }
        if let Some(bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("probability {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, p: f64) -> Self {
        Self {
            width,
            height,
            values: vec![p.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Color plus coverage of a CG layer in linear-light RGBA.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbaImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f32; 4]>,
}

impl RgbaImage {
    pub fn transparent(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0.0; 4]; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn covered(&self, i: usize) -> bool {
        self.pixels[i][3] > 0.0
    }
}

/// A rendered virtual layer: color with coverage mask and its depth.
#[derive(Clone, Debug, PartialEq)]
pub struct CgLayer {
    pub color: RgbaImage,
    pub depth: DepthMap,
}

impl CgLayer {
    pub fn new(color: RgbaImage, depth: DepthMap) -> Result<Self> {
        check_dims(color.dims(), depth.dims())?;
        for (i, px) in color.pixels.iter().enumerate() {
            if px[3] > 0.0 && !depth.valid[i] {
                return Err(Error::Domain(format!(
                    "CG pixel {i} has coverage but no valid depth"
                )));
            }
        }
        Ok(Self { color, depth })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            color: RgbaImage::transparent(width, height),
            depth: DepthMap::invalid(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }

    pub fn coverage_count(&self) -> usize {
        (0..self.color.pixels.len())
            .filter(|&i| self.color.covered(i))
            .count()
    }
}
