//! sRGB PNG frames and RGBA CG layers, converted to and from linear light.

use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage, RgbaImage as PngRgba};

use super::{pfm, read_bytes, write_bytes};
use crate::error::{check_dims, Error, Result};
use crate::image::{decode_srgb8, encode_srgb8, CgLayer, RgbaImage, SphericalFrame};

fn image_err(source: image::ImageError) -> Error {
    Error::format("PNG", source.to_string())
}

fn load(bytes: &[u8]) -> Result<DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(image_err)
}

fn encode(img: DynamicImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(image_err)?;
    Ok(buf.into_inner())
}

pub fn read_frame(path: &Path, index: usize) -> Result<SphericalFrame> {
    decode_frame(&read_bytes(path)?, index)
}

pub fn decode_frame(bytes: &[u8], index: usize) -> Result<SphericalFrame> {
    let rgb = load(bytes)?.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb
        .pixels()
        .map(|p| [decode_srgb8(p[0]), decode_srgb8(p[1]), decode_srgb8(p[2])])
        .collect();
    SphericalFrame::new(w, h, pixels, index)
}

pub fn encode_frame_rgb8(frame: &SphericalFrame) -> Vec<u8> {
    frame
        .pixels
        .iter()
        .flat_map(|p| [encode_srgb8(p[0]), encode_srgb8(p[1]), encode_srgb8(p[2])])
        .collect()
}

pub fn encode_frame(frame: &SphericalFrame) -> Result<Vec<u8>> {
    encode_rgb8(frame.width, frame.height, encode_frame_rgb8(frame))
}

pub fn write_frame(path: &Path, frame: &SphericalFrame) -> Result<()> {
    write_bytes(path, &encode_frame(frame)?)
}

/// PNG of raw 8-bit RGB samples, without color conversion.
pub fn encode_rgb8(width: usize, height: usize, data: Vec<u8>) -> Result<Vec<u8>> {
    let img = RgbImage::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| Error::format("PNG", "buffer does not match dimensions"))?;
    encode(DynamicImage::ImageRgb8(img))
}

pub fn write_rgb8(path: &Path, width: usize, height: usize, data: Vec<u8>) -> Result<()> {
    write_bytes(path, &encode_rgb8(width, height, data)?)
}

/// Reads an RGBA PNG: color is sRGB, alpha is linear coverage.
pub fn read_rgba(path: &Path) -> Result<RgbaImage> {
    decode_rgba(&read_bytes(path)?)
}

pub fn decode_rgba(bytes: &[u8]) -> Result<RgbaImage> {
    let rgba = load(bytes)?.into_rgba8();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let pixels = rgba
        .pixels()
        .map(|p| {
            [
                decode_srgb8(p[0]),
                decode_srgb8(p[1]),
                decode_srgb8(p[2]),
                p[3] as f32 / 255.0,
            ]
        })
        .collect();
    Ok(RgbaImage {
        width: w,
        height: h,
        pixels,
    })
}

pub fn write_rgba(path: &Path, img: &RgbaImage) -> Result<()> {
    write_bytes(path, &encode_rgba(img)?)
}

pub fn encode_rgba(img: &RgbaImage) -> Result<Vec<u8>> {
    let data = img
        .pixels
        .iter()
        .flat_map(|p| {
            [
                encode_srgb8(p[0]),
                encode_srgb8(p[1]),
                encode_srgb8(p[2]),
                (p[3].clamp(0.0, 1.0) * 255.0).round() as u8,
            ]
        })
        .collect();
    let out = PngRgba::from_raw(img.width as u32, img.height as u32, data)
        .ok_or_else(|| Error::format("PNG", "buffer does not match dimensions"))?;
    encode(DynamicImage::ImageRgba8(out))
}

/// Loads a CG layer from its RGBA color PNG and PFM depth.
pub fn read_cg_layer(color: &Path, depth: &Path) -> Result<CgLayer> {
    let c = read_rgba(color)?;
    let d = pfm::read_depth(depth)?;
    check_dims(c.dims(), d.dims())?;
    CgLayer::new(c, d)
}

pub fn write_cg_layer(color: &Path, depth: &Path, layer: &CgLayer) -> Result<()> {
    write_rgba(color, &layer.color)?;
    pfm::write_depth(depth, &layer.depth)
}
