#![allow(dead_code)]

use nalgebra::Vector3;
use omniocc::flow::FlowField;
use omniocc::image::GrayImage;
use omniocc::synth::value_noise;

/// Value-noise texture with features a few pixels across.
pub fn texture(w: usize, h: usize, seed: u64) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        let p = Vector3::new(x as f64 / 3.0, y as f64 / 3.0, 0.5);
        let fine = value_noise(p, seed);
        let coarse = value_noise(p / 4.0, seed ^ 0x9e37);
        (0.6 * fine + 0.4 * coarse) as f32
    })
}

/// `prev` moved by `(sx, sy)` pixels: wrapped horizontally, clamped
/// vertically.
pub fn shifted(prev: &GrayImage, sx: i64, sy: i64) -> GrayImage {
    let (w, h) = prev.dims();
    GrayImage::from_fn(w, h, |x, y| {
        let xs = (x as i64 - sx).rem_euclid(w as i64) as usize;
        let ys = (y as i64 - sy).clamp(0, h as i64 - 1) as usize;
        prev.get(xs, ys)
    })
}

/// Exact flow of [`shifted`], skipping rows that touch the clamped border.
pub fn shift_truth(w: usize, h: usize, sx: i64, sy: i64) -> FlowField {
    let margin = sy.unsigned_abs() as usize + 1;
    FlowField::from_fn(w, h, |_, y| {
        (y >= margin && y + margin < h).then_some([sx as f64, sy as f64])
    })
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
