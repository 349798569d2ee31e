//! Gaussian image pyramid and flow resampling for the coarse-to-fine solver.

use crate::image::GrayImage;
use crate::par;

#[inline]
pub(super) fn wrap_index(i: isize, n: usize, wrap: bool) -> usize {
    if wrap {
        i.rem_euclid(n as isize) as usize
    } else {
        i.clamp(0, n as isize - 1) as usize
    }
}

/// Bilinear sample in index space; `x` wraps or clamps, `y` always clamps.
#[inline]
pub(super) fn sample(data: &[f32], w: usize, h: usize, x: f32, y: f32, wrap: bool) -> f32 {
    let x = if wrap {
        x.rem_euclid(w as f32)
    } else {
        x.clamp(0.0, (w - 1) as f32)
    };
    let y = y.clamp(0.0, (h - 1) as f32);
    let x0f = x.floor();
    let y0f = y.floor();
    let fx = x - x0f;
    let fy = y - y0f;
    let x0 = (x0f as usize).min(w - 1);
    let y0 = (y0f as usize).min(h - 1);
    let x1 = wrap_index(x0 as isize + 1, w, wrap);
    let y1 = (y0 + 1).min(h - 1);
    let a = data[y0 * w + x0];
    let b = data[y0 * w + x1];
    let c = data[y1 * w + x0];
    let d = data[y1 * w + x1];
    (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn blur(img: &GrayImage, sigma: f32, wrap: bool) -> GrayImage {
    let (w, h) = img.dims();
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0f32; w * h];
    par::for_each_row(&mut tmp, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = k
                .iter()
                .enumerate()
                .map(|(j, kv)| {
                    kv * img.data[y * w + wrap_index(x as isize + j as isize - r, w, wrap)]
                })
                .sum();
        }
    });
    let mut data = vec![0.0f32; w * h];
    par::for_each_row(&mut data, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[wrap_index(y as isize + j as isize - r, h, false) * w + x])
                .sum();
        }
    });
    GrayImage {
        width: w,
        height: h,
        data,
    }
}

fn downsample(img: &GrayImage, nw: usize, nh: usize, scale: f32, wrap: bool) -> GrayImage {
    let sigma = 0.6 * (1.0 / (scale * scale) - 1.0).sqrt();
    let smooth = blur(img, sigma, wrap);
    let (w, h) = img.dims();
    let sx = w as f32 / nw as f32;
    let sy = h as f32 / nh as f32;
    let mut data = vec![0.0f32; nw * nh];
    par::for_each_row(&mut data, nw, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let fx = (x as f32 + 0.5) * sx - 0.5;
            let fy = (y as f32 + 0.5) * sy - 0.5;
            *out = sample(&smooth.data, w, h, fx, fy, wrap);
        }
    });
    GrayImage {
        width: nw,
        height: nh,
        data,
    }
}

/// Level sizes from finest to coarsest.
pub(super) fn level_sizes(
    w: usize,
    h: usize,
    scale: f64,
    levels: usize,
    min_size: usize,
) -> Vec<(usize, usize)> {
    let mut sizes = vec![(w, h)];
    while sizes.len() < levels {
        let (pw, ph) = *sizes.last().unwrap();
        let nw = (pw as f64 * scale).round() as usize;
        let nh = (ph as f64 * scale).round() as usize;
        if nw < min_size || nh < min_size || (nw, nh) == (pw, ph) {
            break;
        }
        sizes.push((nw, nh));
    }
    sizes
}

pub(super) fn build(
    img: &GrayImage,
    sizes: &[(usize, usize)],
    scale: f64,
    wrap: bool,
) -> Vec<GrayImage> {
    let mut out = vec![img.clone()];
    for &(nw, nh) in &sizes[1..] {
        let next = downsample(out.last().unwrap(), nw, nh, scale as f32, wrap);
        out.push(next);
    }
    out
}

/// Resamples a coarse flow to a finer grid, rescaling the vectors.
pub(super) fn upsample_flow(
    flow: &[[f32; 2]],
    (cw, ch): (usize, usize),
    (fw, fh): (usize, usize),
    wrap: bool,
) -> Vec<[f32; 2]> {
    let ux: Vec<f32> = flow.iter().map(|v| v[0]).collect();
    let uy: Vec<f32> = flow.iter().map(|v| v[1]).collect();
    let rx = fw as f32 / cw as f32;
    let ry = fh as f32 / ch as f32;
    let mut out = vec![[0.0f32; 2]; fw * fh];
    par::for_each_row(&mut out, fw, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let cx = (x as f32 + 0.5) / rx - 0.5;
            let cy = (y as f32 + 0.5) / ry - 0.5;
            *out = [
                sample(&ux, cw, ch, cx, cy, wrap) * rx,
                sample(&uy, cw, ch, cx, cy, wrap) * ry,
            ];
        }
    });
    out
}
