//! Coarse-to-fine primal-dual TV-L1 optical flow.
//!
//! Each level alternates a pointwise thresholding step on the linearized
//! data term with a projected dual ascent on the total variation of each
//! flow component. All updates are Jacobi style: a sweep reads only buffers
//! that the same sweep does not write, so results are identical for any
//! number of worker threads.

use crate::error::{check_dims, Result};
use crate::image::GrayImage;
use crate::par;

use super::pyramid::{self, sample, wrap_index};
use super::{FlowField, FlowParams};

/// Images whose dynamic range is below this are treated as constant.
const FLAT_RANGE: f32 = 1e-6;
const GRAD_EPS: f32 = 1e-10;

/// Estimates flow on the grid of `prev` pointing to correspondences in `curr`.
pub fn compute_flow(prev: &GrayImage, curr: &GrayImage, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    check_dims(prev.dims(), curr.dims())?;
    let (w, h) = prev.dims();

    if is_flat(prev) && is_flat(curr) {
        return Ok(FlowField::zeros(w, h));
    }

    let wrap = params.wrap_horizontal;
    let sizes = pyramid::level_sizes(
        w,
        h,
        params.pyramid_scale,
        params.levels,
        params.min_level_size,
    );
    let p0 = pyramid::build(prev, &sizes, params.pyramid_scale, wrap);
    let p1 = pyramid::build(curr, &sizes, params.pyramid_scale, wrap);

    let coarsest = *sizes.last().unwrap();
    let mut u = vec![[0.0f32; 2]; coarsest.0 * coarsest.1];
    for level in (0..sizes.len()).rev() {
        if level + 1 < sizes.len() {
            u = pyramid::upsample_flow(&u, sizes[level + 1], sizes[level], wrap);
        }
        solve_level(&p0[level], &p1[level], &mut u, params);
    }

    let field = FlowField::from_fn(w, h, |x, y| {
        let v = u[y * w + x];
        (v[0].is_finite() && v[1].is_finite()).then(|| [v[0] as f64, v[1] as f64])
    });
    Ok(field)
}

fn is_flat(img: &GrayImage) -> bool {
    let (lo, hi) = img
        .data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo < FLAT_RANGE
}

fn warp_image(img: &GrayImage, u: &[[f32; 2]], wrap: bool) -> Vec<f32> {
    let (w, h) = img.dims();
    let mut out = vec![0.0f32; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let v = u[y * w + x];
            *o = sample(&img.data, w, h, x as f32 + v[0], y as f32 + v[1], wrap);
        }
    });
    out
}

fn central_gradient(data: &[f32], w: usize, h: usize, wrap: bool) -> Vec<[f32; 2]> {
    let mut out = vec![[0.0f32; 2]; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        let ym = wrap_index(y as isize - 1, h, false);
        let yp = wrap_index(y as isize + 1, h, false);
        for (x, g) in row.iter_mut().enumerate() {
            let xm = wrap_index(x as isize - 1, w, wrap);
            let xp = wrap_index(x as isize + 1, w, wrap);
            // One-sided at clamped borders, central elsewhere.
            let sx = if wrap { 2.0 } else { (xp - xm).max(1) as f32 };
            let sy = (yp - ym).max(1) as f32;
            let gx = (data[y * w + xp] - data[y * w + xm]) / sx;
            let gy = (data[yp * w + x] - data[ym * w + x]) / sy;
            *g = [gx, gy];
        }
    });
    out
}

/// Forward difference of component `c` of `u` at `(x, y)`, zero on the
/// non-periodic borders.
#[inline]
fn forward_diff(
    u: &[[f32; 2]],
    c: usize,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    wrap: bool,
) -> [f32; 2] {
    let i = y * w + x;
    let dx = if x + 1 < w {
        u[i + 1][c] - u[i][c]
    } else if wrap {
        u[y * w][c] - u[i][c]
    } else {
        0.0
    };
    let dy = if y + 1 < h {
        u[i + w][c] - u[i][c]
    } else {
        0.0
    };
    [dx, dy]
}

/// Discrete divergence, the negative adjoint of [`forward_diff`].
/// `p` holds `[p1x, p1y, p2x, p2y]`; `c` selects the component pair.
#[inline]
fn divergence(p: &[[f32; 4]], c: usize, x: usize, y: usize, w: usize, h: usize, wrap: bool) -> f32 {
    let i = y * w + x;
    let (ax, ay) = (2 * c, 2 * c + 1);
    let div_x = if wrap {
        let xm = if x == 0 { w - 1 } else { x - 1 };
        p[i][ax] - p[y * w + xm][ax]
    } else if x == 0 {
        p[i][ax]
    } else if x + 1 == w {
        -p[i - 1][ax]
    } else {
        p[i][ax] - p[i - 1][ax]
    };
    let div_y = if h == 1 {
        0.0
    } else if y == 0 {
        p[i][ay]
    } else if y + 1 == h {
        -p[i - w][ay]
    } else {
        p[i][ay] - p[i - w][ay]
    };
    div_x + div_y
}

fn solve_level(i0: &GrayImage, i1: &GrayImage, u: &mut [[f32; 2]], params: &FlowParams) {
    let (w, h) = i0.dims();
    let wrap = params.wrap_horizontal;
    let lt = (params.lambda * params.theta) as f32;
    let theta = params.theta as f32;
    let tt = (params.tau / params.theta) as f32;
    let mut p = vec![[0.0f32; 4]; w * h];

    for _ in 0..params.warps_per_level {
        let i1w = warp_image(i1, u, wrap);
        let grad = central_gradient(&i1w, w, h, wrap);
        let rho_c: Vec<f32> = (0..w * h)
            .map(|i| i1w[i] - grad[i][0] * u[i][0] - grad[i][1] * u[i][1] - i0.data[i])
            .collect();

        for _ in 0..params.iterations_per_warp() {
            // Primal: threshold the linearized residual, then add θ·div p.
            // Reads only this pixel's u and the (unchanged) dual field.
            par::for_each_row(u, w, |y, row| {
                for (x, uv) in row.iter_mut().enumerate() {
                    let i = y * w + x;
                    let [gx, gy] = grad[i];
                    let g2 = gx * gx + gy * gy;
                    let rho = rho_c[i] + gx * uv[0] + gy * uv[1];
                    let (dx, dy) = if rho < -lt * g2 {
                        (lt * gx, lt * gy)
                    } else if rho > lt * g2 {
                        (-lt * gx, -lt * gy)
                    } else if g2 > GRAD_EPS {
                        (-rho * gx / g2, -rho * gy / g2)
                    } else {
                        (0.0, 0.0)
                    };
                    uv[0] += dx + theta * divergence(&p, 0, x, y, w, h, wrap);
                    uv[1] += dy + theta * divergence(&p, 1, x, y, w, h, wrap);
                }
            });
            // Dual: projected ascent; reads neighbouring u, writes own p.
            let uref: &[[f32; 2]] = u;
            par::for_each_row(&mut p, w, |y, row| {
                for (x, pv) in row.iter_mut().enumerate() {
                    for c in 0..2 {
                        let [gx, gy] = forward_diff(uref, c, x, y, w, h, wrap);
                        let norm = 1.0 + tt * (gx * gx + gy * gy).sqrt();
                        pv[2 * c] = (pv[2 * c] + tt * gx) / norm;
                        pv[2 * c + 1] = (pv[2 * c + 1] + tt * gy) / norm;
                    }
                }
            });
        }

        if params.median_filter {
            let filtered = median3(u, w, h, wrap);
            u.copy_from_slice(&filtered);
        }
    }
}

fn median3(u: &[[f32; 2]], w: usize, h: usize, wrap: bool) -> Vec<[f32; 2]> {
    let mut out = vec![[0.0f32; 2]; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        let mut win = [0.0f32; 9];
        for (x, o) in row.iter_mut().enumerate() {
            for c in 0..2 {
                let mut k = 0;
                for dy in -1..=1isize {
                    let yy = wrap_index(y as isize + dy, h, false);
                    for dx in -1..=1isize {
                        let xx = wrap_index(x as isize + dx, w, wrap);
                        win[k] = u[yy * w + xx][c];
                        k += 1;
                    }
                }
                win.sort_unstable_by(f32::total_cmp);
                o[c] = win[4];
            }
        }
    });
    out
}

/// TV-L1 objective of `flow`, summed over pixels:
/// `Σ (|∇u_x| + |∇u_y|) + λ Σ |I_curr(p + u(p)) − I_prev(p)|`.
///
/// Gradients are forward differences (periodic horizontally); the warped
/// image is sampled bilinearly with horizontal wrap and vertical clamp.
/// Invalid flow pixels contribute as zero displacement.
pub fn tvl1_energy(
    prev: &GrayImage,
    curr: &GrayImage,
    flow: &FlowField,
    lambda: f64,
) -> Result<f64> {
    check_dims(prev.dims(), curr.dims())?;
    check_dims(prev.dims(), flow.dims())?;
    let (w, h) = prev.dims();
    let u: Vec<[f64; 2]> = flow
        .u
        .iter()
        .zip(&flow.valid)
        .map(|(v, &ok)| if ok { *v } else { [0.0; 2] })
        .collect();
    let curr64: Vec<f64> = curr.data.iter().map(|&v| v as f64).collect();
    let energy = par::sum_rows(h, |y| {
        let mut acc = 0.0;
        for x in 0..w {
            let i = y * w + x;
            let xp = if x + 1 < w { i + 1 } else { y * w };
            let down = (y + 1 < h).then(|| u[i + w]);
            for c in 0..2 {
                let dx = u[xp][c] - u[i][c];
                let dy = down.map_or(0.0, |d| d[c] - u[i][c]);
                acc += (dx * dx + dy * dy).sqrt();
            }
            let warped = sample64(&curr64, w, h, x as f64 + u[i][0], y as f64 + u[i][1]);
            acc += lambda * (warped - prev.data[i] as f64).abs();
        }
        acc
    });
    Ok(energy)
}

fn sample64(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.rem_euclid(w as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1) % w;
    let y1 = (y0 + 1).min(h - 1);
    (1.0 - fy) * ((1.0 - fx) * data[y0 * w + x0] + fx * data[y0 * w + x1])
        + fy * ((1.0 - fx) * data[y1 * w + x0] + fx * data[y1 * w + x1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        // <∇u, p> = -<u, div p> for both boundary modes.
        for wrap in [true, false] {
            let (w, h) = (7, 5);
            let u: Vec<[f32; 2]> = (0..w * h)
                .map(|i| [((i * 7 % 11) as f32).sin(), ((i * 3 % 5) as f32).cos()])
                .collect();
            let p: Vec<[f32; 4]> = (0..w * h)
                .map(|i| {
                    let s = i as f32;
                    [
                        (s * 0.3).sin(),
                        (s * 0.7).cos(),
                        (s * 1.1).sin(),
                        (s * 0.2).cos(),
                    ]
                })
                .collect();
            let mut lhs = 0.0f64;
            let mut rhs = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    for c in 0..2 {
                        let g = forward_diff(&u, c, x, y, w, h, wrap);
                        lhs += (g[0] * p[i][2 * c] + g[1] * p[i][2 * c + 1]) as f64;
                        rhs -= (u[i][c] * divergence(&p, c, x, y, w, h, wrap)) as f64;
                    }
                }
            }
            assert!((lhs - rhs).abs() < 1e-4, "wrap={wrap}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn identical_frames_energy_zero() {
        let img = GrayImage::from_fn(16, 8, |x, y| ((x * 3 + y) % 7) as f32 / 7.0);
        let e = tvl1_energy(&img, &img, &FlowField::zeros(16, 8), 100.0).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn constant_images_give_zero_flow() {
        let a = GrayImage::from_fn(32, 16, |_, _| 0.4);
        let f = compute_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(f.valid.iter().all(|&v| v));
        assert!(f.u.iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn dims_mismatch() {
        let a = GrayImage::from_fn(32, 16, |x, _| x as f32 / 32.0);
        let b = GrayImage::from_fn(30, 16, |x, _| x as f32 / 32.0);
        assert!(compute_flow(&a, &b, &FlowParams::default()).is_err());
        assert!(tvl1_energy(&a, &b, &FlowField::zeros(32, 16), 1.0).is_err());
    }
}
