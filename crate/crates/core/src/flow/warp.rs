use crate::error::{check_dims, Result};
use crate::image::ScalarMap;
use crate::par;

use super::FlowField;

/// Up to four `(index, weight)` bilinear taps; zero-weight taps are omitted.
#[derive(Clone, Copy, Debug)]
pub struct Taps {
    pub idx: [usize; 4],
    pub weight: [f64; 4],
    pub len: usize,
}

impl Taps {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(|k| (self.idx[k], self.weight[k]))
    }
}

/// Bilinear taps for a sample at index-space position `(x, y)`.
///
/// Pixel `(i, j)` sits at integer coordinates. `x` wraps when `wrap` is set;
/// positions outside `[0, h-1]` vertically (or horizontally without wrap)
/// return `None`.
pub fn bilinear_taps(x: f64, y: f64, width: usize, height: usize, wrap: bool) -> Option<Taps> {
    if !(x.is_finite() && y.is_finite()) {
        return None;
    }
    let max_y = (height - 1) as f64;
    if y < 0.0 || y > max_y {
        return None;
    }
    let x = if wrap {
        let w = width as f64;
        let r = x.rem_euclid(w);
        if r >= w {
            0.0
        } else {
            r
        }
    } else {
        if x < 0.0 || x > (width - 1) as f64 {
            return None;
        }
        x
    };
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = if x0 + 1 < width {
        x0 + 1
    } else if wrap {
        0
    } else {
        x0
    };
    let y1 = (y0 + 1).min(height - 1);

    let mut taps = Taps {
        idx: [0; 4],
        weight: [0.0; 4],
        len: 0,
    };
    let candidates = [
        (y0 * width + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * width + x1, fx * (1.0 - fy)),
        (y1 * width + x0, (1.0 - fx) * fy),
        (y1 * width + x1, fx * fy),
    ];
    for (i, wgt) in candidates {
        if wgt != 0.0 {
            taps.idx[taps.len] = i;
            taps.weight[taps.len] = wgt;
            taps.len += 1;
        }
    }
    Some(taps)
}

/// Backward-warps `field` along `flow`: output at `p` samples `field` at
/// `p + u(p)` bilinearly.
///
/// The horizontal axis wraps. Samples that leave the vertical range, land on
/// an invalid flow vector, or touch an invalid input tap are invalid.
pub fn warp_scalar_field(field: &ScalarMap, flow: &FlowField) -> Result<ScalarMap> {
    check_dims(field.dims(), flow.dims())?;
    let (w, h) = field.dims();
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    par::for_each_row2(&mut values, &mut valid, w, |y, vrow, mrow| {
        for x in 0..w {
            let i = y * w + x;
            if !flow.valid[i] {
                continue;
            }
            let [ux, uy] = flow.u[i];
            let Some(taps) = bilinear_taps(x as f64 + ux, y as f64 + uy, w, h, true) else {
                continue;
            };
            if taps.iter().any(|(j, _)| !field.valid[j]) {
                continue;
            }
            vrow[x] = taps.iter().map(|(j, wt)| wt * field.values[j]).sum();
            mrow[x] = true;
        }
    });
    ScalarMap::new(w, h, values, valid)
}
