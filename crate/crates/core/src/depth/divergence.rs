//! Focus-of-expansion search.
//!
//! The response at a pixel is the divergence of the *unit-normalized* flow
//! field, averaged over a square box. It peaks where the flow radiates from
//! or converges to and does not change under positive scaling of the flow.
//! Expansion gives a positive response, convergence a negative one. Backward
//! flow under forward motion converges on the divergence point, so the
//! default search takes the minimum.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::image::ScalarMap;
use crate::sphere::{AngularPoint, PixelCoord};

/// Flow vectors shorter than this normalize to zero.
const TINY_FLOW: f64 = 1e-9;

/// Which sign of the response marks the divergence point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Flow converges on the point (backward flow, forward motion).
    Converging,
    /// Flow radiates from the point (forward flow, forward motion).
    Expanding,
    /// Largest absolute response of either sign.
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceParams {
    pub polarity: Polarity,
    /// Side of the square smoothing box, pixels (odd).
    pub box_size: usize,
    /// Minimum fraction of valid flow inside the search region.
    pub min_valid_fraction: f64,
    /// Responses weaker than this (1/px) count as no divergence point.
    pub min_response: f64,
    /// Search half-extent around the motion direction, degrees (θ, φ).
    pub half_extent_deg: [f64; 2],
}

impl Default for DivergenceParams {
    fn default() -> Self {
        Self {
            polarity: Polarity::Converging,
            box_size: 9,
            min_valid_fraction: 0.5,
            min_response: 0.05,
            half_extent_deg: [15.0, 15.0],
        }
    }
}

impl DivergenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.box_size.is_multiple_of(2) {
            return Err(Error::Config("divergence box_size must be odd".into()));
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return Err(Error::Config("min_valid_fraction must be in [0, 1]".into()));
        }
        if self.half_extent_deg.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("half_extent_deg must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceSearchRegion {
    pub center: AngularPoint,
    /// Half-extent `(Δθ, Δφ)` in radians.
    pub half_extent: (f64, f64),
}

impl DivergenceSearchRegion {
    pub fn new(center: AngularPoint, half_extent: (f64, f64)) -> Result<Self> {
        if !(half_extent.0 > 0.0 && half_extent.1 > 0.0) {
            return Err(Error::Domain("search region must be non-empty".into()));
        }
        Ok(Self {
            center,
            half_extent,
        })
    }

    /// Rows (clamped) and columns (wrapped) covered by the region.
    fn pixels(&self, w: usize, h: usize) -> (Vec<usize>, Vec<usize>) {
        let row_of = |theta: f64| theta / PI * h as f64;
        let r0 = row_of((self.center.theta - self.half_extent.0).max(0.0)).floor() as usize;
        let r1 = (row_of((self.center.theta + self.half_extent.0).min(PI)).ceil() as usize).min(h);
        let rows: Vec<usize> = (r0.min(h - 1)..r1.max(r0 + 1).min(h)).collect();

        let cols = if 2.0 * self.half_extent.1 >= TAU {
            (0..w).collect()
        } else {
            let col_of = |phi: f64| phi / TAU * w as f64;
            let c0 = col_of(self.center.phi - self.half_extent.1).floor() as isize;
            let c1 = col_of(self.center.phi + self.half_extent.1).ceil() as isize;
            let c1 = c1.max(c0 + 1).min(c0 + w as isize);
            (c0..c1)
                .map(|c| c.rem_euclid(w as isize) as usize)
                .collect()
        };
        (rows, cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceEstimate {
    pub point: AngularPoint,
    pub pixel: (usize, usize),
    /// Smoothed signed response at the chosen pixel.
    pub response: f64,
    /// The region center was returned because no usable extremum was found.
    pub fallback: bool,
}

struct UnitFlow<'a> {
    flow: &'a FlowField,
}

impl UnitFlow<'_> {
    #[inline]
    fn at(&self, x: isize, y: isize) -> Option<[f64; 2]> {
        let (w, h) = self.flow.dims();
        let x = x.rem_euclid(w as isize) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        let [ux, uy] = self.flow.get(x, y)?;
        let n = (ux * ux + uy * uy).sqrt();
        Some(if n > TINY_FLOW {
            [ux / n, uy / n]
        } else {
            [0.0, 0.0]
        })
    }

    /// Central-difference divergence, one-sided on the top and bottom rows.
    fn divergence(&self, x: isize, y: isize) -> Option<f64> {
        let h = self.flow.height as isize;
        let xm = self.at(x - 1, y)?;
        let xp = self.at(x + 1, y)?;
        let (ym, yp) = ((y - 1).max(0), (y + 1).min(h - 1));
        let dy = (yp - ym).max(1) as f64;
        let nym = self.at(x, ym)?;
        let nyp = self.at(x, yp)?;
        Some((xp[0] - xm[0]) / 2.0 + (nyp[1] - nym[1]) / dy)
    }
}

/// Box-smoothed divergence of the unit flow over the whole frame.
pub fn divergence_response(flow: &FlowField, box_size: usize) -> ScalarMap {
    let (w, h) = flow.dims();
    let rows: Vec<usize> = (0..h).collect();
    let cols: Vec<usize> = (0..w).collect();
    let resp = response_on(flow, &rows, &cols, box_size);
    let mut out = ScalarMap::invalid(w, h);
    for (ri, &y) in rows.iter().enumerate() {
        for (ci, &x) in cols.iter().enumerate() {
            if let Some(r) = resp[ri * cols.len() + ci] {
                out.values[y * w + x] = r;
                out.valid[y * w + x] = true;
            }
        }
    }
    out
}

fn response_on(
    flow: &FlowField,
    rows: &[usize],
    cols: &[usize],
    box_size: usize,
) -> Vec<Option<f64>> {
    let unit = UnitFlow { flow };
    let r = (box_size / 2) as isize;
    let h = flow.height as isize;
    // Divergence on the region grown by the box radius; columns wrap, rows clamp.
    let ext_rows: Vec<isize> =
        ((rows[0] as isize - r).max(0)..=(*rows.last().unwrap() as isize + r).min(h - 1)).collect();
    let ext_cols: Vec<isize> = (-r..cols.len() as isize + r)
        .map(|k| {
            if k < 0 {
                cols[0] as isize + k
            } else if k as usize >= cols.len() {
                *cols.last().unwrap() as isize + (k - cols.len() as isize + 1)
            } else {
                cols[k as usize] as isize
            }
        })
        .collect();
    let ew = ext_cols.len();
    let div: Vec<Option<f64>> = ext_rows
        .iter()
        .flat_map(|&y| ext_cols.iter().map(move |&x| (x, y)))
        .map(|(x, y)| unit.divergence(x, y))
        .collect();

    let row0 = ext_rows[0];
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &y in rows {
        for ci in 0..cols.len() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for dy in -r..=r {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                let er = (yy - row0) as usize;
                for dx in -r..=r {
                    let ec = (ci as isize + r + dx) as usize;
                    if let Some(d) = div[er * ew + ec] {
                        sum += d;
                        n += 1;
                    }
                }
            }
            out.push((n > 0).then(|| sum / n as f64));
        }
    }
    out
}

/// Locates the divergence point of `flow` inside `region`.
///
/// Falls back to the region center (with `fallback` set) when less than
/// `min_valid_fraction` of the region has valid flow or when no response
/// reaches `min_response`.
pub fn find_divergence_point(
    flow: &FlowField,
    region: &DivergenceSearchRegion,
    params: &DivergenceParams,
) -> Result<DivergenceEstimate> {
    params.validate()?;
    let (w, h) = flow.dims();
    let (rows, cols) = region.pixels(w, h);
    let center_px = region.center.to_pixel(w, h);
    let fallback = || {
        let col = (center_px.x.floor() as usize).min(w - 1);
        let row = (center_px.y.floor() as usize).min(h - 1);
        DivergenceEstimate {
            point: region.center,
            pixel: (col, row),
            response: 0.0,
            fallback: true,
        }
    };

    let total = rows.len() * cols.len();
    let valid = rows
        .iter()
        .flat_map(|&y| cols.iter().map(move |&x| (x, y)))
        .filter(|&(x, y)| flow.valid[y * w + x])
        .count();
    if total == 0 || (valid as f64) < params.min_valid_fraction * total as f64 {
        log::warn!(
            "divergence search: only {valid}/{total} valid flow vectors, using region center"
        );
        return Ok(fallback());
    }

    let resp = response_on(flow, &rows, &cols, params.box_size);
    let score = |r: f64| match params.polarity {
        Polarity::Converging => -r,
        Polarity::Expanding => r,
        Polarity::Any => r.abs(),
    };
    let mut best: Option<(f64, usize, usize)> = None;
    for (ri, &y) in rows.iter().enumerate() {
        for (ci, &x) in cols.iter().enumerate() {
            if let Some(r) = resp[ri * cols.len() + ci] {
                if best.is_none_or(|(b, _, _)| score(r) > score(b)) {
                    best = Some((r, x, y));
                }
            }
        }
    }
    match best {
        Some((r, x, y)) if score(r) >= params.min_response => Ok(DivergenceEstimate {
            point: AngularPoint::from_pixel(PixelCoord::center(x, y), w, h)?,
            pixel: (x, y),
            response: r,
            fallback: false,
        }),
        _ => {
            log::warn!("divergence search: no divergence extremum, using region center");
            Ok(fallback())
        }
    }
}
