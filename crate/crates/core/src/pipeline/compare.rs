use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::layout::product;
use super::run::{discover_frames, layouts, FrameRange};
use crate::error::{check_dims, Result};
use crate::image::{luma, SphericalFrame};
use crate::io;

/// Statistics of one blend mode over the CG mask of one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub mask_pixels: usize,
    pub mean_alpha: f64,
    /// Mean absolute linear-RGB difference between composite and real frame.
    pub mean_abs_diff: f64,
    /// Mean squared Laplacian of the luma residual `composite − real`.
    pub hf_residual_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameComparison {
    pub index: usize,
    pub modes: BTreeMap<String, ModeStats>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub frames: Vec<FrameComparison>,
}

impl CompareReport {
    /// Plain-text table, one row per frame and mode.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>6}  {:<20} {:>8} {:>10} {:>12} {:>14}\n",
            "frame", "mode", "pixels", "mean_a", "mean_|d|", "hf_energy"
        );
        for f in &self.frames {
            for (m, st) in &f.modes {
                s += &format!(
                    "{:>6}  {:<20} {:>8} {:>10.5} {:>12.6} {:>14.6e}\n",
                    f.index,
                    m,
                    st.mask_pixels,
                    st.mean_alpha,
                    st.mean_abs_diff,
                    st.hf_residual_energy
                );
            }
        }
        s
    }
}

/// Mask-region statistics of `out` against `real`.
pub fn mode_stats(
    real: &SphericalFrame,
    out: &SphericalFrame,
    alpha: &[f64],
    mask: &[bool],
) -> Result<ModeStats> {
    check_dims(real.dims(), out.dims())?;
    let (w, h) = real.dims();
    let resid: Vec<f64> = real
        .pixels
        .iter()
        .zip(&out.pixels)
        .map(|(r, o)| (luma(*o) - luma(*r)) as f64)
        .collect();
    let mut n = 0usize;
    let (mut sa, mut sd, mut se) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask[i] {
                continue;
            }
            n += 1;
            sa += alpha[i];
            sd += (0..3)
                .map(|c| (out.pixels[i][c] - real.pixels[i][c]).abs() as f64)
                .sum::<f64>()
                / 3.0;
            let l = resid[y * w + (x + w - 1) % w];
            let r = resid[y * w + (x + 1) % w];
            let u = resid[y.saturating_sub(1) * w + x];
            let d = resid[(y + 1).min(h - 1) * w + x];
            let lap = l + r + u + d - 4.0 * resid[i];
            se += lap * lap;
        }
    }
    let k = n.max(1) as f64;
    Ok(ModeStats {
        mask_pixels: n,
        mean_alpha: sa / k,
        mean_abs_diff: sd / k,
        hf_residual_energy: se / k,
    })
}

/// Builds side-by-side strips of the configured modes and a metric table
/// from existing pipeline outputs.
pub fn compare_modes(cfg: &PipelineConfig, range: FrameRange) -> Result<CompareReport> {
    cfg.validate()?;
    let (data, out) = layouts(cfg)?;
    let poses = io::poses::read(&data.poses())?;
    let frames: Vec<usize> = discover_frames(&data, &poses)
        .into_iter()
        .filter(|&i| range.contains(i))
        .collect();

    let mut report = CompareReport::default();
    for t in frames {
        let real = io::png::read_frame(&data.frame(t), t)?;
        let cg = io::png::read_rgba(&data.cg_color(t))?;
        check_dims(real.dims(), cg.dims())?;
        let mask: Vec<bool> = (0..cg.pixels.len()).map(|i| cg.covered(i)).collect();
        let (w, h) = real.dims();
        let mut strip = vec![0u8; 0];
        let mut panels = Vec::new();
        let mut modes = BTreeMap::new();
        for &mode in &cfg.modes {
            let frame = io::png::read_frame(&out.resolve(&product::composite(mode, t)), t)?;
            let alpha = io::pfm::read_scalar(&out.resolve(&product::alpha(mode, t)))?;
            check_dims(real.dims(), alpha.dims())?;
            modes.insert(
                mode.name().to_string(),
                mode_stats(&real, &frame, &alpha.values, &mask)?,
            );
            panels.push(io::png::encode_frame_rgb8(&frame));
        }
        for y in 0..h {
            for p in &panels {
                strip.extend_from_slice(&p[y * w * 3..(y + 1) * w * 3]);
            }
        }
        io::png::write_rgb8(
            &out.root.join(product::triptych(t)),
            w * panels.len(),
            h,
            strip,
        )?;
        report.frames.push(FrameComparison { index: t, modes });
    }
    io::write_bytes(
        &out.compare_table(),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}
