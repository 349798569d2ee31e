//! Final frame composition.
//!
//! Three modes share one entry point:
//! - `alpha`: per-pixel blend weighted by the foreground probability.
//! - `visibility`: window-wise opacity chosen so the CG layer reaches the
//!   per-pixel visibility targets of [`crate::semantics::visibility_field`].
//! - `fixed_transparency`: the same window machinery with per-category
//!   fixed visibility levels.
//!
//! Visibility is predicted by a [`VisibilityPredictor`]. The default
//! [`LinearSalience`] model assumes achieved visibility grows linearly with
//! opacity and with the local luminance contrast between CG and real
//! content; it is a stand-in for a psychophysical predictor and can be
//! replaced through the trait.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::image::{luma, CgLayer, ProbabilityMap, SphericalFrame};
use crate::par;
use crate::semantics::{
    fixed_visibility_field, group_categories, visibility_field, FixedVisibilityParams, SemanticMap,
    VisibilityField, VisibilityParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    Visibility,
    Alpha,
    FixedTransparency,
}

impl BlendMode {
    pub const ALL: [BlendMode; 3] = [
        BlendMode::Alpha,
        BlendMode::FixedTransparency,
        BlendMode::Visibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlendMode::Visibility => "visibility",
            BlendMode::Alpha => "alpha",
            BlendMode::FixedTransparency => "fixed_transparency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    /// Side of the square blending window, pixels.
    pub window: usize,
    /// Visibility-to-contrast calibration of the linear salience model.
    pub kappa: f64,
    /// Floor on luminance and contrast to keep ratios bounded.
    pub epsilon_d: f64,
    pub mode: BlendMode,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            window: 32,
            kappa: 0.2,
            epsilon_d: 0.01,
            mode: BlendMode::Visibility,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 4 {
            return Err(Error::Config("blend window must be at least 4 px".into()));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Config("kappa must be positive".into()));
        }
        if !(self.epsilon_d.is_finite() && self.epsilon_d > 0.0) {
            return Err(Error::Config("epsilon_d must be positive".into()));
        }
        Ok(())
    }
}

/// Composited frame plus the CG opacity used at every pixel (0 outside the
/// CG mask).
#[derive(Clone, Debug, PartialEq)]
pub struct BlendOutput {
    pub frame: SphericalFrame,
    pub alpha: Vec<f64>,
}

/// Pixel rectangle `[x0, x1) × [y0, y1)` of one blending window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowRect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

/// Regular partition of the frame into square windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowGrid {
    pub size: usize,
    pub cols: usize,
    pub rows: usize,
    pub width: usize,
    pub height: usize,
}

impl WindowGrid {
    pub fn new(width: usize, height: usize, size: usize) -> Self {
        Self {
            size,
            cols: width.div_ceil(size),
            rows: height.div_ceil(size),
            width,
            height,
        }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rect(&self, k: usize) -> WindowRect {
        let (i, j) = (k % self.cols, k / self.cols);
        WindowRect {
            x0: i * self.size,
            x1: ((i + 1) * self.size).min(self.width),
            y0: j * self.size,
            y1: ((j + 1) * self.size).min(self.height),
        }
    }
}

/// Predicts how visible the CG layer is inside a window and inverts that
/// prediction to an opacity.
pub trait VisibilityPredictor: Sync {
    /// Opacity in `[0, 1]` that makes the window reach `target` visibility.
    /// Only called for windows with CG coverage.
    fn window_alpha(
        &self,
        real: &SphericalFrame,
        cg: &CgLayer,
        rect: WindowRect,
        target: f64,
    ) -> f64;
}

/// Visibility modeled as `V̂(α) = α·D_W/κ`, where `D_W` is the mean absolute
/// luminance difference between CG and real pixels under the CG mask,
/// relative to the mean real luminance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSalience {
    pub kappa: f64,
    pub epsilon_d: f64,
}

impl LinearSalience {
    pub fn from_config(cfg: &BlendConfig) -> Self {
        Self {
            kappa: cfg.kappa,
            epsilon_d: cfg.epsilon_d,
        }
    }

    /// `D_W` of one window; zero when the window has no CG coverage.
    pub fn salience(&self, real: &SphericalFrame, cg: &CgLayer, r: WindowRect) -> f64 {
        let w = real.width;
        let mut diff = 0.0f64;
        let mut lum = 0.0f64;
        let mut n = 0usize;
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                let i = y * w + x;
                if !cg.color.covered(i) {
                    continue;
                }
                let c = cg.color.pixels[i];
                let real_l = luma(real.pixels[i]) as f64;
                let cg_l = luma([c[0], c[1], c[2]]) as f64;
                diff += (cg_l - real_l).abs();
                lum += real_l;
                n += 1;
            }
        }
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        (diff / n) / (lum / n + self.epsilon_d)
    }
}

impl VisibilityPredictor for LinearSalience {
    fn window_alpha(
        &self,
        real: &SphericalFrame,
        cg: &CgLayer,
        rect: WindowRect,
        target: f64,
    ) -> f64 {
        let d = self.salience(real, cg, rect);
        (self.kappa * target / d.max(self.epsilon_d)).clamp(0.0, 1.0)
    }
}

/// Per-window `D_W` for the whole frame, row-major over the window grid.
pub fn local_salience(
    real: &SphericalFrame,
    cg: &CgLayer,
    window: usize,
    epsilon_d: f64,
) -> Result<Vec<f64>> {
    check_dims(real.dims(), cg.dims())?;
    if window < 4 {
        return Err(Error::Config("blend window must be at least 4 px".into()));
    }
    let grid = WindowGrid::new(real.width, real.height, window);
    let model = LinearSalience {
        kappa: 1.0,
        epsilon_d,
    };
    Ok(par::map_indexed(grid.len(), |k| {
        model.salience(real, cg, grid.rect(k))
    }))
}

/// Probability-weighted blend `Real·P_f + Cg·(1 − P_f)` under the CG mask.
pub fn alpha_blend(
    real: &SphericalFrame,
    cg: &CgLayer,
    prob: &ProbabilityMap,
) -> Result<BlendOutput> {
    check_dims(real.dims(), cg.dims())?;
    check_dims(real.dims(), prob.dims())?;
    let alpha: Vec<f64> = (0..real.pixels.len())
        .map(|i| {
            if cg.color.covered(i) {
                1.0 - prob.values[i]
            } else {
                0.0
            }
        })
        .collect();
    let mut out = real.clone();
    let w = real.width;
    par::for_each_row(&mut out.pixels, w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            let i = y * w + x;
            if !cg.color.covered(i) {
                continue;
            }
            let p = prob.values[i] as f32;
            let c = cg.color.pixels[i];
            let r = real.pixels[i];
            for ch in 0..3 {
                px[ch] = (r[ch] * p + c[ch] * (1.0 - p)).clamp(0.0, 1.0);
            }
        }
    });
    Ok(BlendOutput { frame: out, alpha })
}

/// Window-wise opacity from visibility targets, interpolated bilinearly
/// between window centers.
///
/// Windows without CG coverage do not take part in the interpolation, so
/// the opacity of a covered pixel is a convex combination of covered
/// windows only.
pub fn visibility_blend_with(
    real: &SphericalFrame,
    cg: &CgLayer,
    vis: &VisibilityField,
    cfg: &BlendConfig,
    predictor: &dyn VisibilityPredictor,
) -> Result<BlendOutput> {
    cfg.validate()?;
    check_dims(real.dims(), cg.dims())?;
    check_dims(real.dims(), vis.dims())?;
    let (w, h) = real.dims();
    let grid = WindowGrid::new(w, h, cfg.window);

    let window_alpha: Vec<Option<f64>> = par::map_indexed(grid.len(), |k| {
        let r = grid.rect(k);
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                let i = y * w + x;
                if cg.color.covered(i) {
                    sum += vis.v_cg[i];
                    n += 1;
                }
            }
        }
        (n > 0).then(|| predictor.window_alpha(real, cg, r, sum / n as f64))
    });

    let mut alpha = vec![0.0f64; w * h];
    par::for_each_row(&mut alpha, w, |y, row| {
        let s = grid.size as f64;
        let gy = ((y as f64 + 0.5) / s - 0.5).clamp(0.0, (grid.rows - 1) as f64);
        let j0 = gy.floor() as usize;
        let j1 = (j0 + 1).min(grid.rows - 1);
        let fy = gy - j0 as f64;
        for (x, a) in row.iter_mut().enumerate() {
            if !cg.color.covered(y * w + x) {
                continue;
            }
            let gx = ((x as f64 + 0.5) / s - 0.5).clamp(0.0, (grid.cols - 1) as f64);
            let i0 = gx.floor() as usize;
            let i1 = (i0 + 1).min(grid.cols - 1);
            let fx = gx - i0 as f64;
            let taps = [
                (j0 * grid.cols + i0, (1.0 - fx) * (1.0 - fy)),
                (j0 * grid.cols + i1, fx * (1.0 - fy)),
                (j1 * grid.cols + i0, (1.0 - fx) * fy),
                (j1 * grid.cols + i1, fx * fy),
            ];
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, wt) in taps {
                if let Some(ak) = window_alpha[k] {
                    num += wt * ak;
                    den += wt;
                }
            }
            *a = if den > 0.0 {
                (num / den).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    });

    let mut out = real.clone();
    par::for_each_row(&mut out.pixels, w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            let i = y * w + x;
            if !cg.color.covered(i) {
                continue;
            }
            let a = alpha[i] as f32;
            let c = cg.color.pixels[i];
            let r = real.pixels[i];
            for ch in 0..3 {
                px[ch] = (a * c[ch] + (1.0 - a) * r[ch]).clamp(0.0, 1.0);
            }
        }
    });
    Ok(BlendOutput { frame: out, alpha })
}

/// [`visibility_blend_with`] using the [`LinearSalience`] model.
pub fn visibility_blend(
    real: &SphericalFrame,
    cg: &CgLayer,
    vis: &VisibilityField,
    cfg: &BlendConfig,
) -> Result<BlendOutput> {
    visibility_blend_with(real, cg, vis, cfg, &LinearSalience::from_config(cfg))
}

/// Transparency baseline: fixed per-category `(V_f, V_b)` without
/// uncertainty mixing, composited with the same window machinery.
pub fn fixed_transparency_blend(
    real: &SphericalFrame,
    cg: &CgLayer,
    sem: &SemanticMap,
    prob: &ProbabilityMap,
    fixed: &FixedVisibilityParams,
    sigma: f64,
    cfg: &BlendConfig,
) -> Result<BlendOutput> {
    let vis = fixed_visibility_field(&group_categories(sem), prob, fixed, sigma)?;
    visibility_blend(real, cg, &vis, cfg)
}

/// Everything a compositing mode may need.
pub struct CompositeInputs<'a> {
    pub real: &'a SphericalFrame,
    pub cg: &'a CgLayer,
    pub semantics: &'a SemanticMap,
    pub prob: &'a ProbabilityMap,
    pub visibility: &'a VisibilityParams,
    pub fixed: &'a FixedVisibilityParams,
    pub sigma: f64,
}

/// Composites with the given mode.
pub fn composite(
    inputs: &CompositeInputs<'_>,
    mode: BlendMode,
    cfg: &BlendConfig,
) -> Result<BlendOutput> {
    match mode {
        BlendMode::Alpha => alpha_blend(inputs.real, inputs.cg, inputs.prob),
        BlendMode::Visibility => {
            let vis = visibility_field(
                inputs.semantics,
                inputs.prob,
                inputs.visibility,
                inputs.sigma,
            )?;
            visibility_blend(inputs.real, inputs.cg, &vis, cfg)
        }
        BlendMode::FixedTransparency => fixed_transparency_blend(
            inputs.real,
            inputs.cg,
            inputs.semantics,
            inputs.prob,
            inputs.fixed,
            inputs.sigma,
            cfg,
        ),
    }
}
