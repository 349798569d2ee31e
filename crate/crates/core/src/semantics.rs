//! Semantic classes, their visibility categories, and per-pixel visibility
//! targets for the compositor.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::image::ProbabilityMap;
use crate::par;

/// Uncertainties are kept strictly inside `(0, 1)` by this margin.
pub const UNCERTAINTY_EPS: f64 = 1e-4;

/// Weighting scale that makes the Gaussian prefactor exactly one.
pub const DEFAULT_SIGMA: f64 = 1.0 / TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SemanticLabel {
    Building = 0,
    Grass = 1,
    Car = 2,
    Ground = 3,
    Road = 4,
    Sky = 5,
    Tree = 6,
    TreeTrunk = 7,
    Unknown = 8,
}

impl SemanticLabel {
    pub const ALL: [SemanticLabel; 9] = [
        SemanticLabel::Building,
        SemanticLabel::Grass,
        SemanticLabel::Car,
        SemanticLabel::Ground,
        SemanticLabel::Road,
        SemanticLabel::Sky,
        SemanticLabel::Tree,
        SemanticLabel::TreeTrunk,
        SemanticLabel::Unknown,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn category(self) -> Category {
        use SemanticLabel::*;
        match self {
            Grass | Ground | Road | Sky | Unknown => Category::Background,
            Building | Car | TreeTrunk => Category::Simple,
            Tree => Category::Complex,
        }
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Background,
    Simple,
    Complex,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Background, Category::Simple, Category::Complex];
}

/// Per-pixel class labels with classifier uncertainty `g ∈ (0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<SemanticLabel>,
    pub uncertainty: Vec<f64>,
}

impl SemanticMap {
    /// Builds a map, clamping uncertainties into `(ε, 1 − ε)`.
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<SemanticLabel>,
        uncertainty: Vec<f64>,
    ) -> Result<Self> {
        if labels.len() != width * height || uncertainty.len() != width * height {
            return Err(Error::Domain(
                "semantic map buffers do not match dims".into(),
            ));
        }
        let uncertainty = uncertainty.into_iter().map(clamp_uncertainty).collect();
        Ok(Self {
            width,
            height,
            labels,
            uncertainty,
        })
    }

    /// Decodes raw label codes; unrecognized codes become `Unknown`.
    /// Returns the map and the number of unrecognized codes.
    pub fn from_codes(
        width: usize,
        height: usize,
        codes: &[u8],
        uncertainty: Vec<f64>,
    ) -> Result<(Self, usize)> {
        let mut unknown = 0usize;
        let labels = codes
            .iter()
            .map(|&c| {
                SemanticLabel::from_code(c).unwrap_or_else(|| {
                    unknown += 1;
                    SemanticLabel::Unknown
                })
            })
            .collect();
        if unknown > 0 {
            log::warn!("{unknown} pixels carried unrecognized label codes, treated as Unknown");
        }
        Ok((Self::new(width, height, labels, uncertainty)?, unknown))
    }

    pub fn uniform(width: usize, height: usize, label: SemanticLabel, g: f64) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
            uncertainty: vec![clamp_uncertainty(g); width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

#[inline]
fn clamp_uncertainty(g: f64) -> f64 {
    if g.is_nan() {
        return 1.0 - UNCERTAINTY_EPS;
    }
    g.clamp(UNCERTAINTY_EPS, 1.0 - UNCERTAINTY_EPS)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryMap {
    pub width: usize,
    pub height: usize,
    pub categories: Vec<Category>,
}

impl CategoryMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

pub fn group_categories(sem: &SemanticMap) -> CategoryMap {
    CategoryMap {
        width: sem.width,
        height: sem.height,
        categories: sem.labels.iter().map(|l| l.category()).collect(),
    }
}

/// Maximum (`*1`) and fallback minimum (`*2`) visibilities of one category
/// for a real foreground (`f`) and background (`b`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityLevels {
    pub v_f1: f64,
    pub v_f2: f64,
    pub v_b1: f64,
    pub v_b2: f64,
}

impl VisibilityLevels {
    fn validate(&self, name: &str) -> Result<()> {
        let all = [self.v_f1, self.v_f2, self.v_b1, self.v_b2];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "{name}: visibilities must be finite and >= 0"
            )));
        }
        if self.v_f2 > self.v_f1 || self.v_b2 > self.v_b1 {
            log::debug!("{name}: fallback visibility exceeds its maximum");
        }
        Ok(())
    }
}

/// Visibility levels keyed by category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityParams {
    pub background: VisibilityLevels,
    pub simple: VisibilityLevels,
    pub complex: VisibilityLevels,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            background: VisibilityLevels {
                v_f1: 10.0,
                v_f2: 10.0,
                v_b1: 10.0,
                v_b2: 10.0,
            },
            simple: VisibilityLevels {
                v_f1: 0.0005,
                v_f2: 0.001,
                v_b1: 5.0,
                v_b2: 4.0,
            },
            complex: VisibilityLevels {
                v_f1: 1.5,
                v_f2: 1.0,
                v_b1: 4.0,
                v_b2: 2.5,
            },
        }
    }
}

impl VisibilityParams {
    pub fn levels(&self, c: Category) -> &VisibilityLevels {
        match c {
            Category::Background => &self.background,
            Category::Simple => &self.simple,
            Category::Complex => &self.complex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.background.validate("background")?;
        self.simple.validate("simple")?;
        self.complex.validate("complex")
    }
}

/// Fixed per-category `(V_f, V_b)` used by the transparency baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedLevels {
    pub v_f: f64,
    pub v_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedVisibilityParams {
    pub background: FixedLevels,
    pub simple: FixedLevels,
    pub complex: FixedLevels,
}

impl Default for FixedVisibilityParams {
    fn default() -> Self {
        Self {
            background: FixedLevels {
                v_f: 10.0,
                v_b: 10.0,
            },
            simple: FixedLevels {
                v_f: 0.0005,
                v_b: 5.0,
            },
            complex: FixedLevels { v_f: 1.5, v_b: 4.0 },
        }
    }
}

impl FixedVisibilityParams {
    pub fn levels(&self, c: Category) -> FixedLevels {
        match c {
            Category::Background => self.background,
            Category::Simple => self.simple,
            Category::Complex => self.complex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [
            ("background", self.background),
            ("simple", self.simple),
            ("complex", self.complex),
        ] {
            if ![l.v_f, l.v_b].iter().all(|v| v.is_finite() && *v >= 0.0) {
                return Err(Error::Config(format!(
                    "fixed {name}: visibilities must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Foreground and background visibility after uncertainty mixing:
/// `V = ½·V₁ + ½·((1 − g)·V₁ + g·V₂)`.
///
/// The inner blend is evaluated as `V₁ + g·(V₂ − V₁)`, which is the same
/// expression but returns `V₁` exactly when `V₂ = V₁`.
pub fn visibility_from_uncertainty(levels: &VisibilityLevels, g: f64) -> (f64, f64) {
    let mix = |v1: f64, v2: f64| 0.5 * v1 + 0.5 * (v1 + g * (v2 - v1));
    (mix(levels.v_f1, levels.v_f2), mix(levels.v_b1, levels.v_b2))
}

/// Gaussian weight of the foreground probability,
/// `ω = exp(−P²/(2σ)) / √(2πσ)`, clamped to `[0, 1]`.
pub fn probability_weight(p_f: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(weight_unchecked(p_f, sigma))
}

#[inline]
fn weight_unchecked(p_f: f64, sigma: f64) -> f64 {
    let w = (-(p_f * p_f) / (2.0 * sigma)).exp() / (TAU * sigma).sqrt();
    w.clamp(0.0, 1.0)
}

/// `V_cg = (1 − ω)·V_f + ω·V_b`, clamped between `V_f` and `V_b`.
#[inline]
pub fn target_visibility(v_f: f64, v_b: f64, omega: f64) -> f64 {
    let v = (1.0 - omega) * v_f + omega * v_b;
    v.clamp(v_f.min(v_b), v_f.max(v_b))
}

/// Per-pixel visibility terms.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityField {
    pub width: usize,
    pub height: usize,
    pub v_f: Vec<f64>,
    pub v_b: Vec<f64>,
    pub v_cg: Vec<f64>,
}

impl VisibilityField {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn uniform(width: usize, height: usize, v: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            v_f: vec![v; n],
            v_b: vec![v; n],
            v_cg: vec![v; n],
        }
    }
}

fn build_field(
    width: usize,
    height: usize,
    prob: &ProbabilityMap,
    sigma: f64,
    levels_at: impl Fn(usize) -> (f64, f64) + Sync + Send,
) -> VisibilityField {
    let triples = par::map_indexed(width * height, |i| {
        let (v_f, v_b) = levels_at(i);
        let omega = weight_unchecked(prob.values[i], sigma);
        (v_f, v_b, target_visibility(v_f, v_b, omega))
    });
    let mut out = VisibilityField {
        width,
        height,
        v_f: Vec::with_capacity(triples.len()),
        v_b: Vec::with_capacity(triples.len()),
        v_cg: Vec::with_capacity(triples.len()),
    };
    for (f, b, cg) in triples {
        out.v_f.push(f);
        out.v_b.push(b);
        out.v_cg.push(cg);
    }
    out
}

/// Visibility targets from labels, uncertainty and foreground probability.
pub fn visibility_field(
    sem: &SemanticMap,
    prob: &ProbabilityMap,
    params: &VisibilityParams,
    sigma: f64,
) -> Result<VisibilityField> {
    check_dims(sem.dims(), prob.dims())?;
    probability_weight(0.0, sigma)?;
    let (w, h) = sem.dims();
    Ok(build_field(w, h, prob, sigma, |i| {
        visibility_from_uncertainty(params.levels(sem.labels[i].category()), sem.uncertainty[i])
    }))
}

/// Visibility targets with per-category fixed `(V_f, V_b)`; uncertainty is
/// ignored.
pub fn fixed_visibility_field(
    categories: &CategoryMap,
    prob: &ProbabilityMap,
    params: &FixedVisibilityParams,
    sigma: f64,
) -> Result<VisibilityField> {
    check_dims(categories.dims(), prob.dims())?;
    probability_weight(0.0, sigma)?;
    let (w, h) = categories.dims();
    Ok(build_field(w, h, prob, sigma, |i| {
        let l = params.levels(categories.categories[i]);
        (l.v_f, l.v_b)
    }))
}
