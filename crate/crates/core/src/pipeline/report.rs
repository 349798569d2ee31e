use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::image::DepthMap;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Wall-clock milliseconds per stage. Cache hits report the load time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub flow: f64,
    pub divergence: f64,
    pub triangulation: f64,
    pub fusion: f64,
    pub probability: f64,
    pub composite: BTreeMap<String, f64>,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.flow
            + self.divergence
            + self.triangulation
            + self.fusion
            + self.probability
            + self.composite.values().sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub theta: f64,
    pub phi: f64,
    pub pixel: [usize; 2],
    pub response: f64,
    pub fallback: bool,
}

/// Relative depth error `|d − d_true| / d_true` over pixels where both are
/// valid and the true depth lies in `[min_depth, max_depth]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
}

pub const ERROR_MIN_DEPTH: f64 = 2.0;
pub const ERROR_MAX_DEPTH: f64 = 20.0;

impl ErrorStats {
    pub fn relative(estimate: &DepthMap, truth: &DepthMap) -> Option<Self> {
        let mut errs: Vec<f64> = (0..truth.values.len())
            .filter(|&i| estimate.valid[i] && truth.valid[i])
            .filter(|&i| (ERROR_MIN_DEPTH..=ERROR_MAX_DEPTH).contains(&truth.values[i]))
            .map(|i| (estimate.values[i] - truth.values[i]).abs() / truth.values[i])
            .collect();
        if errs.is_empty() {
            return None;
        }
        errs.sort_by(f64::total_cmp);
        let q = |f: f64| errs[((errs.len() - 1) as f64 * f).round() as usize];
        Some(Self {
            count: errs.len(),
            median: q(0.5),
            mean: errs.iter().sum::<f64>() / errs.len() as f64,
            p90: q(0.9),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthErrors {
    pub raw: Option<ErrorStats>,
    pub fused: Option<ErrorStats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub index: usize,
    pub status: FrameStatus,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub timings_ms: StageTimings,
    /// Products reused from the cache.
    pub cache_hits: usize,
    pub divergence: Option<DivergenceRecord>,
    pub depth_error: Option<DepthErrors>,
    /// Composited frame per blend mode.
    pub outputs: BTreeMap<String, PathBuf>,
}

impl FrameReport {
    pub fn failed(index: usize, error: String, warnings: Vec<String>) -> Self {
        Self {
            index,
            status: FrameStatus::Failed,
            error: Some(error),
            warnings,
            timings_ms: StageTimings::default(),
            cache_hits: 0,
            divergence: None,
            depth_error: None,
            outputs: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub frames_total: usize,
    pub frames_ok: usize,
    pub frames_failed: usize,
    pub wall_ms: f64,
    /// Mean per-frame milliseconds of each stage over successful frames.
    pub mean_stage_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub frames: Vec<FrameReport>,
    pub summary: ReportSummary,
}

impl EvalReport {
    pub fn new(frames: Vec<FrameReport>, wall_ms: f64) -> Self {
        let ok: Vec<&FrameReport> = frames
            .iter()
            .filter(|f| f.status == FrameStatus::Ok)
            .collect();
        let mut mean = BTreeMap::new();
        if !ok.is_empty() {
            let n = ok.len() as f64;
            let mut add = |k: &str, v: f64| *mean.entry(k.to_string()).or_insert(0.0) += v / n;
            for f in &ok {
                let t = &f.timings_ms;
                add("flow", t.flow);
                add("divergence", t.divergence);
                add("triangulation", t.triangulation);
                add("fusion", t.fusion);
                add("probability", t.probability);
                for (m, v) in &t.composite {
                    add(&format!("composite_{m}"), *v);
                }
            }
        }
        let summary = ReportSummary {
            frames_total: frames.len(),
            frames_ok: ok.len(),
            frames_failed: frames.len() - ok.len(),
            wall_ms,
            mean_stage_ms: mean,
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            frames,
            summary,
        }
    }
}
