use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use super::cache::{sha256_hex, Cache, KeyBuilder, Manifest, ManifestEntry};
use super::config::{FlowSource, PipelineConfig};
use super::layout::{product, DatasetLayout, OutputLayout};
use super::report::{
    DepthErrors, DivergenceRecord, ErrorStats, EvalReport, FrameReport, FrameStatus, StageTimings,
};
use crate::compositor::{composite, CompositeInputs};
use crate::depth::{
    find_divergence_point, foreground_probability, fuse_depth_temporal, triangulate_depth,
    DivergenceSearchRegion,
};
use crate::error::{Error, Result};
use crate::flow::{compute_flow, FlowField};
use crate::image::{CgLayer, DepthMap, ProbabilityMap, ScalarMap, SphericalFrame};
use crate::io::{self, poses::PoseManifest, read_bytes};
use crate::par;
use crate::sphere::{AngularPoint, CameraPose};

/// Half-open range of frame indices; `end = None` runs to the last frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameRange {
    pub start: usize,
    pub end: Option<usize>,
}

impl FrameRange {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn new(start: usize, end: usize) -> Self {
        Self {
            start,
            end: Some(end),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && self.end.is_none_or(|e| i < e)
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Frame indices present either as frame files or as poses.
pub(crate) fn discover_frames(data: &DatasetLayout, poses: &PoseManifest) -> BTreeSet<usize> {
    let mut set: BTreeSet<usize> = poses.poses.iter().map(|p| p.index).collect();
    if let Ok(dir) = std::fs::read_dir(data.path("frames")) {
        for e in dir.flatten() {
            let name = e.file_name();
            let name = name.to_string_lossy();
            if let Some(i) = name
                .strip_prefix("frame_")
                .and_then(|s| s.strip_suffix(".png"))
                .and_then(|s| s.parse().ok())
            {
                set.insert(i);
            }
        }
    }
    set
}

/// An input file's bytes and digest.
struct Loaded {
    bytes: Vec<u8>,
    sha: String,
}

fn load(path: &Path) -> Result<Loaded> {
    let bytes = read_bytes(path)?;
    let sha = sha256_hex(&bytes);
    Ok(Loaded { bytes, sha })
}

/// Everything up to triangulation for one frame.
struct Front {
    index: usize,
    frame: SphericalFrame,
    frame_sha: String,
    /// Backward flow to the previous frame; `None` without a predecessor.
    flow: Option<FlowField>,
    flow_key: String,
    depth: DepthMap,
    depth_key: String,
    divergence: Option<DivergenceRecord>,
    timings: StageTimings,
    warnings: Vec<String>,
    entries: Vec<(String, ManifestEntry)>,
    cache_hits: usize,
}

/// Fusion history for a frame, or the error that stopped its front stage.
type Job = std::result::Result<Vec<Arc<Front>>, String>;

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    data: DatasetLayout,
    out: &'a OutputLayout,
    cache: Cache<'a>,
    poses: &'a PoseManifest,
    frames: &'a BTreeSet<usize>,
}

fn pose_key(p: &CameraPose) -> String {
    format!("{:?}{:?}", p.position.as_slice(), p.quaternion_wxyz())
}

impl Ctx<'_> {
    fn front(&self, t: usize) -> Result<Front> {
        let pose_t = self
            .poses
            .get(t)
            .ok_or_else(|| Error::format("pose manifest", format!("no pose for frame {t}")))?;
        let cur = load(&self.data.frame(t))?;
        let frame = io::png::decode_frame(&cur.bytes, t)?;
        let (w, h) = frame.dims();
        let mut f = Front {
            index: t,
            frame,
            frame_sha: cur.sha,
            flow: None,
            flow_key: "none".into(),
            depth: DepthMap::invalid(w, h),
            depth_key: "none".into(),
            divergence: None,
            timings: StageTimings::default(),
            warnings: Vec::new(),
            entries: Vec::new(),
            cache_hits: 0,
        };

        let prev_pose = t
            .checked_sub(1)
            .filter(|p| self.frames.contains(p))
            .and_then(|p| self.poses.get(p));
        let Some(pose_p) = prev_pose else {
            f.warnings
                .push("no previous frame with a pose; depth unavailable".into());
            return Ok(f);
        };

        // Flow on frame t's grid pointing into frame t-1.
        let started = Instant::now();
        let rel = product::flow(t);
        let (flow_bytes, key, hit) = match self.cfg.flow_source {
            FlowSource::Truth => {
                let truth = load(&self.data.truth_flow(t))?;
                let key = KeyBuilder::new("flow-truth").part(&truth.sha).finish();
                let (b, hit) = self.cache.get_or_store(
                    &rel,
                    &key,
                    || Ok(truth.bytes.clone()),
                    &mut f.entries,
                )?;
                (b, key, hit)
            }
            FlowSource::Computed => {
                let prev = match load(&self.data.frame(t - 1)) {
                    Ok(p) => p,
                    Err(e) => {
                        f.warnings.push(format!(
                            "previous frame unreadable ({e}); depth unavailable"
                        ));
                        return Ok(f);
                    }
                };
                let key = KeyBuilder::new("flow")
                    .json(&self.cfg.flow)
                    .part(&f.frame_sha)
                    .part(&prev.sha)
                    .finish();
                let (b, hit) = self.cache.get_or_store(
                    &rel,
                    &key,
                    || {
                        let prev_frame = io::png::decode_frame(&prev.bytes, t - 1)?;
                        let flow = compute_flow(
                            &f.frame.to_gray(),
                            &prev_frame.to_gray(),
                            &self.cfg.flow,
                        )?;
                        Ok(io::flo::encode(&flow))
                    },
                    &mut f.entries,
                )?;
                (b, key, hit)
            }
        };
        f.cache_hits += hit as usize;
        let flow = io::flo::decode(&flow_bytes)?;
        crate::error::check_dims((w, h), flow.dims())?;
        f.timings.flow = ms(started);
        f.flow_key = key;

        // Divergence point near the direction of travel.
        let started = Instant::now();
        let travel = pose_t.position - pose_p.position;
        if !(travel.norm() > self.cfg.depth.baseline_min) {
            f.warnings.push(format!(
                "baseline {:.4} m below minimum {} m; depth unavailable",
                travel.norm(),
                self.cfg.depth.baseline_min
            ));
            f.flow = Some(flow);
            return Ok(f);
        }
        let dp = &self.cfg.depth.divergence;
        let center = AngularPoint::from_direction(&pose_t.to_camera(&travel.normalize()))?;
        let region = DivergenceSearchRegion::new(
            center,
            (
                dp.half_extent_deg[0].to_radians(),
                dp.half_extent_deg[1].to_radians(),
            ),
        )?;
        let div_key = KeyBuilder::new("divergence")
            .json(dp)
            .part(&f.flow_key)
            .part(pose_key(&pose_t))
            .part(pose_key(&pose_p))
            .finish();
        let (div_bytes, hit) = self.cache.get_or_store(
            &product::divergence(t),
            &div_key,
            || {
                let est = find_divergence_point(&flow, &region, dp)?;
                let rec = DivergenceRecord {
                    theta: est.point.theta,
                    phi: est.point.phi,
                    pixel: [est.pixel.0, est.pixel.1],
                    response: est.response,
                    fallback: est.fallback,
                };
                Ok(serde_json::to_vec_pretty(&rec)?)
            },
            &mut f.entries,
        )?;
        f.cache_hits += hit as usize;
        let rec: DivergenceRecord = serde_json::from_slice(&div_bytes)?;
        if rec.fallback {
            f.warnings
                .push("divergence search fell back to the direction of travel".into());
        }
        let div = AngularPoint::new(rec.theta, rec.phi)?;
        f.divergence = Some(rec);
        f.timings.divergence = ms(started);

        let started = Instant::now();
        let tri = self.cfg.depth.triangulation();
        let depth_key = KeyBuilder::new("depth")
            .json(&self.cfg.depth.epsilon_tri_deg)
            .json(&self.cfg.depth.d_max)
            .json(&self.cfg.depth.baseline_min)
            .json(&self.cfg.depth.literal_numerator)
            .part(&div_key)
            .finish();
        let (depth_bytes, hit) = self.cache.get_or_store(
            &product::depth(t),
            &depth_key,
            || {
                let d = triangulate_depth(&flow, &pose_p, &pose_t, div, &tri)?;
                Ok(io::pfm::encode(&d))
            },
            &mut f.entries,
        )?;
        f.cache_hits += hit as usize;
        f.depth = DepthMap::from_scalar(io::pfm::decode(&depth_bytes)?);
        f.depth_key = depth_key;
        f.timings.triangulation = ms(started);
        f.flow = Some(flow);
        Ok(f)
    }

    /// Fusion, probability and compositing for the newest frame of
    /// `history` (oldest first, consecutive frames).
    fn back(&self, history: &[Arc<Front>]) -> Result<(FrameReport, Vec<(String, ManifestEntry)>)> {
        let cur = history.last().expect("history holds the current frame");
        let t = cur.index;
        let (w, h) = cur.frame.dims();
        let mut entries: Vec<(String, ManifestEntry)> = Vec::new();
        let mut timings = cur.timings.clone();
        let mut hits = cur.cache_hits;

        let labels = load(&self.data.labels(t))?;
        let unc = load(&self.data.uncertainty(t))?;
        let cg_color = load(&self.data.cg_color(t))?;
        let cg_depth = load(&self.data.cg_depth(t))?;
        let (lw, lh, codes) = io::labels::decode_codes(&labels.bytes)?;
        let (uw, uh, g) = io::labels::decode_uncertainty(&unc.bytes)?;
        crate::error::check_dims((w, h), (lw, lh))?;
        crate::error::check_dims((w, h), (uw, uh))?;
        let (semantics, unknown) = crate::semantics::SemanticMap::from_codes(w, h, &codes, g)?;
        let mut warnings = Vec::new();
        if unknown > 0 {
            warnings.push(format!("{unknown} unknown label codes read as Unknown"));
        }
        let cg = CgLayer::new(
            io::png::decode_rgba(&cg_color.bytes)?,
            DepthMap::from_scalar(io::pfm::decode(&cg_depth.bytes)?),
        )?;
        crate::error::check_dims((w, h), cg.dims())?;

        // Temporal fusion over the available window.
        let started = Instant::now();
        let mut fk = KeyBuilder::new("fused");
        for f in history {
            fk = fk.part(&f.depth_key).part(&f.flow_key);
        }
        let fused_key = fk.finish();
        let (fused_bytes, hit) = self.cache.get_or_store(
            &product::fused(t),
            &fused_key,
            || {
                let zero = FlowField::zeros(w, h);
                let hist: Vec<(DepthMap, FlowField)> = history
                    .iter()
                    .map(|f| {
                        (
                            f.depth.clone(),
                            f.flow.clone().unwrap_or_else(|| zero.clone()),
                        )
                    })
                    .collect();
                let fused = fuse_depth_temporal(&hist)?;
                Ok(io::pfm::encode(&fused))
            },
            &mut entries,
        )?;
        hits += hit as usize;
        let fused = DepthMap::from_scalar(io::pfm::decode(&fused_bytes)?);
        timings.fusion = ms(started);

        let started = Instant::now();
        let prob_key = KeyBuilder::new("probability")
            .json(&self.cfg.depth.k)
            .json(&self.cfg.depth.p_unknown)
            .part(&fused_key)
            .part(&cg_depth.sha)
            .part(&cg_color.sha)
            .finish();
        let (prob_bytes, hit) = self.cache.get_or_store(
            &product::probability(t),
            &prob_key,
            || {
                let p = foreground_probability(
                    &fused,
                    &cg.depth,
                    self.cfg.depth.k,
                    self.cfg.depth.p_unknown,
                )?;
                let map = ScalarMap::new(w, h, p.values, vec![true; w * h])?;
                Ok(io::pfm::encode(&map))
            },
            &mut entries,
        )?;
        hits += hit as usize;
        let prob = ProbabilityMap::new(w, h, io::pfm::decode(&prob_bytes)?.values)?;
        timings.probability = ms(started);

        let mut outputs = BTreeMap::new();
        for &mode in &self.cfg.modes {
            let started = Instant::now();
            let key = KeyBuilder::new("composite")
                .json(&mode)
                .json(&self.cfg.blend)
                .json(&self.cfg.visibility)
                .json(&self.cfg.fixed_visibility)
                .json(&self.cfg.sigma)
                .part(&prob_key)
                .part(&cur.frame_sha)
                .part(&labels.sha)
                .part(&unc.sha)
                .finish();
            let (a_rel, c_rel) = (product::alpha(mode, t), product::composite(mode, t));
            let cached = self
                .cache
                .lookup(&a_rel, &key)
                .zip(self.cache.lookup(&c_rel, &key));
            match cached {
                Some((a, c)) => {
                    hits += 2;
                    entries.push((
                        a_rel,
                        ManifestEntry {
                            key: key.clone(),
                            sha256: sha256_hex(&a),
                        },
                    ));
                    entries.push((
                        c_rel.clone(),
                        ManifestEntry {
                            key,
                            sha256: sha256_hex(&c),
                        },
                    ));
                }
                None => {
                    let out = composite(
                        &CompositeInputs {
                            real: &cur.frame,
                            cg: &cg,
                            semantics: &semantics,
                            prob: &prob,
                            visibility: &self.cfg.visibility,
                            fixed: &self.cfg.fixed_visibility,
                            sigma: self.cfg.sigma,
                        },
                        mode,
                        &self.cfg.blend,
                    )?;
                    let alpha = ScalarMap::new(w, h, out.alpha, vec![true; w * h])?;
                    entries.push(self.cache.store(&a_rel, &key, &io::pfm::encode(&alpha))?);
                    entries.push(self.cache.store(
                        &c_rel,
                        &key,
                        &io::png::encode_frame(&out.frame)?,
                    )?);
                }
            }
            outputs.insert(mode.name().to_string(), self.out.resolve(&c_rel));
            timings
                .composite
                .insert(mode.name().to_string(), ms(started));
        }

        let depth_error = match io::pfm::read_depth(&self.data.truth_depth(t)) {
            Ok(truth) if truth.dims() == (w, h) => Some(DepthErrors {
                raw: ErrorStats::relative(&cur.depth, &truth),
                fused: ErrorStats::relative(&fused, &truth),
            }),
            _ => None,
        };

        let mut all_warnings = cur.warnings.clone();
        all_warnings.extend(warnings);
        let report = FrameReport {
            index: t,
            status: FrameStatus::Ok,
            error: None,
            warnings: all_warnings,
            timings_ms: timings,
            cache_hits: hits,
            divergence: cur.divergence.clone(),
            depth_error,
            outputs,
        };
        Ok((report, entries))
    }
}

/// Resolves input and output directories from the configuration.
pub fn layouts(cfg: &PipelineConfig) -> Result<(DatasetLayout, OutputLayout)> {
    let input = cfg
        .paths
        .input
        .clone()
        .ok_or_else(|| Error::Config("no input directory given".into()))?;
    let output = cfg
        .paths
        .output
        .clone()
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    Ok((
        DatasetLayout::new(input),
        OutputLayout::new(output, cfg.cache.dir.as_deref()),
    ))
}

/// Runs every stage on the frames in `range` and writes products, the
/// manifest and `report.json`.
///
/// Frames with missing or malformed inputs are recorded as failed and the
/// run continues. Fusion only chains through consecutive successful frames.
pub fn run_pipeline(cfg: &PipelineConfig, range: FrameRange) -> Result<EvalReport> {
    let wall = Instant::now();
    cfg.validate()?;
    let (data, out) = layouts(cfg)?;
    let poses = io::poses::read(&data.poses())?;
    let all_frames = discover_frames(&data, &poses);
    let selected: Vec<usize> = all_frames
        .iter()
        .copied()
        .filter(|&i| range.contains(i))
        .collect();

    let previous = Manifest::load_or_default(&out.manifest());
    let ctx = Ctx {
        cfg,
        data,
        out: &out,
        cache: Cache {
            layout: &out,
            previous: &previous,
            enabled: cfg.cache.enabled,
        },
        poses: &poses,
        frames: &all_frames,
    };

    let mut manifest = previous.clone();
    let mut reports = Vec::with_capacity(selected.len());
    // Successful fronts of the most recent consecutive frames, oldest first.
    let mut window: Vec<Arc<Front>> = Vec::new();
    let n = cfg.depth.window;

    for chunk in selected.chunks(cfg.in_flight) {
        let fronts = par::map_slice(chunk, |&t| ctx.front(t));

        let mut jobs: Vec<(usize, Job)> = Vec::new();
        for (&t, front) in chunk.iter().zip(fronts) {
            match front {
                Ok(f) => {
                    let f = Arc::new(f);
                    let chained =
                        f.flow.is_some() && window.last().is_some_and(|p| p.index + 1 == t);
                    if !chained {
                        window.clear();
                    }
                    window.push(f);
                    if window.len() > n {
                        window.remove(0);
                    }
                    jobs.push((t, Ok(window.clone())));
                }
                Err(e) => {
                    window.clear();
                    jobs.push((t, Err(e.to_string())));
                }
            }
        }

        let results = par::map_slice(&jobs, |(t, job)| match job {
            Ok(hist) => {
                let front_entries = hist.last().map(|f| f.entries.clone()).unwrap_or_default();
                match ctx.back(hist) {
                    Ok((r, mut e)) => {
                        e.extend(front_entries);
                        (r, e)
                    }
                    Err(err) => {
                        let warnings = hist.last().map(|f| f.warnings.clone()).unwrap_or_default();
                        (
                            FrameReport::failed(*t, err.to_string(), warnings),
                            front_entries,
                        )
                    }
                }
            }
            Err(err) => (FrameReport::failed(*t, err.clone(), Vec::new()), Vec::new()),
        });
        for (r, entries) in results {
            if let Some(e) = &r.error {
                log::warn!("frame {}: {e}", r.index);
            }
            manifest.products.extend(entries);
            reports.push(r);
        }
    }

    let report = EvalReport::new(reports, ms(wall));
    manifest.save(&out.manifest())?;
    io::write_bytes(
        &out.report(),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}
