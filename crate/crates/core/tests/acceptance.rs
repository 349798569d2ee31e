//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::f64::consts::TAU;
use std::path::Path;
use std::time::Instant;

use common::{median, shift_truth, shifted, texture};
use omniocc::compositor::{composite, BlendConfig, BlendMode, CompositeInputs};
use omniocc::depth::{
    find_divergence_point, foreground_probability, triangulate_depth, DivergenceParams,
    DivergenceSearchRegion, TriangulationParams,
};
use omniocc::flow::{compute_flow, tvl1_energy, FlowField, FlowParams};
use omniocc::image::{CgLayer, DepthMap, ProbabilityMap, RgbaImage, ScalarMap, SphericalFrame};
use omniocc::io;
use omniocc::pipeline::layout::product;
use omniocc::pipeline::{
    layouts, run_pipeline, EvalReport, FlowSource, FrameRange, PipelineConfig,
};
use omniocc::semantics::{
    probability_weight, visibility_from_uncertainty, Category, FixedLevels, FixedVisibilityParams,
    SemanticLabel, SemanticMap, VisibilityLevels, VisibilityParams,
};
use omniocc::sphere::{parallax_angle, AngularPoint, PixelCoord};
use omniocc::synth::{self, ground_truth_flow, render_scene, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

const EXACT_DEPTH_TOL: f64 = 1e-6;
const FOE_EXCLUSION_DEG: f64 = 5.0;
const TVL1_MEDIAN_TOL: f64 = 0.10;
const RUNTIME_BUDGET_S: f64 = 60.0;
const SEQ_WIDTH: usize = 512;
const SEQ_FRAMES: usize = 20;
const CLOSED_FORM_TOL: f64 = 1e-12;
const FOE_CLEAN_PX: f64 = 1.0;
const FOE_NOISY_PX: f64 = 3.0;
const FOE_NOISE: f64 = 0.10;
const FOE_TRIALS: usize = 20;
const EPE_TOL: f64 = 0.5;
const HIDDEN_ALPHA_MAX: f64 = 0.1;
const SHOWN_ALPHA_MIN: f64 = 0.9;
const DEPTH_GAP_M: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// The street sequence run once through the full pipeline with computed flow.
struct StreetRun {
    _dir: TempDir,
    spec: SceneSpec,
    cfg: PipelineConfig,
    report: EvalReport,
    seconds: f64,
}

impl StreetRun {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let spec = synth::street(SEQ_WIDTH, SEQ_WIDTH / 2, SEQ_FRAMES, 0.5);
        synth::write_dataset(&spec, &dir.path().join("data")).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.paths.input = Some(dir.path().join("data"));
        cfg.paths.output = Some(dir.path().join("out"));
        cfg.flow_source = FlowSource::Computed;
        let start = Instant::now();
        let report = run_pipeline(&cfg, FrameRange::all()).unwrap();
        let seconds = start.elapsed().as_secs_f64();
        StreetRun {
            _dir: dir,
            spec,
            cfg,
            report,
            seconds,
        }
    }

    fn data(&self, rel: &str) -> std::path::PathBuf {
        self.cfg.paths.input.as_ref().unwrap().join(rel)
    }
}

fn motion_direction(spec: &SceneSpec, t: usize) -> AngularPoint {
    let prev = spec.pose(t - 1).unwrap();
    let curr = spec.pose(t).unwrap();
    AngularPoint::from_direction(&curr.to_camera(&(curr.position - prev.position))).unwrap()
}

fn away_from_foe(x: usize, y: usize, foe: AngularPoint, w: usize, h: usize) -> bool {
    let a = parallax_angle(PixelCoord::center(x, y), foe, w, h)
        .unwrap()
        .to_degrees();
    a > FOE_EXCLUSION_DEG && 180.0 - a > FOE_EXCLUSION_DEG
}

fn criterion_1(run: &StreetRun) -> Outcome {
    let spec = &run.spec;
    let (w, h) = (spec.width, spec.height);
    let mut worst = 0.0f64;
    let (mut compared, mut eligible) = (0usize, 0usize);
    for t in 1..spec.frame_count() {
        let flow = ground_truth_flow(spec, t, t - 1).unwrap();
        let foe = motion_direction(spec, t);
        let est = triangulate_depth(
            &flow,
            &spec.pose(t - 1).unwrap(),
            &spec.pose(t).unwrap(),
            foe,
            &TriangulationParams::default(),
        )
        .unwrap();
        let truth = render_scene(spec, t).unwrap().depth;
        for y in 0..h {
            for x in 0..w {
                let Some(d) = truth.get(x, y) else { continue };
                if !away_from_foe(x, y, foe, w, h) {
                    continue;
                }
                eligible += 1;
                if let Some(e) = est.get(x, y) {
                    compared += 1;
                    worst = worst.max((e - d).abs() / d);
                }
            }
        }
    }
    let coverage = compared as f64 / eligible as f64;
    let exact_ok = worst < EXACT_DEPTH_TOL && coverage > 0.9;

    let (_, out) = layouts(&run.cfg).unwrap();
    let mut rel = Vec::new();
    let mut per_frame = Vec::new();
    for t in 1..spec.frame_count() {
        let est = io::pfm::read_depth(&out.resolve(&product::depth(t))).unwrap();
        let truth = io::pfm::read_depth(&run.data(&format!("truth/depth_{t:06}.pfm"))).unwrap();
        let mut frame = Vec::new();
        for i in 0..truth.values.len() {
            let d = truth.values[i];
            if truth.valid[i] && (2.0..=20.0).contains(&d) && est.valid[i] {
                frame.push((est.values[i] - d).abs() / d);
            }
        }
        per_frame.push(median(frame.clone()));
        rel.extend(frame);
    }
    let med = median(rel);
    let worst_frame = per_frame.iter().cloned().fold(0.0, f64::max);
    let flow_ok = med < TVL1_MEDIAN_TOL;
    let time_ok = run.seconds < RUNTIME_BUDGET_S;
    outcome(
        exact_ok && flow_ok && time_ok,
        format!(
            "exact flow: worst rel err {worst:.2e} over {compared}/{eligible} px; \
             computed flow: median rel err {:.2}% (worst frame {:.2}%); \
             {SEQ_FRAMES}x{SEQ_WIDTH}x{} sequence in {:.1} s",
            100.0 * med,
            100.0 * worst_frame,
            SEQ_WIDTH / 2,
            run.seconds
        ),
    )
}

fn criterion_2() -> Outcome {
    let n = 100;
    let grid: Vec<f64> = (0..n)
        .map(|i| 1.0 + 29.0 * i as f64 / (n - 1) as f64)
        .collect();
    let map = |f: &dyn Fn(usize, usize) -> f64| {
        let values = (0..n * n).map(|i| f(i % n, i / n)).collect();
        DepthMap::from_scalar(ScalarMap::new(n, n, values, vec![true; n * n]).unwrap())
    };
    // Column index is d_cg, row index is d_real.
    let d_cg = map(&|x, _| grid[x]);
    let d_real = map(&|_, y| grid[y]);
    let p = foreground_probability(&d_real, &d_cg, 1.0, 0.5).unwrap();
    let at = |x: usize, y: usize| p.values[y * n + x];
    let diagonal = (0..n).all(|i| at(i, i) == 0.5);
    let mut monotone = true;
    for y in 0..n {
        for x in 0..n {
            if x + 1 < n {
                monotone &= at(x + 1, y) > at(x, y);
            }
            if y + 1 < n {
                monotone &= at(x, y + 1) < at(x, y);
            }
        }
    }
    let one = |v: f64| DepthMap::from_scalar(ScalarMap::filled(1, 1, v));
    let ln3 = foreground_probability(&one(1.0), &one(1.0 + 3f64.ln()), 1.0, 0.5)
        .unwrap()
        .values[0];
    let ln3_ok = (ln3 - 0.75).abs() < CLOSED_FORM_TOL;
    outcome(
        diagonal && monotone && ln3_ok,
        format!(
            "P(d,d)=0.5 on diagonal: {diagonal}; strictly monotone on {n}x{n} grid: {monotone}; \
             P(1, 1+ln3) = {ln3:.15}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let vis = VisibilityParams::default();
    let mut endpoints = true;
    for c in Category::ALL {
        let l = vis.levels(c);
        let (f0, b0) = visibility_from_uncertainty(l, 0.0);
        let (f1, b1) = visibility_from_uncertainty(l, 1.0);
        endpoints &= f0 == l.v_f1 && b0 == l.v_b1;
        endpoints &= (f1 - 0.5 * (l.v_f1 + l.v_f2)).abs() < CLOSED_FORM_TOL;
        endpoints &= (b1 - 0.5 * (l.v_b1 + l.v_b2)).abs() < CLOSED_FORM_TOL;
    }
    let omega = probability_weight(0.0, 1.0 / TAU).unwrap();
    let omega_ok = (omega - 1.0).abs() < CLOSED_FORM_TOL;
    let (simple, _) = visibility_from_uncertainty(vis.levels(Category::Simple), 0.5);
    let simple_ok = (simple - 0.000625).abs() < CLOSED_FORM_TOL;
    outcome(
        endpoints && omega_ok && simple_ok,
        format!(
            "g=0 and g=1 endpoints for all categories: {endpoints}; weight(0) = {omega}; \
             Simple V_f(g=0.5) = {simple:.9}"
        ),
    )
}

fn radial_field(w: usize, h: usize, c: PixelCoord, noise: f64, rng: &mut ChaCha8Rng) -> FlowField {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut u = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let p = PixelCoord::center(x, y);
            let dx = (p.x - c.x + 1.5 * w as f64).rem_euclid(w as f64) - 0.5 * w as f64;
            let (vx, vy) = (-0.05 * dx, -0.05 * (p.y - c.y));
            let m = vx.hypot(vy);
            u.push([
                vx + noise * m * n.sample(rng),
                vy + noise * m * n.sample(rng),
            ]);
        }
    }
    FlowField::new(w, h, u, vec![true; w * h]).unwrap()
}

fn foe_errors(noise: f64, seed: u64) -> (Vec<f64>, usize) {
    let (w, h) = (512, 256);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fallbacks = 0;
    let errs = (0..FOE_TRIALS)
        .map(|_| {
            let c = PixelCoord::new(
                rng.random_range(0.0..w as f64),
                rng.random_range(0.25 * h as f64..0.75 * h as f64),
            );
            let flow = radial_field(w, h, c, noise, &mut rng);
            let truth = AngularPoint::from_pixel(c, w, h).unwrap();
            let guess = AngularPoint::new(
                truth.theta + rng.random_range(-5.0f64..5.0).to_radians(),
                truth.phi + rng.random_range(-5.0f64..5.0).to_radians(),
            )
            .unwrap();
            let region =
                DivergenceSearchRegion::new(guess, (15f64.to_radians(), 15f64.to_radians()))
                    .unwrap();
            let est = find_divergence_point(&flow, &region, &DivergenceParams::default()).unwrap();
            fallbacks += est.fallback as usize;
            let dx = (est.pixel.0 as f64 + 0.5 - c.x).abs();
            let dx = dx.min(w as f64 - dx);
            dx.hypot(est.pixel.1 as f64 + 0.5 - c.y)
        })
        .collect();
    (errs, fallbacks)
}

fn criterion_4() -> Outcome {
    let (clean, f0) = foe_errors(0.0, 40);
    let (noisy, f1) = foe_errors(FOE_NOISE, 41);
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let pass = f0 + f1 == 0 && max(&clean) <= FOE_CLEAN_PX && max(&noisy) <= FOE_NOISY_PX;
    outcome(
        pass,
        format!(
            "{FOE_TRIALS} placements: clean worst {:.2} px, {:.0}% noise worst {:.2} px, fallbacks {}",
            max(&clean),
            100.0 * FOE_NOISE,
            max(&noisy),
            f0 + f1
        ),
    )
}

fn criterion_5() -> Outcome {
    let (w, h) = (256, 128);
    let params = FlowParams::default();
    let mut worst_epe = 0.0f64;
    let mut energy_ok = true;
    let mut deterministic = true;
    let pools: Vec<rayon::ThreadPool> = [1, 2, 4, 8]
        .iter()
        .map(|&n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
        })
        .collect();
    let shifts = [(1, 0), (2, 0), (3, 1), (-2, -1), (0, 3), (4, -2)];
    for (k, (sx, sy)) in shifts.into_iter().enumerate() {
        let a = texture(w, h, 100 + k as u64);
        let b = shifted(&a, sx, sy);
        let f = compute_flow(&a, &b, &params).unwrap();
        worst_epe = worst_epe.max(f.mean_endpoint_error(&shift_truth(w, h, sx, sy)).unwrap());
        let e = tvl1_energy(&a, &b, &f, params.lambda).unwrap();
        let e0 = tvl1_energy(&a, &b, &FlowField::zeros(w, h), params.lambda).unwrap();
        energy_ok &= e <= e0;
        deterministic &= compute_flow(&a, &b, &params).unwrap() == f;
        for pool in &pools {
            deterministic &= pool.install(|| compute_flow(&a, &b, &params).unwrap()) == f;
        }
    }
    outcome(
        worst_epe < EPE_TOL && energy_ok && deterministic,
        format!(
            "{} shift pairs: worst EPE {worst_epe:.3} px; energy <= zero-flow energy: {energy_ok}; \
             bit-identical across runs and 1/2/4/8 threads: {deterministic}",
            shifts.len()
        ),
    )
}

fn random_scene(
    seed: u64,
    w: usize,
    h: usize,
) -> (SphericalFrame, CgLayer, SemanticMap, ProbabilityMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w * h;
    let pixels = (0..n)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    let real = SphericalFrame::new(w, h, pixels, 0).unwrap();
    let mut color = RgbaImage::transparent(w, h);
    let mut depth = DepthMap::invalid(w, h);
    let (cx, cy) = (rng.random_range(0..w), rng.random_range(0..h));
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let near = (x as f64 - cx as f64).hypot(y as f64 - cy as f64) < 0.2 * w as f64;
            if near || rng.random_bool(0.05) {
                color.pixels[i] = [
                    rng.random(),
                    rng.random(),
                    rng.random(),
                    rng.random_range(0.2..=1.0),
                ];
                depth.values[i] = rng.random_range(1.0..40.0);
                depth.valid[i] = true;
            }
        }
    }
    let labels = (0..n)
        .map(|_| SemanticLabel::ALL[rng.random_range(0..9)])
        .collect();
    let unc = (0..n).map(|_| rng.random()).collect();
    let sem = SemanticMap::new(w, h, labels, unc).unwrap();
    let prob = ProbabilityMap::new(w, h, (0..n).map(|_| rng.random()).collect()).unwrap();
    (real, CgLayer::new(color, depth).unwrap(), sem, prob)
}

fn criterion_6() -> Outcome {
    let (w, h) = (128, 64);
    let cfg = BlendConfig {
        window: 16,
        ..BlendConfig::default()
    };
    let mut conserved = true;
    let mut equivalent = true;
    let trials = 20;
    for seed in 0..trials {
        let (real, cg, sem, prob) = random_scene(seed, w, h);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut lv = || {
            let (v_f, v_b) = (rng.random_range(0.0..3.0), rng.random_range(0.0..10.0));
            (
                VisibilityLevels {
                    v_f1: v_f,
                    v_f2: v_f,
                    v_b1: v_b,
                    v_b2: v_b,
                },
                FixedLevels { v_f, v_b },
            )
        };
        let (bg, fbg) = lv();
        let (si, fsi) = lv();
        let (co, fco) = lv();
        let equal_vis = VisibilityParams {
            background: bg,
            simple: si,
            complex: co,
        };
        let equal_fixed = FixedVisibilityParams {
            background: fbg,
            simple: fsi,
            complex: fco,
        };
        let defaults = (
            VisibilityParams::default(),
            FixedVisibilityParams::default(),
        );
        for (vis, fixed) in [(&defaults.0, &defaults.1), (&equal_vis, &equal_fixed)] {
            let inputs = CompositeInputs {
                real: &real,
                cg: &cg,
                semantics: &sem,
                prob: &prob,
                visibility: vis,
                fixed,
                sigma: 1.0 / TAU,
            };
            for mode in BlendMode::ALL {
                let out = composite(&inputs, mode, &cfg).unwrap();
                for i in 0..real.pixels.len() {
                    if !cg.color.covered(i) {
                        conserved &= out.frame.pixels[i] == real.pixels[i];
                    }
                }
            }
        }
        let inputs = CompositeInputs {
            real: &real,
            cg: &cg,
            semantics: &sem,
            prob: &prob,
            visibility: &equal_vis,
            fixed: &equal_fixed,
            sigma: 1.0 / TAU,
        };
        let a = composite(&inputs, BlendMode::Visibility, &cfg).unwrap();
        let b = composite(&inputs, BlendMode::FixedTransparency, &cfg).unwrap();
        equivalent &= a == b;
    }
    outcome(
        conserved && equivalent,
        format!(
            "{trials} random scenes: pixels outside the mask unchanged in all modes: {conserved}; \
             equal-level visibility and fixed modes bit-identical: {equivalent}"
        ),
    )
}

struct Overlap {
    hidden: (f64, usize),
    shown: (f64, usize),
}

fn overlap_alpha(run: &StreetRun, t: usize) -> Overlap {
    let (_, out) = layouts(&run.cfg).unwrap();
    let truth = io::pfm::read_depth(&run.data(&format!("truth/depth_{t:06}.pfm"))).unwrap();
    let cg = io::png::read_cg_layer(
        &run.data(&format!("cg/color_{t:06}.png")),
        &run.data(&format!("cg/depth_{t:06}.pfm")),
    )
    .unwrap();
    let (sem, _) = io::labels::read_semantic_map(
        &run.data(&format!("labels/label_{t:06}.png")),
        &run.data(&format!("uncertainty/uncertainty_{t:06}.png")),
    )
    .unwrap();
    let alpha =
        io::pfm::read_scalar(&out.resolve(&product::alpha(BlendMode::Visibility, t))).unwrap();
    let mut o = Overlap {
        hidden: (0.0, 0),
        shown: (0.0, 0),
    };
    for i in 0..alpha.values.len() {
        if !cg.color.covered(i) {
            continue;
        }
        let d_cg = cg.depth.values[i];
        let d_real = if truth.valid[i] {
            truth.values[i]
        } else {
            f64::INFINITY
        };
        match sem.labels[i].category() {
            Category::Simple if d_real + DEPTH_GAP_M <= d_cg => {
                o.hidden.0 += alpha.values[i];
                o.hidden.1 += 1;
            }
            Category::Background if d_cg + DEPTH_GAP_M <= d_real => {
                o.shown.0 += alpha.values[i];
                o.shown.1 += 1;
            }
            _ => {}
        }
    }
    o
}

fn criterion_7(run: &StreetRun) -> Outcome {
    let mut total = Overlap {
        hidden: (0.0, 0),
        shown: (0.0, 0),
    };
    for t in 1..run.spec.frame_count() {
        let o = overlap_alpha(run, t);
        total.hidden.0 += o.hidden.0;
        total.hidden.1 += o.hidden.1;
        total.shown.0 += o.shown.0;
        total.shown.1 += o.shown.1;
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { f64::NAN } else { s / n as f64 };
    let hidden = mean(total.hidden);
    let shown = mean(total.shown);
    let first = overlap_alpha(run, 0);
    outcome(
        total.hidden.1 > 0
            && total.shown.1 > 0
            && hidden < HIDDEN_ALPHA_MAX
            && shown > SHOWN_ALPHA_MIN,
        format!(
            "frames 1-{}: real nearer under Simple, mean alpha {hidden:.4} over {} px; \
             CG nearer under Background, mean alpha {shown:.4} over {} px \
             (frame 0 has no depth: {:.4} / {:.4})",
            run.spec.frame_count() - 1,
            total.hidden.1,
            total.shown.1,
            mean(first.hidden),
            mean(first.shown)
        ),
    )
}

fn criterion_8(run: &StreetRun) -> Outcome {
    let stage = |r: &EvalReport| {
        r.summary
            .mean_stage_ms
            .iter()
            .map(|(k, v)| format!("{k} {v:.0}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let dir = TempDir::new().unwrap();
    let spec = synth::street(1024, 512, 3, 0.5);
    synth::write_dataset(&spec, &dir.path().join("data")).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.paths.input = Some(dir.path().join("data"));
    cfg.paths.output = Some(dir.path().join("out"));
    let big = run_pipeline(&cfg, FrameRange::all()).unwrap();
    let timings_ok = [&run.report, &big].iter().all(|r| {
        r.frames.iter().all(|f| f.timings_ms.total() >= 0.0) && r.summary.frames_failed == 0
    });
    let fps = |r: &EvalReport| {
        let flow = r
            .summary
            .mean_stage_ms
            .get("flow")
            .copied()
            .unwrap_or(f64::NAN);
        1000.0 / flow
    };
    outcome(
        timings_ok && Path::new(&dir.path().join("out/report.json")).exists(),
        format!(
            "report only. 512x256 mean ms/frame: {}; 1024x512 mean ms/frame: {}; \
             flow alone {:.2} fps at 1024x512 on {} thread(s)",
            stage(&run.report),
            stage(&big),
            fps(&big),
            rayon::current_num_threads()
        ),
    )
}

fn main() {
    let run = StreetRun::new();
    let results = [
        ("depth triangulation", criterion_1(&run)),
        ("foreground probability", criterion_2()),
        ("visibility targets", criterion_3()),
        ("divergence point", criterion_4()),
        ("optical flow", criterion_5()),
        ("compositor conservation", criterion_6()),
        ("end-to-end occlusion", criterion_7(&run)),
        ("reference timings", criterion_8(&run)),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!(
            "{} criterion {} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
