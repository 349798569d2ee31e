mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use omniocc::compositor::{composite, BlendMode, CompositeInputs};
use omniocc::depth::{
    find_divergence_point, foreground_probability, triangulate_depth, DivergenceSearchRegion,
};
use omniocc::flow::compute_flow;
use omniocc::image::{ProbabilityMap, ScalarMap};
use omniocc::io;
use omniocc::pipeline::{
    compare_modes, run_pipeline, DivergenceRecord, FrameRange, FrameStatus, PipelineConfig,
};
use omniocc::sphere::AngularPoint;
use omniocc::synth;
use omniocc::{Error, Result};

use args::*;

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_DATA
            })
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Flow(a) => flow(a),
        Command::Depth(a) => depth(a),
        Command::Probmap(a) => probmap(a),
        Command::Composite(a) => composite_cmd(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Compare(a) => compare(a),
    }
}

fn load_config(arg: &ConfigArg) -> Result<PipelineConfig> {
    match &arg.config {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn flow(a: FlowArgs) -> Result<u8> {
    let mut cfg = load_config(&a.config)?;
    set(&mut cfg.flow.lambda, a.lambda);
    set(&mut cfg.flow.iterations, a.iterations);
    set(&mut cfg.flow.levels, a.levels);
    set(&mut cfg.flow.warps_per_level, a.warps);
    cfg.validate()?;
    let from = io::png::read_frame(&a.from, 0)?;
    let to = io::png::read_frame(&a.to, 1)?;
    let f = compute_flow(&from.to_gray(), &to.to_gray(), &cfg.flow)?;
    io::flo::write(&a.output, &f)?;
    Ok(0)
}

fn depth(a: DepthArgs) -> Result<u8> {
    let mut cfg = load_config(&a.config)?;
    set(&mut cfg.depth.epsilon_tri_deg, a.epsilon_tri_deg);
    set(&mut cfg.depth.d_max, a.d_max);
    cfg.validate()?;
    let flow = io::flo::read(&a.flow)?;
    let poses = io::poses::read(&a.poses)?;
    let prev_index = match a.prev {
        Some(p) => p,
        None => a
            .frame
            .checked_sub(1)
            .ok_or_else(|| Error::Config("frame 0 has no previous frame; pass --prev".into()))?,
    };
    let missing = |i: usize| Error::Format {
        format: "pose manifest",
        reason: format!("no pose for frame {i}"),
    };
    let curr = poses.get(a.frame).ok_or_else(|| missing(a.frame))?;
    let prev = poses.get(prev_index).ok_or_else(|| missing(prev_index))?;
    let travel = curr.position - prev.position;
    if travel.norm() == 0.0 {
        return Err(Error::BaselineTooShort {
            baseline: 0.0,
            minimum: cfg.depth.baseline_min,
        });
    }
    let dp = &cfg.depth.divergence;
    let region = DivergenceSearchRegion::new(
        AngularPoint::from_direction(&curr.to_camera(&travel.normalize()))?,
        (
            dp.half_extent_deg[0].to_radians(),
            dp.half_extent_deg[1].to_radians(),
        ),
    )?;
    let est = find_divergence_point(&flow, &region, dp)?;
    if est.fallback {
        log::warn!("divergence search fell back to the direction of travel");
    }
    let d = triangulate_depth(&flow, &prev, &curr, est.point, &cfg.depth.triangulation())?;
    io::pfm::write_depth(&a.output, &d)?;
    if let Some(p) = &a.divergence_out {
        let rec = DivergenceRecord {
            theta: est.point.theta,
            phi: est.point.phi,
            pixel: [est.pixel.0, est.pixel.1],
            response: est.response,
            fallback: est.fallback,
        };
        io::write_bytes(p, serde_json::to_string_pretty(&rec)?.as_bytes())?;
    }
    Ok(0)
}

fn probmap(a: ProbmapArgs) -> Result<u8> {
    let mut cfg = load_config(&a.config)?;
    set(&mut cfg.depth.k, a.k);
    set(&mut cfg.depth.p_unknown, a.p_unknown);
    cfg.validate()?;
    let real = io::pfm::read_depth(&a.real)?;
    let cg = io::pfm::read_depth(&a.cg)?;
    let p = foreground_probability(&real, &cg, cfg.depth.k, cfg.depth.p_unknown)?;
    let (w, h) = p.dims();
    io::pfm::write_scalar(
        &a.output,
        &ScalarMap::new(w, h, p.values, vec![true; w * h])?,
    )?;
    Ok(0)
}

fn composite_cmd(a: CompositeArgs) -> Result<u8> {
    let mut cfg = load_config(&a.config)?;
    set(&mut cfg.blend.window, a.window);
    set(&mut cfg.blend.kappa, a.kappa);
    set(&mut cfg.sigma, a.sigma);
    cfg.validate()?;
    let mode = a.mode.map_or(cfg.blend.mode, BlendMode::from);
    let real = io::png::read_frame(&a.frame, 0)?;
    let (sem, _) = io::labels::read_semantic_map(&a.labels, &a.uncertainty)?;
    let cg = io::png::read_cg_layer(&a.cg_color, &a.cg_depth)?;
    let p = io::pfm::read_scalar(&a.prob)?;
    let (w, h) = p.dims();
    let prob = ProbabilityMap::new(w, h, p.values)?;
    let out = composite(
        &CompositeInputs {
            real: &real,
            cg: &cg,
            semantics: &sem,
            prob: &prob,
            visibility: &cfg.visibility,
            fixed: &cfg.fixed_visibility,
            sigma: cfg.sigma,
        },
        mode,
        &cfg.blend,
    )?;
    io::png::write_frame(&a.output, &out.frame)?;
    if let Some(p) = &a.alpha_out {
        io::pfm::write_scalar(p, &ScalarMap::new(w, h, out.alpha, vec![true; w * h])?)?;
    }
    Ok(0)
}

fn run_config(run: &RunArgs) -> Result<(PipelineConfig, FrameRange)> {
    let mut cfg = load_config(&run.config)?;
    if run.input.is_some() {
        cfg.paths.input = run.input.clone();
    }
    if run.output.is_some() {
        cfg.paths.output = run.output.clone();
    }
    Ok((cfg, run.frames.unwrap_or_default()))
}

fn pipeline(a: PipelineArgs) -> Result<u8> {
    let (mut cfg, range) = run_config(&a.run)?;
    if let Some(s) = a.flow_source {
        cfg.flow_source = s.into();
    }
    if let Some(m) = a.modes {
        cfg.modes = m.into_iter().map(BlendMode::from).collect();
    }
    set(&mut cfg.in_flight, a.in_flight);
    set(&mut cfg.depth.window, a.window);
    set(&mut cfg.blend.window, a.blend_window);
    if a.cache_dir.is_some() {
        cfg.cache.dir = a.cache_dir;
    }
    if a.no_cache {
        cfg.cache.enabled = false;
    }
    cfg.validate()?;
    if a.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(0);
    }
    let report = run_pipeline(&cfg, range)?;
    let s = &report.summary;
    println!(
        "{} frames: {} ok, {} failed, {:.0} ms",
        s.frames_total, s.frames_ok, s.frames_failed, s.wall_ms
    );
    for f in report
        .frames
        .iter()
        .filter(|f| f.status == FrameStatus::Failed)
    {
        println!(
            "  frame {}: {}",
            f.index,
            f.error.as_deref().unwrap_or("failed")
        );
    }
    Ok(if s.frames_failed > 0 { EXIT_DATA } else { 0 })
}

fn synth_cmd(a: SynthArgs) -> Result<u8> {
    let spec = match &a.scene {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|_| Error::MissingInput(p.clone()))?;
            synth::SceneSpec::from_json(&text)?
        }
        None => {
            if a.width < 8 || !a.width.is_multiple_of(2) {
                return Err(Error::Config("--width must be even and at least 8".into()));
            }
            if a.frames == 0 {
                return Err(Error::Config("--frames must be at least 1".into()));
            }
            let h = a.width / 2;
            match a.preset {
                Preset::Street => synth::street(a.width, h, a.frames, a.step),
                Preset::LateralWall => {
                    synth::lateral_wall(a.width, h, a.distance, a.step, a.frames)
                }
                Preset::WallApproach => {
                    synth::wall_approach(a.width, h, a.distance, a.step, a.frames)
                }
            }
        }
    };
    synth::write_dataset(&spec, &a.output)?;
    println!(
        "wrote {} frames to {}",
        spec.frame_count(),
        display(&a.output)
    );
    Ok(0)
}

fn compare(a: CompareArgs) -> Result<u8> {
    let (cfg, range) = run_config(&a.run)?;
    let report = compare_modes(&cfg, range)?;
    print!("{}", report.table());
    Ok(0)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
