//! Single-thread versus full-pool timings of the data-parallel stages.
//!
//! `cargo bench -p omniocc` compares a one-thread pool with the default
//! pool; `cargo bench -p omniocc --no-default-features` times the
//! sequential build of the same kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use omniocc::compositor::{visibility_blend, BlendConfig};
use omniocc::depth::{triangulate_depth, TriangulationParams};
use omniocc::flow::{compute_flow, FlowParams};
use omniocc::image::ProbabilityMap;
use omniocc::semantics::{visibility_field, VisibilityParams, DEFAULT_SIGMA};
use omniocc::sphere::AngularPoint;
use omniocc::synth::{self, ground_truth_flow, make_cg_layer, render_scene};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads().max(2);
    [1, all]
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap();
            (format!("{n}_threads"), pool)
        })
        .collect()
}

fn stages(c: &mut Criterion) {
    let spec = synth::street(256, 128, 2, 0.5);
    let f0 = render_scene(&spec, 0).unwrap();
    let f1 = render_scene(&spec, 1).unwrap();
    let (g0, g1) = (f0.frame.to_gray(), f1.frame.to_gray());
    let truth = ground_truth_flow(&spec, 1, 0).unwrap();
    let (p0, p1) = (spec.pose(0).unwrap(), spec.pose(1).unwrap());
    let foe = AngularPoint::from_direction(&p1.to_camera(&(p1.position - p0.position))).unwrap();
    let cg = make_cg_layer(&spec, 1).unwrap();
    let prob = ProbabilityMap::filled(256, 128, 0.7);
    let vis = visibility_field(
        &f1.semantics,
        &prob,
        &VisibilityParams::default(),
        DEFAULT_SIGMA,
    )
    .unwrap();
    let blend = BlendConfig::default();
    let flow_params = FlowParams::default();

    let mut group = c.benchmark_group("stages");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("tvl1_256x128", &name), |b| {
            b.iter(|| pool.install(|| compute_flow(&g1, &g0, &flow_params).unwrap()))
        });
        group.bench_function(BenchmarkId::new("triangulate_256x128", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    triangulate_depth(&truth, &p0, &p1, foe, &TriangulationParams::default())
                        .unwrap()
                })
            })
        });
        group.bench_function(BenchmarkId::new("visibility_blend_256x128", &name), |b| {
            b.iter(|| pool.install(|| visibility_blend(&f1.frame, &cg, &vis, &blend).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
