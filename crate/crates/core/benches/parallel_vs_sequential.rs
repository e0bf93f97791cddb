//! Parallel versus sequential execution of the main data-parallel paths.
//!
//! Both variants run the same code; `exec::set_parallel` switches the
//! dispatch. On a single core the two should be close.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mvrecon::evalkit::{chamfer, sample_surface};
use mvrecon::exec;
use mvrecon::geometry::Camera;
use mvrecon::isoext::{extract_mesh, ScalarGrid};
use mvrecon::liftnet::{Model, NetConfig};
use mvrecon::render::rasterize;
use mvrecon::synthdata::{generate_dataset, DatasetConfig};
use mvrecon::Array;

fn policies() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn bench(c: &mut Criterion) {
    let samples = generate_dataset(&DatasetConfig { train: 1, eval: 0, ..DatasetConfig::default() }).unwrap();
    let s = &samples[0];
    let posed: Vec<(Camera, Array)> = (0..s.views.len()).map(|i| (*s.views.camera(i), s.images[i].clone())).collect();
    let model = Model::new(NetConfig::desk(), 0).unwrap();
    let grid = ScalarGrid::from_fn(48, |p| p.norm() - 0.6);
    let mesh = extract_mesh(&grid).unwrap().mesh;
    let a = sample_surface(&mesh, 4096, 1).unwrap();
    let b = sample_surface(&mesh, 4096, 2).unwrap();

    let mut g = c.benchmark_group("exec");
    g.sample_size(10);
    for (name, on) in policies() {
        exec::set_parallel(on);
        g.bench_with_input(BenchmarkId::new("infer", name), &on, |bch, _| bch.iter(|| black_box(model.infer(&posed).unwrap())));
        g.bench_with_input(BenchmarkId::new("rasterize_7_views", name), &on, |bch, _| {
            bch.iter(|| {
                exec::map_indexed(s.views.len(), |i| rasterize(&mesh, s.views.camera(i), 64).unwrap().covered_count())
            })
        });
        g.bench_with_input(BenchmarkId::new("chamfer_4096", name), &on, |bch, _| bch.iter(|| black_box(chamfer(&a, &b).unwrap())));
    }
    exec::set_parallel(true);
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
