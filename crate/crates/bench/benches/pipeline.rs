use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lampshade::ccvt::{ccvt, CcvtOptions};
use lampshade::design::synthesize_tubes;
use lampshade::mesh::{audit, mesh_shell, MeshOptions};
use lampshade::sim::{render, RenderOptions, TubeIndex};
use lampshade::{sample_light, Scene};
use lampshade_bench::{bump_density, disks, level_layout};

fn bench_ccvt(c: &mut Criterion) {
    let grid = bump_density(64);
    let opts = CcvtOptions {
        max_iterations: 20,
        ..Default::default()
    };
    c.bench_function("ccvt 200 sites, 20 iterations", |b| {
        b.iter(|| ccvt(&grid, 200, 1, &opts).unwrap())
    });
}

fn bench_render(c: &mut Criterion) {
    let scene = Scene::default();
    let tubes = level_layout(&scene, 0);
    let emitters = sample_light(&scene, 16).unwrap();
    let index = TubeIndex::new(&scene, &tubes);
    let opts = RenderOptions {
        resolution: 128,
        seed: 0,
    };
    c.bench_function("render 128px, level 0", |b| {
        b.iter(|| render(&scene, &emitters, &index, &opts))
    });
}

fn bench_tubes(c: &mut Criterion) {
    let scene = Scene::default();
    let input = disks(&scene, 0);
    c.bench_function("tube synthesis, level 0", |b| {
        b.iter(|| synthesize_tubes(&scene, &input, 1, 0.0).unwrap())
    });
}

fn bench_mesh(c: &mut Criterion) {
    let scene = Scene::default();
    let mut tubes = level_layout(&scene, 4);
    tubes.truncate(500);
    let opts = MeshOptions {
        voxel_size: 0.2,
        ..Default::default()
    };
    let mut group = c.benchmark_group("mesh");
    group.sample_size(10);
    group.bench_function("shell, 500 tubes", |b| {
        b.iter(|| mesh_shell(&scene, &tubes, &opts).unwrap())
    });
    group.bench_function("audit, 500 tubes", |b| {
        b.iter_batched(
            || mesh_shell(&scene, &tubes, &opts).unwrap(),
            |m| audit(&m, true),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_ccvt, bench_render, bench_tubes, bench_mesh);
criterion_main!(benches);
