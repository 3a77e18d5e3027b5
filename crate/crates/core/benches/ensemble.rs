use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use jumplab::heatkernel::{estimate_radial_density, shell_edges};
use jumplab::{Exec, JumpKernel, Sampler, SamplerConfig};

fn sampler(n_paths: usize) -> Sampler {
    let cfg = SamplerConfig::new(vec![64.0, 256.0, 1024.0], n_paths, 7).with_delta(0.5);
    Sampler::new(JumpKernel::reference(), cfg).unwrap()
}

fn ensemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    let s = sampler(2000);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_with_input(BenchmarkId::new("sample", name), &exec, |b, &e| b.iter(|| black_box(s.ensemble(e))));
    }
    g.finish();
}

fn density(c: &mut Criterion) {
    let e = sampler(20_000).ensemble(Exec::Parallel);
    let t = 1024.0;
    let i = e.time_index(t).unwrap();
    let pos: Vec<f64> = (0..e.n_paths).flat_map(|p| e.point(p, i).to_vec()).collect();
    let edges = shell_edges(t, 4096.0, 1.15);
    c.bench_function("radial_density_20k", |b| {
        b.iter(|| black_box(estimate_radial_density(&pos, 1, t, &edges, 0.25).unwrap()))
    });
}

criterion_group!(benches, ensemble, density);
criterion_main!(benches);
