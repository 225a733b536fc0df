use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lorenz_stab::cusp::SyntheticCusp;
use lorenz_stab::dynamics::flow;
use lorenz_stab::section::{attractor_point, next_crossing, return_map};
use lorenz_stab::transfer::{build_ulam, stationary_density};
use lorenz_stab::{FieldSpec, Frame, SectionSpec};

fn ulam(c: &mut Criterion) {
    let map = SyntheticCusp::default();
    let mut g = c.benchmark_group("ulam");
    for n in [1024usize, 4096] {
        g.bench_function(format!("build_{n}"), |b| b.iter(|| build_ulam(&map, black_box(n)).unwrap()));
    }
    let p = build_ulam(&map, 1024).unwrap();
    g.bench_function("power_iteration_1024", |b| b.iter(|| stationary_density(black_box(&p), 1e-12).unwrap()));
    g.finish();
}

fn flow_and_section(c: &mut Criterion) {
    let field = FieldSpec::classical(Frame::YFrame);
    let y0 = attractor_point(&field, 20.0).unwrap();
    let section = SectionSpec::new(&field, 30.0);
    let x = next_crossing(&field, &section, y0).unwrap();
    let mut g = c.benchmark_group("lorenz");
    g.bench_function("dop853_t10", |b| b.iter(|| flow(&field, black_box(y0), 10.0, 1e-10).unwrap()));
    g.bench_function("return_map", |b| b.iter(|| return_map(&field, &section, black_box(&x)).unwrap()));
    g.finish();
}

criterion_group!(benches, ulam, flow_and_section);
criterion_main!(benches);
