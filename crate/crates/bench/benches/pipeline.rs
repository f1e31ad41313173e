use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use symlab::fem::Degree;
use symlab::geometry::{asymmetry, geometry_summary};
use symlab::mesh::triangulate;
use symlab::torsion::solve_torsion;
use symlab_bench::star;

fn meshing(c: &mut Criterion) {
    let curve = star();
    let mut group = c.benchmark_group("triangulate");
    for h in [0.1, 0.05, 0.025] {
        group.bench_with_input(BenchmarkId::from_parameter(h), &h, |b, &h| {
            b.iter(|| triangulate(&curve, h).unwrap())
        });
    }
    group.finish();
}

fn torsion(c: &mut Criterion) {
    let curve = star();
    let mut group = c.benchmark_group("solve_torsion");
    group.sample_size(10);
    for h in [0.1, 0.05] {
        let mesh = Arc::new(triangulate(&curve, h).unwrap());
        for degree in [Degree::Linear, Degree::Quadratic] {
            let id = BenchmarkId::new(format!("P{}", degree.order()), h);
            group.bench_with_input(id, &mesh, |b, mesh| b.iter(|| solve_torsion(mesh.clone(), degree).unwrap()));
        }
    }
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let curve = star();
    let r = geometry_summary(&curve, 2048).unwrap().r_ref;
    c.bench_function("geometry_summary/2048", |b| b.iter(|| geometry_summary(&curve, 2048).unwrap()));
    c.bench_function("asymmetry", |b| b.iter(|| asymmetry(&curve, r)));
}

criterion_group!(benches, meshing, torsion, geometry);
criterion_main!(benches);
