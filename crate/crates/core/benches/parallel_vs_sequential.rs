use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kahler_lab::exec::Exec;
use kahler_lab::fibration::{self, BaseGrid, FamilyDescriptor, TauMap};
use kahler_lab::polytope::stock;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn lattice_counts(c: &mut Criterion) {
    let p = stock::unit_cube();
    let mut g = c.benchmark_group("lattice_point_count");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 24), &24, |b, &k| {
            b.iter(|| p.lattice_point_count_with(black_box(k), exec).unwrap())
        });
    }
    g.finish();
}

fn wp_field(c: &mut Criterion) {
    let grid = BaseGrid { center: [0.0, 1.5], spacing: 0.05, half_count: 4 };
    let fam = FamilyDescriptor::torus(TauMap::Affine { tau0: [0.0, 0.0], slope: [1.0, 0.0] }, grid, 16);
    let mut g = c.benchmark_group("wp_field");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| fibration::wp_field(black_box(&fam), exec).unwrap()));
    }
    g.finish();
}

fn foliation(c: &mut Criterion) {
    let grid = BaseGrid { center: [0.0, 0.0], spacing: 0.05, half_count: 6 };
    let fam = FamilyDescriptor::torus(TauMap::Mixed { height: 1.0, amplitude: 1.0, edge: 0.0 }, grid, 32);
    let mut g = c.benchmark_group("foliation_report");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| fibration::foliation_report(black_box(&fam), exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, lattice_counts, wp_field, foliation);
criterion_main!(benches);
