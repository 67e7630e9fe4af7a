//! One-thread rayon pool against the default pool on the hot kernels.
//! `cargo bench --no-default-features` runs the plain sequential loops.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fekete_field::fieldscan::{gauss_flux, lattice_pair, sample_grid, BoundingBox, PotentialSource};
use fekete_field::geometry::spherical_lattice;
use fekete_field::pointcharge::{forces, total_energy, ChargeConfiguration};
use fekete_field::Vec3;
use rayon::ThreadPoolBuilder;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::current_num_threads();
    let mut out = vec![("1-thread".to_string(), ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if default > 1 {
        out.push((format!("{default}-threads"), ThreadPoolBuilder::new().num_threads(default).build().unwrap()));
    }
    out
}

fn lattice_config(n: usize) -> ChargeConfiguration {
    let lat = spherical_lattice(n, 1.0).unwrap();
    ChargeConfiguration::uniform(lat.points, 1.0 / n as f64).unwrap()
}

fn pair_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("pair_kernels");
    let config = lattice_config(24);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("energy", &name), |b| {
            b.iter(|| pool.install(|| total_energy(black_box(&config)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("forces", &name), |b| {
            b.iter(|| pool.install(|| forces(black_box(&config)).unwrap()))
        });
    }
    group.finish();
}

fn field_scans(c: &mut Criterion) {
    let mut group = c.benchmark_group("field_scans");
    group.sample_size(10);
    let source = PotentialSource::PointSet(lattice_pair(8, 1.0, 4.0, 0.1).unwrap());
    let bbox = BoundingBox::new(Vec3::new(-3.0, -3.0, -3.0), Vec3::new(7.0, 3.0, 3.0)).unwrap();
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("grid_32", &name), |b| {
            b.iter(|| pool.install(|| sample_grid(black_box(&source), &bbox, [32, 32, 32]).unwrap()))
        });
        group.bench_function(BenchmarkId::new("gauss_flux_8192", &name), |b| {
            b.iter(|| pool.install(|| gauss_flux(black_box(&source), &Vec3::zeros(), 2.0, 8192).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, pair_kernels, field_scans);
criterion_main!(benches);
