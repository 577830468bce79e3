use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use twoslope_core::{
    energy, frac_laplacian_avg, segment_pair_energy, KernelExponent, ProblemParams, Segment,
    TwoSlopeProfile,
};

fn bench_pair_energy(c: &mut Criterion) {
    let a = Segment::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let b = Segment::new(1.5, 2.25, 0.3, -2.0).unwrap();
    let mut group = c.benchmark_group("segment_pair_energy");
    for s in [0.3, 0.5, 0.5 + 1e-7, 0.7] {
        let k = KernelExponent::new(s).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(s), &k, |bch, k| {
            bch.iter(|| segment_pair_energy(&a, &b, k, false).unwrap())
        });
    }
    group.finish();
}

fn bench_energy(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy_canonical");
    group.sample_size(20);
    for (s, delta) in [(0.3, 0.1), (0.5, 0.01), (0.75, 0.01)] {
        let params = ProblemParams::new(s, 1.0 / delta, delta, 1).unwrap();
        let u = TwoSlopeProfile::build_canonical(params).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("s{s}_d{delta}")),
            &u,
            |bch, u| bch.iter(|| energy(u, s, 1e-8).unwrap()),
        );
    }
    group.finish();
}

fn bench_laplacian_avg(c: &mut Criterion) {
    let params = ProblemParams::new(0.5, 4.0, 0.25, 2).unwrap();
    let u = TwoSlopeProfile::build_canonical(params).unwrap();
    let k = KernelExponent::new(0.5).unwrap();
    c.bench_function("frac_laplacian_avg_delta_interval", |bch| {
        bch.iter(|| frac_laplacian_avg(&u, (-0.25, 0.0), &k, 1e-7).unwrap())
    });
}

criterion_group!(benches, bench_pair_energy, bench_energy, bench_laplacian_avg);
criterion_main!(benches);
