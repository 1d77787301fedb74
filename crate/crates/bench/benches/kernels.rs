use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use spatial_hom::oracle::{oracle_deviation, ModeGrid};
use spatial_hom::*;

fn lab() -> BeamGeometry {
    BeamGeometry::laboratory()
}

fn fisher(c: &mut Criterion) {
    let geo = lab();
    let noise = NoiseModel::new(0.1, 0.85).unwrap();
    let theta = Deflection::from_mrad(1.01).unwrap();
    let mut g = c.benchmark_group("fisher");
    g.bench_function("adaptive_simpson", |b| {
        b.iter(|| classical_fisher_information(black_box(theta), &geo, &noise, &QuadratureSpec::default()).unwrap())
    });
    let gh = QuadratureSpec::gauss_hermite(128);
    g.bench_function("gauss_hermite_128", |b| {
        b.iter(|| classical_fisher_information(black_box(theta), &geo, &noise, &gh).unwrap())
    });
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let geo = lab();
    let noise = NoiseModel::new(0.1, 0.85).unwrap();
    let theta = Deflection::from_mrad(1.01).unwrap();
    c.bench_function("simulate_run_100k", |b| {
        b.iter(|| simulate_run(100_000, theta, &geo, &noise, RngSeed::new(black_box(1), 0)).unwrap())
    });
}

fn estimation(c: &mut Criterion) {
    let geo = lab();
    let theta = Deflection::from_mrad(1.01).unwrap();
    let events = simulate_run(10_000, theta, &geo, &NoiseModel::ideal(), RngSeed::new(3, 0)).unwrap();
    let mut g = c.benchmark_group("estimation");
    g.sample_size(20);
    g.bench_function("mle_10k_events", |b| {
        b.iter(|| mle_deflection(black_box(&events), &geo, &NoiseModel::ideal(), &MleOptions::default()).unwrap())
    });
    let spec = ScanSpec {
        bins: BinSpec::new(-0.12e6, 0.12e6, 241).unwrap(),
        exposure_per_bin: 2_000,
        slit_width: None,
        acquisition: Acquisition::Binomial,
    };
    let noise = NoiseModel::new(0.0, 0.85).unwrap();
    g.bench_function("fit_pattern_241_bins", |b| {
        b.iter_batched(
            || scan_pattern(&spec, theta, &geo, &noise, RngSeed::new(4, 0)).unwrap(),
            |p| fit_pattern(&p, &FitOptions::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let geo = lab();
    let ks: Vec<f64> = (0..10).map(|i| -6e4 + 1.2e5 * i as f64 / 9.0).collect();
    let grid = ModeGrid::scaled(&geo, 8.0, 1024).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(20);
    g.bench_function("deviation_10x10_n1024", |b| {
        b.iter(|| oracle_deviation(Deflection::from_mrad(1.01).unwrap(), black_box(&ks), &geo, &grid).unwrap())
    });
    g.finish();
}

criterion_group!(benches, fisher, sampling, estimation, oracle);
criterion_main!(benches);
