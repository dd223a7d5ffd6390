use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ild_bench::{bin_problem, reference_run};
use ild_core::beamform::{jblcmv, ConstraintSet, Method};
use ild_core::sdp::{build_problem, solve, SolverOptions, Variant};
use ild_core::sphere::{sphere_pressure_series, SphereParams};
use ild_core::stft::{analyze, synthesize, StftConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere(c: &mut Criterion) {
    let params = SphereParams::default();
    let mut g = c.benchmark_group("sphere");
    for f in [100.0, 800.0, 7_900.0] {
        g.bench_function(format!("series_{f}hz"), |b| {
            b.iter(|| sphere_pressure_series(&params, black_box(f), 1.2, 0.5).unwrap())
        });
    }
    g.finish();
}

fn stft(c: &mut Criterion) {
    let cfg = StftConfig::new(16_000.0, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..16_000).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    c.bench_function("stft/analyze_4ch_1s", |b| {
        b.iter(|| analyze(&cfg, black_box(&x)).unwrap())
    });
    let spec = analyze(&cfg, &x).unwrap();
    c.bench_function("stft/synthesize_4ch_1s", |b| {
        b.iter(|| synthesize(&cfg, black_box(&spec)).unwrap())
    });
}

fn beamformers(c: &mut Criterion) {
    let run = reference_run(4, 4, 1.0);
    let (p, a, bs, refs) = bin_problem(&run, 6);
    let cs = ConstraintSet::new(&a, &bs, refs);
    c.bench_function("beamform/jblcmv_m4_r4", |b| {
        b.iter(|| jblcmv(black_box(&p), &cs).unwrap())
    });

    let scaling = vec![2.0; bs.len()];
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("sdp");
    g.sample_size(20);
    for (name, variant) in [("problem2", Variant::Problem2), ("problem3", Variant::Problem3)] {
        g.bench_function(format!("{name}_m4_r4"), |b| {
            b.iter_batched(
                || build_problem(&p, &a, &bs, &scaling, refs, variant).unwrap(),
                |problem| solve(&problem, &opts),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();

    let mut g = c.benchmark_group("design");
    g.sample_size(10);
    let opts = run.options();
    for m in [Method::Jblcmv, Method::Ild(0.2)] {
        g.bench_function(format!("{m}_m4_r4_all_bins"), |b| {
            b.iter(|| run.design(m, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sphere, stft, beamformers);
criterion_main!(benches);
