use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fpep_core::attacks::{sb_attack, symmetrize};
use fpep_core::bounds::{optimize_delta, DEFAULT_RESOLUTION};
use fpep_core::eve::{simulate_eve, EveStrategy, StrategyKind};
use fpep_core::linalg::{eigh, haar_unitary, mixed_fidelity};
use fpep_core::signals::run_exchange;
use fpep_core::{DensityMatrix, Operator};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn linalg(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = haar_unitary(16, &mut rng);
    let herm = Operator::from_fn(16, |i, j| u.get(i, j) + u.get(j, i).conj());
    c.bench_function("eigh_16", |b| b.iter(|| eigh(black_box(&herm))));

    let a = u.column(0);
    let bk = u.column(1);
    let cc = u.column(2);
    let r0 = DensityMatrix::from_kets(&[&a, &bk]).unwrap();
    let r1 = DensityMatrix::from_kets(&[&a, &cc]).unwrap();
    c.bench_function("mixed_fidelity_16", |b| {
        b.iter(|| mixed_fidelity(black_box(&r0), black_box(&r1)).unwrap())
    });
}

fn bounds(c: &mut Criterion) {
    c.bench_function("optimize_delta", |b| {
        b.iter(|| optimize_delta(black_box(0.1), DEFAULT_RESOLUTION).unwrap())
    });
}

fn attacks(c: &mut Criterion) {
    let sb = sb_attack(0.1).unwrap();
    let (u, w) = sb.probe().to_unitary();
    c.bench_function("symmetrize_sb", |b| {
        b.iter(|| symmetrize(black_box(&u), black_box(&w)).unwrap())
    });

    let probe = sb.symmetrized_probe().unwrap();
    let mut group = c.benchmark_group("exchange");
    group.sample_size(10);
    group.bench_function("run_exchange_100k", |b| {
        b.iter(|| run_exchange(&probe, black_box(100_000), 7).unwrap())
    });
    let ex = run_exchange(&probe, 100_000, 7).unwrap();
    let strategy = EveStrategy::new(StrategyKind::TwoStage, &probe).unwrap();
    group.bench_function("simulate_eve_100k", |b| {
        b.iter(|| simulate_eve(black_box(&ex), &strategy, 8).unwrap())
    });
    group.finish();
}

criterion_group!(benches, linalg, bounds, attacks);
criterion_main!(benches);
