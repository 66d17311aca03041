use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlrbg::metrics::mssim;
use wlrbg::numerics::svd;
use wlrbg::pipeline::run_pipeline;
use wlrbg::synth::generate;
use wlrbg::wlr::{sweep, update_x1, WlrState};
use wlrbg::{DenseMatrix, PipelineConfig, SynthSpec, WeightBlock, WlrConfig};

fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| g.random_range(-1.0..1.0))
}

fn bench_svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd");
    for (m, n) in [(1200, 60), (5120, 120)] {
        let a = random(m, n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{n}")), &a, |b, a| b.iter(|| svd(a).unwrap()));
    }
    group.finish();
}

fn bench_wlr(c: &mut Criterion) {
    let (m, n, k, r) = (5120, 120, 10, 12);
    let a = random(m, n, 2);
    let a1 = a.columns(0, k).into_owned();
    let a2 = a.columns(k, n - k).into_owned();
    let w1 = WeightBlock::uniform(m, k, 500.0, 1000.0, 3).unwrap();
    let state = WlrState::initial(m, n, &WlrConfig::new(r, k));
    c.bench_function("update_x1", |b| b.iter(|| update_x1(&state, &a1, &a2, &w1).unwrap()));
    c.bench_function("sweep", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| sweep(&mut s, &a1, &a2, &w1, false).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let data = generate(&SynthSpec::default()).unwrap();
    let config = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("default_synth", |b| b.iter(|| run_pipeline(&data, &config).unwrap()));
    group.finish();
}

fn bench_ssim(c: &mut Criterion) {
    let x = random(64, 80, 4).map(|v| 127.5 * (v + 1.0));
    let y = random(64, 80, 5).map(|v| 127.5 * (v + 1.0));
    c.bench_function("mssim_64x80", |b| b.iter(|| mssim(&x, &y).unwrap()));
}

criterion_group!(benches, bench_svd, bench_wlr, bench_pipeline, bench_ssim);
criterion_main!(benches);
