use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use losvm_core::dataset::{standardize, synth_dirty, total_variance, DataMatrix};
use losvm_core::kernel::{gamma_silverman, KernelContext, KernelKind};
use losvm_core::losvm::run_losvm;
use losvm_core::solver::{train, Variant};

fn benchmark_data(n_cluster: usize, n_noise: usize) -> (DataMatrix, f64) {
    let data = standardize(&synth_dirty(n_cluster, n_noise, 1)).unwrap();
    let var = total_variance(&data).unwrap();
    let gamma = gamma_silverman(data.n_rows(), data.dims(), var).unwrap();
    (data, gamma)
}

fn bench_train(c: &mut Criterion) {
    let mut group = c.benchmark_group("train");
    group.sample_size(20);
    for &n in &[200usize, 500] {
        let (data, gamma) = benchmark_data(n, n / 20);
        group.bench_with_input(BenchmarkId::from_parameter(data.n_rows()), &data, |b, data| {
            b.iter(|| {
                let mut ctx = KernelContext::new(data, KernelKind::Rbf { gamma });
                train(&mut ctx, Variant::Svdd, 1.0, 1e-4).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_removal_batching(c: &mut Criterion) {
    let (data, gamma) = benchmark_data(300, 15);
    let mut group = c.benchmark_group("remove_20");
    group.sample_size(10);
    for &batches in &[4usize, 20] {
        group.bench_with_input(
            BenchmarkId::new("batches", batches),
            &batches,
            |bench, &batches| {
                bench.iter(|| {
                    let mut ctx = KernelContext::new(&data, KernelKind::Rbf { gamma });
                    run_losvm(&mut ctx, Variant::Svdd, 1.0, 1e-4, 20, batches).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_leave_out_scoring(c: &mut Criterion) {
    let (data, gamma) = benchmark_data(400, 20);
    c.bench_function("leave_out_scoring_420", |b| {
        b.iter(|| {
            let mut ctx = KernelContext::new(&data, KernelKind::Rbf { gamma });
            run_losvm(&mut ctx, Variant::Svdd, 1.0, 1e-4, 0, 1).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_train,
    bench_removal_batching,
    bench_leave_out_scoring
);
criterion_main!(benches);
