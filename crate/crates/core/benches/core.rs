//! Single worker against the full pool for the data-parallel kernels.
//! Build with `--no-default-features` for the purely sequential code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use twoprice::experiments::{generate_small_stock, run_scale, run_small_stock, SmallStockFamily};
use twoprice::par;
use twoprice::policies::{fluid_policy, optimize_two_price, Method};
use twoprice::simulator::{simulate_replications, DurationDistribution, SimConfig};
use twoprice::{ProblemInstance, RewardFunction};

fn kinked() -> RewardFunction {
    RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap()
}

fn pools() -> Vec<(&'static str, usize)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![("threads=1", 1), ("threads=all", all)]
}

fn tau_scan(cr: &mut Criterion) {
    let mut group = cr.benchmark_group("tau_scan");
    group.sample_size(10);
    let g = RewardFunction::min_affine(&[(0.0, 3.0), (0.3, 1.5), (1.2, 0.0)]).unwrap();
    let inst = ProblemInstance::new(500, 1000.0, 1.0, g).unwrap();
    for (name, k) in pools() {
        group.bench_function(BenchmarkId::new("two_price_opt_c500", name), |b| {
            b.iter(|| par::with_threads(k, || optimize_two_price(&inst).reward))
        });
    }
    group.finish();
}

fn scale_sweep(cr: &mut Criterion) {
    let mut group = cr.benchmark_group("scale_sweep");
    group.sample_size(10);
    let base = ProblemInstance::new(1000, 2000.0, 1.0, kinked()).unwrap();
    let scales = [1000, 2000, 5000, 10000];
    let methods = [Method::Fluid, Method::StaticOpt, Method::StockDependentOpt];
    for (name, k) in pools() {
        group.bench_function(BenchmarkId::new("fluid_static_sd", name), |b| {
            b.iter(|| par::with_threads(k, || run_scale(&base, &scales, &methods, "kinked", 0, false).unwrap()))
        });
    }
    group.finish();
}

fn random_instances(cr: &mut Criterion) {
    let mut group = cr.benchmark_group("random_instances");
    group.sample_size(10);
    let gs = generate_small_stock(SmallStockFamily::Kinked, 8, 1).unwrap();
    for (name, k) in pools() {
        group.bench_function(BenchmarkId::new("small_stock_8x2", name), |b| {
            b.iter(|| par::with_threads(k, || run_small_stock(SmallStockFamily::Kinked, &gs, &[20, 40], 0, false).unwrap()))
        });
    }
    group.finish();
}

fn sim_replications(cr: &mut Criterion) {
    let mut group = cr.benchmark_group("sim_replications");
    group.sample_size(10);
    let inst = ProblemInstance::new(50, 100.0, 1.0, kinked()).unwrap();
    let policy = fluid_policy(&inst);
    let dur = DurationDistribution::LogNormal { mean: 1.0, cv: 1.5 };
    let cfg = SimConfig::new(3, 2000.0);
    for (name, k) in pools() {
        group.bench_function(BenchmarkId::new("lognormal_4_reps", name), |b| {
            b.iter(|| par::with_threads(k, || simulate_replications(&inst, &policy, &dur, &cfg, 4).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, tau_scan, scale_sweep, random_instances, sim_replications);
criterion_main!(benches);
