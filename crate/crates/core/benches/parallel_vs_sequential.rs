use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dyco_core::graph::{build_growth_snapshots, random_temporal_er};
use dyco_core::gwlab::{gw_round, solve_gw_sdp, SdpConfig};
use dyco_core::oracle::exact_maxcut;
use dyco_core::par::Exec;
use dyco_core::solver::{run_repetitions, SolveSchedule, Strategy};
use dyco_core::GraphSnapshot;

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn last_snapshot(n: usize, m: usize) -> GraphSnapshot {
    let ev = random_temporal_er(n, m, 1).unwrap();
    build_growth_snapshots(&ev, 2, 0.5).unwrap().snapshots()[1].clone()
}

fn oracle(c: &mut Criterion) {
    let g = last_snapshot(22, 60);
    let mut group = c.benchmark_group("exact_maxcut_n22");
    group.sample_size(10);
    for (name, exec) in EXECS {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| exact_maxcut(&g, exec).unwrap()));
    }
    group.finish();
}

fn rounding(c: &mut Criterion) {
    let g = last_snapshot(20, 60);
    let x = solve_gw_sdp(&g, &SdpConfig::default()).unwrap().point;
    let mut group = c.benchmark_group("gw_round_10k");
    group.sample_size(10);
    for (name, exec) in EXECS {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gw_round(&g, &x, 10_000, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn repetitions(c: &mut Criterion) {
    let ev = random_temporal_er(30, 100, 2).unwrap();
    let inst = build_growth_snapshots(&ev, 4, 0.25).unwrap();
    let sched = SolveSchedule {
        strategy: Strategy::Sp,
        epoch_max: 100,
        epoch_ws: 50,
        embedding_dim: 64,
        hidden_dim: 32,
        repetitions: 4,
        ..Default::default()
    };
    let mut group = c.benchmark_group("sp_repetitions_4");
    group.sample_size(10);
    for (name, exec) in EXECS {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_repetitions(&inst, &sched, &[10, 50], exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle, rounding, repetitions);
criterion_main!(benches);
