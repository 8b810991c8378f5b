//! Sequential against rayon execution for the two hot loops: the window
//! residual (one quadrature per index) and a probe batch.

use balflow::balance::residual_with;
use balflow::diagnostics::{run_probes, ProbeSettings};
use balflow::exec::Execution;
use balflow::quadrature::QuadSettings;
use balflow::seqspace::make_reference;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn window_residual(c: &mut Criterion) {
    let q = QuadSettings::default();
    let mut group = c.benchmark_group("window_residual");
    for order in [40, 80] {
        let lam = make_reference(order).unwrap().into_sequence();
        let window = order / 2;
        for exec in MODES {
            group.bench_with_input(BenchmarkId::new(exec.to_string(), order), &lam, |b, lam| {
                b.iter(|| residual_with(black_box(lam), 0.3, window, &q, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn probe_batch(c: &mut Criterion) {
    let q = QuadSettings::default();
    let settings = ProbeSettings {
        count: 20,
        ..ProbeSettings::default()
    };
    let mut group = c.benchmark_group("probe_batch");
    group.sample_size(10);
    for exec in MODES {
        group.bench_function(exec.to_string(), |b| b.iter(|| run_probes(&settings, &q, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, window_residual, probe_batch);
criterion_main!(benches);
