//! Parallel (`Exec::Auto`) against sequential execution on the hot loops.
//! With the `parallel` feature off both arms run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rectbound::bounds::{lrec_with, srec_entropy_with, srec_lp_with};
use rectbound::directproduct::decay_experiment;
use rectbound::domain::make_family;
use rectbound::par::Exec;
use rectbound::protocols::{factorize, ProtocolTree};
use rectbound::sampler::{make_config, run_monte_carlo, MonteCarloOptions, Overrides};

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Auto), ("sequential", Exec::Sequential)];

fn lrec(c: &mut Criterion) {
    let (f, mu) = make_family("IP", 3).unwrap();
    let mut g = c.benchmark_group("lrec IP n=3");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| lrec_with(black_box(&f), &mu, 0, 0.1, exec).unwrap()));
    }
    g.finish();
}

fn srec_entropy(c: &mut Criterion) {
    let (f, mu) = make_family("EQ", 1).unwrap();
    let mut g = c.benchmark_group("srec_entropy EQ n=1");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| srec_entropy_with(black_box(&f), &mu, 1, 0.1, 0.3, exec).unwrap())
        });
    }
    g.finish();
}

fn srec_lp(c: &mut Criterion) {
    let (f, _) = make_family("EQ", 3).unwrap();
    let mut g = c.benchmark_group("srec_lp EQ n=3");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| srec_lp_with(black_box(&f), 1, 0.1, exec).unwrap()));
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let (f, mu) = make_family("EQ", 1).unwrap();
    let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &mu).unwrap();
    let over = Overrides { delta: Some(3.0), ..Default::default() };
    let cfg = make_config(1.5, 0.3, fac.q(), fac.m_size(), true, over).unwrap();
    let mut g = c.benchmark_group("sampler 100k trials");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = MonteCarloOptions { exec, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_monte_carlo(black_box(&fac), &cfg, 100_000, 1, &opts).unwrap())
        });
    }
    g.finish();
}

fn decay(c: &mut Criterion) {
    let (f, mu) = make_family("AND", 1).unwrap();
    let base = ProtocolTree::send_then_answer(&f).unwrap();
    let mut g = c.benchmark_group("decay t=16 100k trials");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| decay_experiment(black_box(&f), &mu, &base, 16, 0.5, 100_000, 1, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lrec, srec_entropy, srec_lp, monte_carlo, decay);
criterion_main!(benches);
