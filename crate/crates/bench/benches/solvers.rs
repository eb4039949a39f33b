use std::hint::black_box;

use composolve::problems::{full_gradient, gen_gaussian_rewards, gen_linquad};
use composolve::solvers::IndexSampling;
use composolve::{
    scpg_baseline, vrsc_pg, PortfolioProblem, Regularizer, RngStream, RunOptions, ScpgConfig,
    TraceOptions, Vector, VrscpgConfig,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn quiet() -> RunOptions {
    RunOptions {
        trace: TraceOptions {
            stride: usize::MAX,
            gradient_metrics: false,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn portfolio() -> PortfolioProblem {
    let mut rng = RngStream::new(1);
    PortfolioProblem::new(gen_gaussian_rewards(200, 50, 2.0, &mut rng).unwrap()).unwrap()
}

fn solvers(c: &mut Criterion) {
    let p = portfolio();
    let h = Regularizer::l1(1e-3).unwrap();
    let opts = quiet();

    c.bench_function("vrsc_pg/portfolio_200x50/1_epoch", |bench| {
        let cfg = VrscpgConfig {
            eta: 0.01,
            m: 100,
            epochs: 1,
            a: 5,
            b: 5,
            b1: 5,
            seed: 1,
            sampling: IndexSampling::WithReplacement,
        };
        bench.iter(|| vrsc_pg(black_box(&p), &h, &cfg, &opts).unwrap())
    });

    c.bench_function("scpg/portfolio_200x50/1000_iters", |bench| {
        let cfg = ScpgConfig::new(0.1, 1000, 1);
        bench.iter(|| scpg_baseline(black_box(&p), &h, &cfg, &opts).unwrap())
    });
}

fn gradients(c: &mut Criterion) {
    let p = portfolio();
    let x = Vector::from_element(50, 0.02);
    c.bench_function("full_gradient/portfolio_200x50", |bench| {
        bench.iter(|| full_gradient(black_box(&p), black_box(&x)).unwrap())
    });

    let mut rng = RngStream::new(2);
    let q = gen_linquad(100, 100, 20, 25, 0.3, &mut rng).unwrap();
    let y = Vector::from_element(20, 0.1);
    c.bench_function("full_gradient/linquad_100x100", |bench| {
        bench.iter(|| full_gradient(black_box(&q), black_box(&y)).unwrap())
    });
}

criterion_group!(benches, solvers, gradients);
criterion_main!(benches);
