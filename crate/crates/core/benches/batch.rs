//! Batched Lichnerowicz solves and a k-grid of coupled solves, sequential
//! against the rayon pool.

use conflab::coupled::picard_solve;
use conflab::exec::Execution;
use conflab::fixtures::{bundled_geometry, bundled_seed};
use conflab::lichnerowicz::{solve_many, LichProblem, SolveOptions};
use conflab::{Order, ScalarField};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::sync::Arc;

fn problems(n: usize, count: usize) -> Vec<LichProblem> {
    let g = Arc::new(bundled_geometry(n, Order::Four).unwrap());
    let grid = g.grid().clone();
    (0..count)
        .map(|i| {
            let s = i as f64 / count as f64;
            let tau = ScalarField::from(grid.sample(|x| 0.5 + 0.3 * (x + s).cos()));
            let w = ScalarField::from(grid.sample(|x| 1.0 + 0.5 * s * (2.0 * x).sin()));
            LichProblem::new(g.clone(), tau, &w, 0.2 + 0.8 * s).unwrap()
        })
        .collect()
}

fn lichnerowicz_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("lichnerowicz_batch");
    group.sample_size(10);
    for n in [256, 1024] {
        let probs = problems(n, 32);
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), n), &probs, |b, p| {
                b.iter(|| solve_many(p, SolveOptions::default(), exec))
            });
        }
    }
    group.finish();
}

fn coupled_k_grid(c: &mut Criterion) {
    let seed = bundled_seed(128, Order::Four).unwrap();
    let ks: Vec<f64> = (0..16).map(|j| 10f64.powf(j as f64 / 4.0)).collect();
    let one = ScalarField::constant(128, 1.0);
    let mut group = c.benchmark_group("coupled_k_grid");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| exec.map(&ks, |&k| picard_solve(&seed.with_k(k).unwrap(), &one).map(|r| r.sup_phi)))
        });
    }
    group.finish();
}

criterion_group!(benches, lichnerowicz_batch, coupled_k_grid);
criterion_main!(benches);
