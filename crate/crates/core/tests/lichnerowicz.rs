use conflab::exec::Execution;
use conflab::fixtures::bundled_geometry;
use conflab::geometry::laplacian_apply;
use conflab::lichnerowicz::{bracket, monotone_iterate, solve, solve_many, LichProblem, SolveOptions};
use conflab::{Fibre, Grid, Order, ReducedGeometry, ScalarField};
use proptest::prelude::*;
use std::sync::Arc;

fn round(n: usize) -> Arc<ReducedGeometry> {
    let grid = Grid::periodic(n, Order::Four).unwrap();
    let len = grid.len();
    let fibres = vec![Fibre::circle(ScalarField::constant(len, 0.7)), Fibre::sphere(2, ScalarField::constant(len, 0.8))];
    Arc::new(ReducedGeometry::new(grid, ScalarField::constant(len, 1.0), fibres).unwrap())
}

fn field(grid: &Grid, f: impl Fn(f64) -> f64) -> ScalarField {
    ScalarField::from(grid.sample(f))
}

/// Root of Rφ + cφ^{N−1} − w²φ^{−N−1} by bisection.
fn scalar_root(r: f64, c: f64, w2: f64, big_n: f64) -> f64 {
    let f = |p: f64| r * p + c * p.powf(big_n - 1.0) - w2 * p.powf(-big_n - 1.0);
    let (mut lo, mut hi) = (1e-6f64, 1e6f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn constant_data_gives_constant_root() {
    let g = round(64);
    let r = g.scalar_curvature()[0];
    assert!((r - 2.0 / 0.64).abs() < 1e-12);
    for (tau, w, t) in [(0.6, 0.9, 1.0), (2.0, 0.1, 0.5), (0.0, 3.0, 1.0)] {
        let prob = LichProblem::new(g.clone(), ScalarField::constant(64, tau), &ScalarField::constant(64, w), t).unwrap();
        let sol = solve(&prob, None).unwrap();
        let want = scalar_root(r, g.alpha() * t * tau * tau, w * w, g.n_exp());
        assert!(sol.phi.values.iter().all(|p| (p - want).abs() < 1e-10 * want), "{} vs {want}", sol.phi[0]);
    }
}

/// Residual through the flux-form Laplacian rather than the assembled stiffness.
fn independent_residual(prob: &LichProblem, phi: &ScalarField) -> f64 {
    let g = prob.geom();
    let lap = laplacian_apply(g, phi).unwrap();
    let big_n = g.n_exp();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..phi.len() {
        let p = phi[j];
        let terms = [
            g.c_n() * lap[j],
            g.scalar_curvature()[j] * p,
            g.alpha() * prob.t() * prob.tau()[j].powi(2) * p.powf(big_n - 1.0),
            -prob.w_sq()[j] * p.powf(-big_n - 1.0),
        ];
        worst = worst.max(terms.iter().sum::<f64>().abs());
        scale = scale.max(terms.iter().map(|t| t.abs()).sum());
    }
    worst / scale
}

fn bundled_problem(n: usize, w_amp: f64, t: f64) -> LichProblem {
    let g = Arc::new(bundled_geometry(n, Order::Four).unwrap());
    let grid = g.grid().clone();
    let tau = field(&grid, |x| 0.5 + 0.3 * x.cos());
    let w = field(&grid, |x| 1.0 + w_amp * (2.0 * x).sin());
    LichProblem::new(g, tau, &w, t).unwrap()
}

#[test]
fn newton_and_monotone_agree_inside_bracket() {
    let prob = bundled_problem(128, 0.5, 1.0);
    let br = bracket(&prob).unwrap();
    let sol = solve(&prob, None).unwrap();
    assert!(sol.residual_norm <= 1e-10);
    assert!(independent_residual(&prob, &sol.phi) <= 1e-10);
    assert!(sol.phi.min() >= br.lower && sol.phi.max() <= br.upper);
    let mono = monotone_iterate(&prob, &br).unwrap();
    let d = mono.phi.zip_map(&sol.phi, |a, b| a - b).sup() / sol.phi.sup();
    assert!(d < 1e-8, "{d:.3e}");
}

#[test]
fn initial_guess_does_not_matter() {
    let prob = bundled_problem(96, 0.3, 0.7);
    let base = solve(&prob, None).unwrap().phi;
    let grid = prob.geom().grid().clone();
    for init in [field(&grid, |x| 0.05 + 0.01 * x.sin()), field(&grid, |x| 40.0 * (1.0 + 0.5 * x.cos())), ScalarField::constant(96, 3.0)] {
        let phi = solve(&prob, Some(&init)).unwrap().phi;
        assert!(phi.zip_map(&base, |a, b| a - b).sup() <= 1e-9 * base.sup());
    }
}

#[test]
fn batch_is_identical_sequential_and_parallel() {
    let probs: Vec<LichProblem> = (0..8).map(|i| bundled_problem(64, 0.1 * i as f64, 0.2 + 0.1 * i as f64)).collect();
    let seq = solve_many(&probs, SolveOptions::default(), Execution::Sequential);
    let par = solve_many(&probs, SolveOptions::default(), Execution::Parallel);
    for (a, b) in seq.iter().zip(&par) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        assert_eq!(a.phi.values, b.phi.values);
        assert_eq!(a.iterations, b.iterations);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Larger w² or smaller t gives a pointwise larger solution.
    #[test]
    fn solution_is_monotone_in_data(amp in 0.0f64..0.8, bump in 0.01f64..1.0, t in 0.1f64..0.9) {
        let lo = bundled_problem(64, amp, t);
        let grid = lo.geom().grid().clone();
        let extra = field(&grid, |x| bump * (1.0 + x.cos()).powi(2));
        let hi = lo.with_w_sq(lo.w_sq().zip_map(&extra, |a, b| a + b)).unwrap();
        let p_lo = solve(&lo, None).unwrap().phi;
        let p_hi = solve(&hi, None).unwrap().phi;
        prop_assert!(p_hi.zip_map(&p_lo, |a, b| a - b).min() > 0.0);
        let p_t = solve(&bundled_problem(64, amp, (t + 0.1).min(1.0)), None).unwrap().phi;
        prop_assert!(p_lo.zip_map(&p_t, |a, b| a - b).min() >= -1e-12);
    }
}
