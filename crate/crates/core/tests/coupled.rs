use conflab::coupled::{
    blowup_init, certify, compute_c, k_sweep, kernel_check, picard_solve, smallness_functional, vector_solve, SeedData,
};
use conflab::fixtures::{bundled_geometry, bundled_seed};
use conflab::geometry::{half_vector_laplacian, ReducedTT};
use conflab::lichnerowicz::{self, LichProblem};
use conflab::{Error, Grid, Order, ReducedGeometry, ReducedVector, ScalarField};
use std::sync::Arc;

fn cmc_seed(n: usize, k: f64) -> SeedData {
    let base = bundled_seed(n, Order::Four).unwrap();
    SeedData::new(base.geom.clone(), ScalarField::constant(n, 0.5), base.sigma.clone(), 2.0, 0.5, k).unwrap()
}

#[test]
fn cmc_decouples_into_a_single_lichnerowicz_equation() {
    let seed = cmc_seed(128, 0.3);
    let rep = picard_solve(&seed, &ScalarField::constant(128, 1.0)).unwrap();
    assert!(rep.w.sup() < 1e-12, "W = {:.3e}", rep.w.sup());
    let g = &seed.geom;
    let w_sq: Vec<f64> = seed.sigma.tensor().norm_sq(g).iter().map(|s| s + 0.09).collect();
    let tau = seed.mean_curvature();
    let prob = LichProblem::from_w_sq(g.clone(), tau, ScalarField::from(w_sq), 1.0).unwrap();
    let phi = lichnerowicz::solve(&prob, None).unwrap().phi;
    assert!(rep.phi.zip_map(&phi, |a, b| a - b).sup() <= 1e-9 * phi.sup());
    let cert = certify(&seed, &rep.phi, &rep.w).unwrap();
    assert!(cert.max() <= 1e-8, "{cert:?}");
}

#[test]
fn vector_equation_inverts_manufactured_field() {
    let g = Arc::new(bundled_geometry(128, Order::Four).unwrap());
    let grid = g.grid().clone();
    let exact = ReducedVector::from(grid.sample(|x| x.sin() + 0.2 * (3.0 * x).cos()));
    let rhs = half_vector_laplacian(&g, &exact).unwrap().map(|v| -v);
    let w = vector_solve(&g, &rhs).unwrap();
    assert!(w.zip_map(&exact, |a, b| a - b).sup() <= 1e-9);
}

#[test]
fn killing_kernel_detection() {
    let flat = ReducedGeometry::flat_torus(Grid::periodic(64, Order::Four).unwrap(), 3).unwrap();
    let k = kernel_check(&flat, 1e-8).unwrap();
    assert!(k.has_kernel());
    // The kernel of L on the flat torus is the constant field.
    let d = &k.direction;
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    assert!(d.iter().all(|v| (v - mean).abs() <= 1e-6 * mean.abs()));
    let flat = Arc::new(flat);
    let err = vector_solve(&flat, &ReducedVector::constant(64, 1.0)).unwrap_err();
    assert!(matches!(err, Error::ConformalKillingKernel { .. }), "{err}");
    assert!(!kernel_check(&bundled_geometry(64, Order::Four).unwrap(), 1e-8).unwrap().has_kernel());
}

#[test]
fn constant_tau_is_cmc_admissible() {
    let g = bundled_geometry(256, Order::Four).unwrap();
    let r = compute_c(&g, &ScalarField::constant(256, 0.7), 0.1).unwrap();
    assert!(r.cmc && !r.violated);
}

#[test]
fn smallness_functional_scaling() {
    let seed = bundled_seed(128, Order::Four).unwrap();
    let base = smallness_functional(&seed).unwrap();
    assert!(base > 0.0);
    let big_n = seed.geom.n_exp();
    // m = tτ^a is linear in t.
    let half = smallness_functional(&seed.with_t(0.5 * seed.t).unwrap()).unwrap();
    assert!((half / base - 0.5f64.powf(big_n + 2.0)).abs() <= 1e-12 * 0.5f64.powf(big_n + 2.0));
    let s = vec![3.0; 128];
    let scaled = ReducedTT::from_tensor(&seed.geom, seed.sigma.tensor().scaled(&s), 1e-6).unwrap();
    let tripled = smallness_functional(&SeedData { sigma: scaled, ..seed.clone() }).unwrap();
    assert!((tripled / base - 3.0f64.powf(big_n - 2.0)).abs() <= 1e-10 * 3.0f64.powf(big_n - 2.0));
}

#[test]
fn blowup_profile_at_zero_vector_field() {
    let seed = bundled_seed(64, Order::Four).unwrap();
    let k = 2.0;
    let phi = blowup_init(&seed, &ReducedVector::zeros(64), k).unwrap();
    let g = &seed.geom;
    let sig = seed.sigma.tensor().norm_sq(g);
    for j in 0..64 {
        let m = seed.t * seed.tau[j].powf(seed.a);
        let want = (g.alpha().sqrt() * (sig[j].sqrt() + k) / m).powf(1.0 / g.n_exp());
        assert!((phi[j] - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn cmc_sweep_is_monotone_without_fold() {
    let seed = cmc_seed(64, 0.0);
    let ks: Vec<f64> = (0..12).map(|j| 0.5 * j as f64).collect();
    let trace = k_sweep(&seed, &ks).unwrap();
    assert!(trace.fold.is_none());
    assert!(trace.failures.is_empty(), "{:?}", trace.failures);
    assert_eq!(trace.points.len(), ks.len());
    for p in trace.points.windows(2) {
        assert!(p[1].sup_phi > p[0].sup_phi);
    }
    for p in &trace.points {
        assert!(p.res_lich <= 1e-8 && p.res_vector <= 1e-8);
    }
}
