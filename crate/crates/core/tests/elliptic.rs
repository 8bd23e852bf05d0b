use conflab::elliptic::{conformal_laplacian_eigen, positivize, solve_linear, LinearOperator1D};
use conflab::fixtures::bundled_geometry;
use conflab::geometry::laplacian_apply;
use conflab::{Error, Fibre, Grid, Order, ReducedGeometry, ScalarField};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Circle warp strong enough to make R negative near x = 3π/2.
fn mixed_sign(n: usize) -> ReducedGeometry {
    let grid = Grid::periodic(n, Order::Four).unwrap();
    let len = grid.len();
    let fibres = vec![
        Fibre::circle(ScalarField::from(grid.sample(|x| (1.5 * x.sin()).exp()))),
        Fibre::sphere(2, ScalarField::constant(len, 1.0)),
    ];
    ReducedGeometry::new(grid, ScalarField::constant(len, 1.0), fibres).unwrap()
}

/// Smallest eigenvalue of the vol-weighted pencil from a dense symmetric solve.
fn dense_lambda1(g: &ReducedGeometry) -> f64 {
    let n = g.len();
    let op = LinearOperator1D::conformal_laplacian(g, &g.scalar_curvature().values).unwrap();
    let a = op.stiffness().to_dense();
    let vol = &g.vol().values;
    let m = DMatrix::from_fn(n, n, |i, j| a[i * n + j] / (vol[i] * vol[j]).sqrt());
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn ground_state_matches_dense_eigensolver() {
    for g in [bundled_geometry(64, Order::Four).unwrap(), mixed_sign(64)] {
        let eig = conformal_laplacian_eigen(&g).unwrap();
        let want = dense_lambda1(&g);
        assert!((eig.lambda1 - want).abs() <= 1e-9 * want.abs().max(1.0), "{} vs {want}", eig.lambda1);
        assert!(eig.u.min() > 0.0);
        assert!((eig.u.sup() - 1.0).abs() < 1e-14);
        assert!((eig.rayleigh - eig.lambda1).abs() <= 1e-9 * eig.lambda1.abs().max(1.0));
    }
}

/// sup |R̂ − λ₁u^{2−N}| / sup R̂ after positivizing.
fn positivize_defect(n: usize) -> f64 {
    let g = mixed_sign(n);
    assert!(g.scalar_curvature().min() < -1.0);
    let p = positivize(&g).unwrap();
    assert!(p.lambda1 > 0.0);
    assert!(p.geom_hat.curvature_positive());
    let u = p.theta.theta();
    let e = 2.0 - g.n_exp();
    let rh = p.geom_hat.scalar_curvature();
    (0..n).map(|j| (rh[j] - p.lambda1 * u[j].powf(e)).abs()).fold(0.0, f64::max) / rh.sup()
}

#[test]
fn positivize_mixed_sign_curvature() {
    let (d1, d2) = (positivize_defect(128), positivize_defect(256));
    assert!(d2 < 1e-5, "{d2:.3e}");
    assert!(d1 / d2 > 12.0, "{d1:.3e} {d2:.3e}");
}

#[test]
fn flat_torus_is_yamabe_null() {
    let g = ReducedGeometry::flat_torus(Grid::periodic(64, Order::Four).unwrap(), 3).unwrap();
    let eig = conformal_laplacian_eigen(&g).unwrap();
    assert!(eig.lambda1.abs() < 1e-10);
    assert!(matches!(positivize(&g), Err(Error::NotYamabePositive { .. })));
}

#[test]
fn banded_solve_matches_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for order in [Order::Two, Order::Four] {
        let grid = Grid::periodic(48, order).unwrap();
        let len = grid.len();
        let g = ReducedGeometry::new(
            grid.clone(),
            ScalarField::from(grid.sample(|x| 1.0 + 0.3 * x.cos())),
            vec![Fibre::sphere(2, ScalarField::from(grid.sample(|x| (0.2 * x.sin()).exp())))],
        )
        .unwrap();
        let pot: Vec<f64> = (0..len).map(|_| rng.gen_range(0.5..2.0)).collect();
        let rhs = ScalarField::from((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        let op = LinearOperator1D::conformal_laplacian(&g, &pot).unwrap();
        let x = solve_linear(&op, &rhs).unwrap();
        let a = op.stiffness().to_dense();
        let m = DMatrix::from_row_slice(len, len, &a);
        let b = DVector::from_iterator(len, rhs.values.iter().zip(&g.vol().values).map(|(r, v)| r * v));
        let want = m.lu().solve(&b).unwrap();
        let scale = want.amax();
        for j in 0..len {
            assert!((x[j] - want[j]).abs() <= 1e-11 * scale);
        }
        // And the operator really is c_nΔ + V.
        let lap = laplacian_apply(&g, &x).unwrap();
        for j in 0..len {
            let back = g.c_n() * lap[j] + pot[j] * x[j];
            assert!((back - rhs[j]).abs() <= 1e-10);
        }
    }
}
