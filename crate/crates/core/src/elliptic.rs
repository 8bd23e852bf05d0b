//! Linear periodic solves, the conformal Laplacian ground state, and
//! conformal changes of the data.

use crate::error::{Error, Result};
use crate::field::{ReducedVector, ScalarField};
use crate::geometry::{ReducedGeometry, ReducedTT};
use crate::linalg::{CyclicBanded, CyclicLu};

/// Operator x ↦ (S x)_j / weight_j with S cyclic banded.
///
/// For the operators built here S is symmetric, i.e. the operator is
/// self-adjoint for the weighted inner product Σ weight_j x_j y_j.
#[derive(Debug, Clone)]
pub struct LinearOperator1D {
    stiffness: CyclicBanded,
    weights: Vec<f64>,
    symmetric: bool,
}

impl LinearOperator1D {
    pub fn new(stiffness: CyclicBanded, weights: Vec<f64>, symmetric: bool) -> Result<LinearOperator1D> {
        if weights.len() != stiffness.dim() {
            return Err(Error::ShapeMismatch { expected: stiffness.dim(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidState("operator weights must be positive".into()));
        }
        if symmetric && stiffness.asymmetry() > 1e-12 * stiffness.max_abs().max(1.0) {
            return Err(Error::InvalidState(format!("asymmetry {:.3e} with symmetry flag set", stiffness.asymmetry())));
        }
        Ok(LinearOperator1D { stiffness, weights, symmetric })
    }

    /// c_nΔ + V.
    pub fn conformal_laplacian(geom: &ReducedGeometry, potential: &[f64]) -> Result<LinearOperator1D> {
        geom.grid().check_len(potential.len())?;
        let mut s = geom.laplacian_stiffness().clone();
        let c = geom.c_n();
        let mut m = CyclicBanded::zeros(s.dim(), s.lower(), s.upper());
        for i in 0..s.dim() {
            for (j, v) in s.row(i) {
                m.add(i, j, c * v);
            }
        }
        s = m;
        let vol = &geom.vol().values;
        s.add_diagonal(&potential.iter().zip(vol).map(|(p, v)| p * v).collect::<Vec<f64>>());
        LinearOperator1D::new(s, vol.clone(), true)
    }

    /// ½L*L acting on W, returning the x-covector component.
    pub fn half_vector_laplacian(geom: &ReducedGeometry) -> Result<LinearOperator1D> {
        LinearOperator1D::new(geom.vector_stiffness().clone(), geom.vol().values.clone(), true)
    }

    pub fn stiffness(&self) -> &CyclicBanded {
        &self.stiffness
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.stiffness.bandwidth()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.matvec(x).iter().zip(&self.weights).map(|(s, w)| s / w).collect()
    }

    pub fn factor(&self) -> Result<FactoredOperator<'_>> {
        Ok(FactoredOperator { op: self, lu: self.stiffness.factor()? })
    }
}

/// A factorization reusable across right-hand sides.
pub struct FactoredOperator<'a> {
    op: &'a LinearOperator1D,
    lu: CyclicLu,
}

impl FactoredOperator<'_> {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b: Vec<f64> = rhs.iter().zip(&self.op.weights).map(|(r, w)| r * w).collect();
        self.lu.solve_refined(&self.op.stiffness, &b)
    }
}

/// Grid-valued data accepted by `solve_linear`.
pub trait GridValues: Sized {
    fn values(&self) -> &[f64];
    fn from_values(v: Vec<f64>) -> Self;
}

impl GridValues for ScalarField {
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn from_values(v: Vec<f64>) -> Self {
        ScalarField::from(v)
    }
}

impl GridValues for ReducedVector {
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn from_values(v: Vec<f64>) -> Self {
        ReducedVector::from(v)
    }
}

impl GridValues for Vec<f64> {
    fn values(&self) -> &[f64] {
        self
    }
    fn from_values(v: Vec<f64>) -> Self {
        v
    }
}

/// Direct cyclic banded solve of op·x = rhs.
pub fn solve_linear<T: GridValues>(op: &LinearOperator1D, rhs: &T) -> Result<T> {
    let r = rhs.values();
    if r.len() != op.dim() {
        return Err(Error::ShapeMismatch { expected: op.dim(), got: r.len() });
    }
    Ok(T::from_values(op.factor()?.solve(r)))
}

/// Ground state of c_nΔ + R over reduced fields.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda1: f64,
    /// Positive, ‖u‖_∞ = 1.
    pub u: ScalarField,
    pub rayleigh: f64,
    /// ‖(c_nΔ+R)u − λ₁u‖_∞.
    pub residual: f64,
    pub iterations: usize,
}

fn rayleigh(a: &CyclicBanded, vol: &[f64], u: &[f64]) -> f64 {
    let au = a.matvec(u);
    let num: f64 = au.iter().zip(u).map(|(x, y)| x * y).sum();
    let den: f64 = u.iter().zip(vol).map(|(x, v)| x * x * v).sum();
    num / den
}

/// Shifted inverse iteration for the smallest eigenvalue of c_nΔ + R.
pub fn conformal_laplacian_eigen(geom: &ReducedGeometry) -> Result<Eigenpair> {
    let r = &geom.scalar_curvature().values;
    let op = LinearOperator1D::conformal_laplacian(geom, r)?;
    let a = op.stiffness().clone();
    let vol = &geom.vol().values;
    let n = geom.len();
    let rmin = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut shift = rmin - 1.0;
    let shifted = |s: f64| {
        let mut m = a.clone();
        m.add_diagonal(&vol.iter().map(|v| -s * v).collect::<Vec<f64>>());
        m
    };
    let mut mat = shifted(shift);
    let mut lu = mat.factor()?;
    let mut u = vec![1.0; n];
    let mut rho = rayleigh(&a, vol, &u);
    // Round-off floor of the residual: a few ulps of the largest row sum.
    let row_sum = (0..n).map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>() / vol[i]).fold(0.0f64, f64::max);
    let floor = 4.0 * f64::EPSILON * row_sum;
    let mut refined = false;
    for it in 1..=500 {
        let b: Vec<f64> = u.iter().zip(vol).map(|(x, v)| x * v).collect();
        let mut next = lu.solve_refined(&mat, &b);
        let s: f64 = next.iter().sum();
        let big = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(big > 0.0) || !big.is_finite() {
            return Err(Error::EigenFailure("inverse iteration produced a degenerate iterate".into()));
        }
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        for x in next.iter_mut() {
            *x = (*x * sign / big).abs();
        }
        u = next;
        let new_rho = rayleigh(&a, vol, &u);
        let change = (new_rho - rho).abs();
        rho = new_rho;
        let au = op.apply(&u);
        let resid = au.iter().zip(&u).fold(0.0f64, |m, (x, y)| m.max((x - rho * y).abs()));
        let scale = rho.abs().max(1.0);
        let stalled = refined && change <= 1e-14 * scale && resid <= 1e-9;
        if resid <= (1e-11 * scale).max(floor) || stalled {
            return Ok(Eigenpair { lambda1: rho, u: ScalarField::from(u), rayleigh: rho, residual: resid, iterations: it });
        }
        if !refined && change <= 1e-6 * scale {
            // Move the shift next to λ₁; the gap to λ₂ keeps it selected.
            shift = rho - 1e-3 * scale;
            mat = shifted(shift);
            lu = match mat.factor() {
                Ok(lu) => lu,
                Err(_) => {
                    return Ok(Eigenpair { lambda1: rho, u: ScalarField::from(u), rayleigh: rho, residual: resid, iterations: it })
                }
            };
            refined = true;
        }
    }
    Err(Error::EigenFailure(format!("no convergence in 500 iterations (shift {shift:.3e})")))
}

/// Strictly positive conformal factor θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalTransform {
    theta: ScalarField,
}

impl ConformalTransform {
    pub fn new(theta: ScalarField) -> Result<ConformalTransform> {
        if theta.is_empty() || !(theta.min() > 0.0) {
            return Err(Error::InvalidTransform(format!("θ must be positive (min {:.3e})", theta.min())));
        }
        Ok(ConformalTransform { theta })
    }

    pub fn theta(&self) -> &ScalarField {
        &self.theta
    }

    pub fn inverse(&self) -> ConformalTransform {
        ConformalTransform { theta: self.theta.map(|t| 1.0 / t) }
    }
}

#[derive(Debug, Clone)]
pub struct Positivized {
    pub geom_hat: ReducedGeometry,
    pub theta: ConformalTransform,
    pub lambda1: f64,
}

/// ĝ = u^{N−2}g with R_ĝ = λ₁u^{2−N}.
pub fn positivize(geom: &ReducedGeometry) -> Result<Positivized> {
    let eig = conformal_laplacian_eigen(geom)?;
    if eig.lambda1 <= 1e-10 {
        return Err(Error::NotYamabePositive { lambda1: eig.lambda1 });
    }
    let geom_hat = geom.conformal(&eig.u)?;
    Ok(Positivized { geom_hat, theta: ConformalTransform::new(eig.u)?, lambda1: eig.lambda1 })
}

/// Lichnerowicz-type data carried through a conformal change.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalData {
    pub w: ScalarField,
    pub tau: ScalarField,
    pub sigma: Option<ReducedTT>,
}

/// ŵ = θ^{−N}w, τ̂ = τ, σ̂ = θ^{−2}σ for dimension n.
pub fn conformal_push(data: &ConformalData, theta: &ConformalTransform, n: usize) -> Result<ConformalData> {
    let th = &theta.theta().values;
    if data.w.len() != th.len() || data.tau.len() != th.len() {
        return Err(Error::ShapeMismatch { expected: th.len(), got: data.w.len().min(data.tau.len()) });
    }
    if n < 3 {
        return Err(Error::InvalidTransform(format!("dimension {n} < 3")));
    }
    let big_n = 2.0 * n as f64 / (n as f64 - 2.0);
    let w = ScalarField::from(data.w.values.iter().zip(th).map(|(w, t)| w * t.powf(-big_n)).collect::<Vec<f64>>());
    Ok(ConformalData { w, tau: data.tau.clone(), sigma: data.sigma.as_ref().map(|s| s.conformal(th)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Fibre;
    use crate::grid::{Grid, Order};

    #[test]
    fn flat_shifted_laplacian_solve() {
        let grid = Grid::periodic(128, Order::Four).unwrap();
        let g = ReducedGeometry::flat_torus(grid.clone(), 3).unwrap();
        let op = LinearOperator1D::conformal_laplacian(&g, &vec![1.0; 128]).unwrap();
        let rhs = ScalarField::from(grid.sample(f64::cos));
        let x = solve_linear(&op, &rhs).unwrap();
        for j in 0..128 {
            assert!((x[j] - grid.x(j).cos() / 9.0).abs() < 1e-8);
        }
        let z = solve_linear(&op, &ScalarField::zeros(128)).unwrap();
        assert_eq!(z.sup(), 0.0);
    }

    #[test]
    fn flat_vector_laplacian_is_singular() {
        let g = ReducedGeometry::flat_torus(Grid::periodic(64, Order::Four).unwrap(), 3).unwrap();
        let op = LinearOperator1D::half_vector_laplacian(&g).unwrap();
        match solve_linear(&op, &ReducedVector::zeros(64)) {
            Err(Error::SingularOperator { kernel, .. }) => {
                assert!(kernel.iter().all(|k| (k - 1.0).abs() < 1e-6));
            }
            other => panic!("expected SingularOperator, got {other:?}"),
        }
    }

    #[test]
    fn constant_curvature_ground_state() {
        let grid = Grid::periodic(32, Order::Four).unwrap();
        let g = ReducedGeometry::new(
            grid,
            ScalarField::constant(32, 1.0),
            vec![Fibre::sphere(2, ScalarField::constant(32, 2f64.sqrt()))],
        )
        .unwrap();
        let e = conformal_laplacian_eigen(&g).unwrap();
        assert!((e.lambda1 - 1.0).abs() < 1e-12);
        assert!(e.u.values.iter().all(|u| (u - 1.0).abs() < 1e-12));
    }

    #[test]
    fn flat_not_yamabe_positive() {
        let g = ReducedGeometry::flat_torus(Grid::periodic(32, Order::Two).unwrap(), 3).unwrap();
        let e = conformal_laplacian_eigen(&g).unwrap();
        assert!(e.lambda1.abs() < 1e-12);
        assert!(matches!(positivize(&g), Err(Error::NotYamabePositive { .. })));
    }

    #[test]
    fn push_scaling() {
        let th = ConformalTransform::new(ScalarField::constant(16, 2.0)).unwrap();
        let d = ConformalData { w: ScalarField::constant(16, 1.0), tau: ScalarField::constant(16, 0.5), sigma: None };
        let p = conformal_push(&d, &th, 3).unwrap();
        assert!(p.w.values.iter().all(|w| (w - 1.0 / 64.0).abs() < 1e-16));
        assert!(ConformalTransform::new(ScalarField::constant(16, 0.0)).is_err());
    }
}
