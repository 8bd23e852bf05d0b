//! Periodic cohomogeneity-one geometries g = A(x)²dx² + Σ_j B_j(x)² h_j, where
//! each h_j is a unit flat torus or round sphere of dimension d_j.

mod curvature;
mod norms;
mod ops;
pub mod profile;
mod tt;

pub use curvature::{scalar_curvature, scalar_curvature_from};
pub use norms::{norms_and_integrals, Norms};
pub(crate) use ops::{l_coefficients, l_frame, multiplicities};
pub use ops::{apply_l, half_vector_laplacian, laplacian_apply, staggered_l, FrameTensor, ReducedTensor, StaggeredL};
pub use tt::{make_tt_tensor, natural_divergence, tt_residual, ReducedTT, TTResidual, TTSpec};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::linalg::CyclicBanded;
use std::sync::OnceLock;

/// One group of warped fibre directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Fibre {
    /// Fibre dimension d_j ≥ 1.
    pub dim: usize,
    /// Sectional curvature of the unit fibre (0 torus, 1 sphere).
    pub curvature: f64,
    /// Warp B_j(x) > 0.
    pub warp: ScalarField,
}

impl Fibre {
    pub fn circle(warp: ScalarField) -> Fibre {
        Fibre { dim: 1, curvature: 0.0, warp }
    }

    pub fn torus(dim: usize, warp: ScalarField) -> Fibre {
        Fibre { dim, curvature: 0.0, warp }
    }

    pub fn sphere(dim: usize, warp: ScalarField) -> Fibre {
        Fibre { dim, curvature: 1.0, warp }
    }

    /// Flat one-dimensional fibres carry the off-diagonal x-row of tensors.
    pub fn is_circle(&self) -> bool {
        self.dim == 1 && self.curvature == 0.0
    }
}

/// Cached data shared by the discrete operators.
#[derive(Debug)]
pub(crate) struct Derived {
    /// Centered d/dx of ln A and ln B_j at grid points.
    pub dln_a: Vec<f64>,
    pub dln_b: Vec<Vec<f64>>,
    /// Staggered quantities at x_{j+1/2}.
    pub dln_a_half: Vec<f64>,
    pub dln_b_half: Vec<Vec<f64>>,
    pub vol_half: Vec<f64>,
    pub cond_half: Vec<f64>,
}

#[derive(Debug)]
pub struct ReducedGeometry {
    grid: Grid,
    a: ScalarField,
    fibres: Vec<Fibre>,
    n: usize,
    r: ScalarField,
    vol: ScalarField,
    derived: Derived,
    stiffness: OnceLock<CyclicBanded>,
    vector_stiffness: OnceLock<CyclicBanded>,
}

impl Clone for ReducedGeometry {
    fn clone(&self) -> Self {
        ReducedGeometry::new(self.grid.clone(), self.a.clone(), self.fibres.clone()).expect("validated geometry")
    }
}

fn check_profile(grid: &Grid, f: &ScalarField, what: &str) -> Result<()> {
    grid.check_len(f.len())?;
    if let Some((j, v)) = f.values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidMetric(format!("{what} not strictly positive at index {j} (value {v})")));
    }
    Ok(())
}

impl ReducedGeometry {
    pub fn new(grid: Grid, a: ScalarField, fibres: Vec<Fibre>) -> Result<ReducedGeometry> {
        check_profile(&grid, &a, "A")?;
        for (i, f) in fibres.iter().enumerate() {
            check_profile(&grid, &f.warp, &format!("B_{}", i + 1))?;
            if f.dim == 0 {
                return Err(Error::InvalidMetric("fibre of dimension 0".into()));
            }
            if f.dim == 1 && f.curvature != 0.0 {
                return Err(Error::InvalidMetric("a one-dimensional fibre has no curvature".into()));
            }
            if !f.curvature.is_finite() {
                return Err(Error::InvalidMetric("non-finite fibre curvature".into()));
            }
        }
        let n = 1 + fibres.iter().map(|f| f.dim).sum::<usize>();
        if n < 3 {
            return Err(Error::InvalidMetric(format!("dimension {n} < 3")));
        }
        let r = ScalarField::from(scalar_curvature_from(&grid, &a.values, &fibres)?);
        let vol: Vec<f64> = (0..grid.len())
            .map(|j| a[j] * fibres.iter().map(|f| f.warp[j].powi(f.dim as i32)).product::<f64>())
            .collect();
        let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<f64>>();
        let ln_a = ln(&a.values);
        let ln_b: Vec<Vec<f64>> = fibres.iter().map(|f| ln(&f.warp.values)).collect();
        let cond: Vec<f64> = vol.iter().zip(&a.values).map(|(v, a)| v / (a * a)).collect();
        let derived = Derived {
            dln_a: grid.diff(&ln_a),
            dln_b: ln_b.iter().map(|l| grid.diff(l)).collect(),
            dln_a_half: grid.diff_half(&ln_a),
            dln_b_half: ln_b.iter().map(|l| grid.diff_half(l)).collect(),
            vol_half: grid.interp_half_positive(&vol),
            cond_half: grid.interp_half_positive(&cond),
        };
        Ok(ReducedGeometry {
            grid,
            a,
            fibres,
            n,
            r,
            vol: ScalarField::from(vol),
            derived,
            stiffness: OnceLock::new(),
            vector_stiffness: OnceLock::new(),
        })
    }

    /// Diagonal metric on T^n: every B_i is a circle warp.
    pub fn torus(grid: Grid, a: ScalarField, b: Vec<ScalarField>) -> Result<ReducedGeometry> {
        ReducedGeometry::new(grid, a, b.into_iter().map(Fibre::circle).collect())
    }

    pub fn flat_torus(grid: Grid, n: usize) -> Result<ReducedGeometry> {
        let len = grid.len();
        let ones = ScalarField::constant(len, 1.0);
        ReducedGeometry::torus(grid, ones.clone(), vec![ones; n.saturating_sub(1)])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn profile_a(&self) -> &ScalarField {
        &self.a
    }

    pub fn fibres(&self) -> &[Fibre] {
        &self.fibres
    }

    pub fn scalar_curvature(&self) -> &ScalarField {
        &self.r
    }

    /// min R > 0 beyond round-off; a flat metric carries curvature of either sign near 1e-30.
    pub fn curvature_positive(&self) -> bool {
        let scale = self.r.min().abs().max(self.r.max().abs()).max(1.0);
        self.r.min() > 1e-10 * scale
    }

    pub fn vol(&self) -> &ScalarField {
        &self.vol
    }

    /// N = 2n/(n−2).
    pub fn n_exp(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 - 2.0)
    }

    /// c_n = 4(n−1)/(n−2).
    pub fn c_n(&self) -> f64 {
        4.0 * (self.n as f64 - 1.0) / (self.n as f64 - 2.0)
    }

    /// (n−1)/n.
    pub fn alpha(&self) -> f64 {
        (self.n as f64 - 1.0) / self.n as f64
    }

    pub(crate) fn derived(&self) -> &Derived {
        &self.derived
    }

    /// Symmetric stiffness K with Δf = K f / vol.
    pub fn laplacian_stiffness(&self) -> &CyclicBanded {
        self.stiffness.get_or_init(|| ops::assemble_laplacian(self))
    }

    /// Symmetric PSD matrix S with (½L*LW)_x = S W / vol.
    pub fn vector_stiffness(&self) -> &CyclicBanded {
        self.vector_stiffness.get_or_init(|| ops::assemble_vector_laplacian(self))
    }

    /// Conformally rescaled geometry θ^{N−2}g.
    pub fn conformal(&self, theta: &ScalarField) -> Result<ReducedGeometry> {
        self.grid.check_len(theta.len())?;
        if theta.min() <= 0.0 {
            return Err(Error::InvalidTransform("conformal factor must be positive".into()));
        }
        let e = 0.5 * (self.n_exp() - 2.0);
        let s = theta.map(|t| t.powf(e));
        let a = self.a.zip_map(&s, |x, y| x * y);
        let fibres = self
            .fibres
            .iter()
            .map(|f| Fibre { dim: f.dim, curvature: f.curvature, warp: f.warp.zip_map(&s, |x, y| x * y) })
            .collect();
        ReducedGeometry::new(self.grid.clone(), a, fibres)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Order;

    #[test]
    fn flat_constants() {
        let g = ReducedGeometry::flat_torus(Grid::periodic(32, Order::Four).unwrap(), 3).unwrap();
        assert_eq!(g.dim(), 3);
        assert!((g.n_exp() - 6.0).abs() < 1e-15);
        assert!((g.c_n() - 8.0).abs() < 1e-15);
        assert!(g.scalar_curvature().sup() <= 1e-12);
    }

    #[test]
    fn rejects_nonpositive_profiles() {
        let grid = Grid::periodic(16, Order::Two).unwrap();
        let mut a = vec![1.0; 16];
        a[3] = 0.0;
        let r = ReducedGeometry::torus(grid.clone(), a.into(), vec![ScalarField::constant(16, 1.0); 2]);
        assert!(matches!(r, Err(Error::InvalidMetric(_))));
        let r = ReducedGeometry::torus(grid, ScalarField::constant(16, 1.0), vec![ScalarField::constant(16, 1.0)]);
        assert!(matches!(r, Err(Error::InvalidMetric(_))));
    }

    #[test]
    fn sphere_product_curvature() {
        let grid = Grid::periodic(32, Order::Two).unwrap();
        let g = ReducedGeometry::new(
            grid,
            ScalarField::constant(32, 1.0),
            vec![Fibre::sphere(2, ScalarField::constant(32, 2f64.sqrt()))],
        )
        .unwrap();
        for r in &g.scalar_curvature().values {
            assert!((r - 1.0).abs() < 1e-14);
        }
    }
}
