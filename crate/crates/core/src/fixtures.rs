//! Bundled regression seed: n = 4, A ≡ 1, a circle fibre with warp
//! exp(0.3 sin x) and an S² fibre with warp 0.7·exp(0.1 cos x).

use crate::coupled::{design_admissible_tau, SeedData, TauLayout};
use crate::error::Result;
use crate::field::ScalarField;
use crate::geometry::{make_tt_tensor, Fibre, ReducedGeometry, TTSpec};
use crate::grid::{Grid, Order};
use std::f64::consts::PI;
use std::sync::Arc;

pub const TAU_MAX: f64 = 0.9;
/// ln(τ_max/τ_min).
pub const TAU_LOG_RATIO: f64 = 4.85;
pub const HALF_WIDTH: f64 = 1.494143402398993;
pub const EXPONENT: f64 = 2.0;
pub const SCALE_T: f64 = 0.5;
pub const SIGMA_S0: f64 = 1.0;
pub const SIGMA_OFF: f64 = 0.5;

pub fn bundled_geometry(num_points: usize, order: Order) -> Result<ReducedGeometry> {
    let grid = Grid::periodic(num_points, order)?;
    let b1 = ScalarField::from(grid.sample(|x| (0.3 * x.sin()).exp()));
    let b2 = ScalarField::from(grid.sample(|x| 0.7 * (0.1 * x.cos()).exp()));
    ReducedGeometry::new(grid, ScalarField::constant(num_points, 1.0), vec![Fibre::circle(b1), Fibre::sphere(2, b2)])
}

pub fn bundled_layout() -> TauLayout {
    TauLayout {
        tau_min: TAU_MAX * (-TAU_LOG_RATIO).exp(),
        tau_max: TAU_MAX,
        centres: vec![0.5 * PI, 1.5 * PI],
        half_widths: vec![HALF_WIDTH],
    }
}

pub fn bundled_tt_spec() -> TTSpec {
    TTSpec { s0: SIGMA_S0, free: vec![None], off: vec![SIGMA_OFF], balance: false }
}

pub fn bundled_seed(num_points: usize, order: Order) -> Result<SeedData> {
    let geom = Arc::new(bundled_geometry(num_points, order)?);
    let tau = design_admissible_tau(geom.grid(), &bundled_layout())?;
    let sigma = make_tt_tensor(&geom, &bundled_tt_spec())?;
    SeedData::new(geom, tau, sigma, EXPONENT, SCALE_T, 0.0)
}
