use super::Fibre;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Scalar curvature from profiles via finite-difference Christoffel symbols.
pub fn scalar_curvature(grid: &Grid, a: &ScalarField, fibres: &[Fibre]) -> Result<ScalarField> {
    Ok(ScalarField::from(scalar_curvature_from(grid, &a.values, fibres)?))
}

/// Nonzero symbols of g_0 dx² + Σ g_j h_j (x-dependence only):
/// Γ⁰₀₀ = g₀'/2g₀, Γ⁰_jj = −g_j'/2g₀, Γʲ₀ⱼ = g_j'/2g_j.
pub fn scalar_curvature_from(grid: &Grid, a: &[f64], fibres: &[Fibre]) -> Result<Vec<f64>> {
    grid.check_len(a.len())?;
    if a.iter().any(|v| !(*v > 0.0)) || fibres.iter().any(|f| f.warp.values.iter().any(|v| !(*v > 0.0))) {
        return Err(Error::InvalidMetric("profiles must be strictly positive".into()));
    }
    let g0: Vec<f64> = a.iter().map(|v| v * v).collect();
    let dg0 = grid.diff(&g0);
    let gam000: Vec<f64> = dg0.iter().zip(&g0).map(|(d, g)| 0.5 * d / g).collect();
    let mut gam_jj0 = Vec::with_capacity(fibres.len());
    let mut gam_j0j = Vec::with_capacity(fibres.len());
    let mut gj_all = Vec::with_capacity(fibres.len());
    for f in fibres {
        let gj: Vec<f64> = f.warp.values.iter().map(|b| b * b).collect();
        let dgj = grid.diff(&gj);
        gam_jj0.push(dgj.iter().zip(&g0).map(|(d, g)| -0.5 * d / g).collect::<Vec<f64>>());
        gam_j0j.push(dgj.iter().zip(&gj).map(|(d, g)| 0.5 * d / g).collect::<Vec<f64>>());
        gj_all.push(gj);
    }
    let trace0: Vec<f64> = (0..grid.len())
        .map(|i| gam000[i] + fibres.iter().zip(&gam_j0j).map(|(f, c)| f.dim as f64 * c[i]).sum::<f64>())
        .collect();
    let d_j0j: Vec<Vec<f64>> = gam_j0j.iter().map(|c| grid.diff(c)).collect();
    let d_jj0: Vec<Vec<f64>> = gam_jj0.iter().map(|c| grid.diff(c)).collect();
    let mut r = vec![0.0; grid.len()];
    for (i, ri) in r.iter_mut().enumerate() {
        let mut r00 = 0.0;
        let mut rest = 0.0;
        for (k, f) in fibres.iter().enumerate() {
            let d = f.dim as f64;
            let c = gam_j0j[k][i];
            r00 += d * (-d_j0j[k][i] + c * gam000[i] - c * c);
            let b = gam_jj0[k][i];
            let rjj = d_jj0[k][i] + trace0[i] * b - 2.0 * b * c + (d - 1.0) * f.curvature;
            rest += d * rjj / gj_all[k][i];
        }
        *ri = r00 / g0[i] + rest;
    }
    Ok(r)
}
