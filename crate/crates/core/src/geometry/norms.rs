use super::ReducedGeometry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub lp_norm: f64,
    pub integral: f64,
}

/// Vol-weighted midpoint quadrature of a pointwise scalar (or pointwise
/// magnitude of a tensor) on the periodic grid.
pub fn norms_and_integrals(geom: &ReducedGeometry, f: &[f64], p: f64) -> Result<Norms> {
    geom.grid().check_len(f.len())?;
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let h = geom.grid().spacing();
    let vol = &geom.vol().values;
    let mut integral = 0.0;
    let mut l2 = 0.0;
    let mut lp = 0.0;
    let mut sup = 0.0f64;
    for (v, w) in f.iter().zip(vol) {
        integral += v * w * h;
        l2 += v * v * w * h;
        lp += v.abs().powf(p) * w * h;
        sup = sup.max(v.abs());
    }
    Ok(Norms { sup_norm: sup, l2_norm: l2.sqrt(), lp_norm: lp.powf(1.0 / p), integral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Order};

    #[test]
    fn flat_integrals() {
        let grid = Grid::periodic(64, Order::Two).unwrap();
        let g = ReducedGeometry::flat_torus(grid.clone(), 3).unwrap();
        let one = vec![1.0; 64];
        let r = norms_and_integrals(&g, &one, 2.0).unwrap();
        assert!((r.integral - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        let s = grid.sample(f64::sin);
        let r = norms_and_integrals(&g, &s, 3.0).unwrap();
        assert!((r.l2_norm.powi(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((r.sup_norm - s.iter().fold(0.0f64, |m, v| m.max(v.abs()))).abs() == 0.0);
        assert!(matches!(norms_and_integrals(&g, &s, 0.5), Err(Error::InvalidExponent(_))));
    }
}
