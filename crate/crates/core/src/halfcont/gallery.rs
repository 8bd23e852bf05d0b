//! Named examples for the dichotomy search and the witness check.

use super::{ParamMap, TAssociation};
use crate::error::{Error, Result};
use std::sync::Arc;

/// T(t, x) = x² + 1 with F = |x| − 2: no fixed point, critical tuple (0.4, 2).
pub fn quadratic() -> TAssociation {
    let map = ParamMap::new(1, |_, x| vec![x[0] * x[0] + 1.0]).with_jacobian(|_, x| vec![0.0, 2.0 * x[0]]);
    TAssociation::new(map, 4.0).constraint(|_, x| x[0].abs() - 2.0)
}

/// T(t, x) = (x + 1)/2 with F = |x| − 2: fixed point x* = 1.
pub fn linear() -> TAssociation {
    let map = ParamMap::new(1, |_, x| vec![0.5 * (x[0] + 1.0)]).with_jacobian(|_, _| vec![0.0, 0.5]);
    TAssociation::new(map, 4.0).constraint(|_, x| x[0].abs() - 2.0)
}

/// T(t, x) = x + e₁ on ℝ^d with F = ‖x‖ − a. T(1, ·) is a translation, so
/// the search must end at t = a/(1 + a), x = a e₁.
pub fn schaefer(a: f64, d: usize) -> Result<TAssociation> {
    if !(a > 0.0) || d == 0 {
        return Err(Error::InvalidState(format!("Schaefer family needs a > 0 and d ≥ 1 (got {a}, {d})")));
    }
    let map = ParamMap::new(d, |_, x| {
        let mut y = x.to_vec();
        y[0] += 1.0;
        y
    })
    .with_jacobian(move |_, _| {
        let mut j = vec![0.0; d * (d + 1)];
        for r in 0..d {
            j[r * (d + 1) + r + 1] = 1.0;
        }
        j
    });
    Ok(TAssociation::new(map, 2.0 * a).constraint(move |_, x| x.iter().map(|v| v * v).sum::<f64>().sqrt() - a))
}

/// f = 3 on [0, 1), 2 elsewhere: half-continuous, not continuous.
pub fn step_map(y: &[f64]) -> Vec<f64> {
    vec![if (0.0..1.0).contains(&y[0]) { 3.0 } else { 2.0 }]
}

pub enum GalleryEntry {
    Association(TAssociation),
    Witness { f: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>, x: Vec<f64> },
}

pub fn gallery_names() -> &'static [&'static str] {
    &["quadratic", "linear", "step-function", "schaefer"]
}

/// `a` and `d` only apply to the Schaefer family.
pub fn gallery(name: &str, a: f64, d: usize) -> Result<GalleryEntry> {
    Ok(match name {
        "quadratic" => GalleryEntry::Association(quadratic()),
        "linear" => GalleryEntry::Association(linear()),
        "schaefer" => GalleryEntry::Association(schaefer(a, d)?),
        "step-function" => GalleryEntry::Witness { f: Arc::new(step_map), x: vec![1.0] },
        other => {
            return Err(Error::InvalidState(format!(
                "unknown example {other:?} (expected one of {})",
                gallery_names().join(", ")
            )))
        }
    })
}
