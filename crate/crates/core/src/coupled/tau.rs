//! Condition |L(dτ/τ)| ≤ c|dτ/τ|² and plateau-transition mean curvatures.

use crate::error::{Error, Result};
use crate::field::{sup_abs, ScalarField};
use crate::geometry::{l_frame, multiplicities, ReducedGeometry};
use crate::grid::Grid;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// +∞ when violated.
    pub c_measured: f64,
    pub violated: bool,
    /// τ constant to round-off: no admissible points, c = 0.
    pub cmc: bool,
    /// (c/2)√(n/(n−1)).
    pub a_min: f64,
    /// Fraction of grid points with |ω| ≤ ε_c.
    pub excluded_fraction: f64,
    /// Absolute cutoff ε_c.
    pub cutoff: f64,
    /// sup of |L ω♯| over excluded points relative to its global sup.
    pub excluded_l_ratio: f64,
    pub n: usize,
    pub x_max: f64,
}

pub const VIOLATION_RATIO: f64 = 0.5;

pub fn admissibility_threshold(c: f64, n: usize) -> f64 {
    let n = n as f64;
    0.5 * c * (n / (n - 1.0)).sqrt()
}

/// Measures c for ω = dτ/τ, applying L to the metric dual ω♯ = (ω_x/A²)∂_x.
///
/// `cutoff_rel` is ε_c as a fraction of ‖ω‖_∞. Points below the cutoff only
/// enter through the violation test: τ is VIOLATED when the sup of |L ω♯| over
/// them exceeds [`VIOLATION_RATIO`] times its global sup, i.e. L ω♯ does not
/// shrink where ω does. The test is invariant under ω → λω.
pub fn compute_c(geom: &ReducedGeometry, tau: &ScalarField, cutoff_rel: f64) -> Result<AdmissibilityReport> {
    geom.grid().check_len(tau.len())?;
    if !(tau.min() > 0.0) {
        return Err(Error::InvalidState("τ must be strictly positive".into()));
    }
    let n = geom.len();
    let a = &geom.profile_a().values;
    let ln_tau: Vec<f64> = tau.values.iter().map(|t| t.ln()).collect();
    let u = geom.grid().diff(&ln_tau);
    let om: Vec<f64> = u.iter().zip(a).map(|(u, a)| u.abs() / a).collect();
    let om_max = sup_abs(&om);
    if om_max <= 1e-13 * (1.0 + sup_abs(&ln_tau)) {
        return Ok(AdmissibilityReport {
            c_measured: 0.0,
            violated: false,
            cmc: true,
            a_min: 0.0,
            excluded_fraction: 1.0,
            cutoff: 0.0,
            excluded_l_ratio: 0.0,
            n: geom.dim(),
            x_max: 0.0,
        });
    }
    let sharp: Vec<f64> = u.iter().zip(a).map(|(u, a)| u / (a * a)).collect();
    let lam = l_frame(geom, &sharp);
    let mult = multiplicities(geom);
    let lnorm: Vec<f64> = (0..n).map(|i| (0..mult.len()).map(|k| mult[k] * lam[k][i].powi(2)).sum::<f64>().sqrt()).collect();
    let eps = cutoff_rel * om_max;
    let mut c = 0.0f64;
    let mut x_max = 0.0;
    let mut excluded = 0usize;
    let mut excl_l = 0.0f64;
    for i in 0..n {
        if om[i] > eps {
            let r = lnorm[i] / (om[i] * om[i]);
            if r > c {
                c = r;
                x_max = geom.grid().x(i);
            }
        } else {
            excluded += 1;
            excl_l = excl_l.max(lnorm[i]);
        }
    }
    let l_max = sup_abs(&lnorm);
    let excluded_l_ratio = if l_max > 0.0 { excl_l / l_max } else { 0.0 };
    let violated = excluded_l_ratio > VIOLATION_RATIO;
    let c_measured = if violated { f64::INFINITY } else { c };
    Ok(AdmissibilityReport {
        c_measured,
        violated,
        cmc: false,
        a_min: admissibility_threshold(c_measured, geom.dim()),
        excluded_fraction: excluded as f64 / n as f64,
        cutoff: eps,
        excluded_l_ratio,
        n: geom.dim(),
        x_max,
    })
}

/// Plateaus at τ_min and τ_max joined by transitions centred at `centres`
/// (alternately rising and falling) of the given support half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct TauLayout {
    pub tau_min: f64,
    pub tau_max: f64,
    pub centres: Vec<f64>,
    pub half_widths: Vec<f64>,
}

// Reference log-slope hump on its own length scale: u = χ/(v + κ(√(s²+w²) − w)).
// |u'|/u² ≤ κ wherever χ = 1, and χ only cuts in once u has dropped below
// DELTA of its peak.
const VMIN: f64 = 0.075;
const KAPPA: f64 = 0.7;
const WIDTH: f64 = 0.15;
const DELTA: f64 = 0.1;
const MARGIN: f64 = 0.04;
const WINDOW: f64 = 0.35;

fn hump_cut() -> f64 {
    let vcut = VMIN / DELTA;
    (((vcut - VMIN) / KAPPA + WIDTH).powi(2) - WIDTH * WIDTH).sqrt()
}

/// Support half-width of the reference hump.
fn hump_support() -> f64 {
    hump_cut() + MARGIN + WINDOW
}

fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let (a, b) = (f(z), f(1.0 - z));
    a / (a + b)
}

fn hump(s: f64) -> f64 {
    let edge = hump_cut() + MARGIN;
    let chi = 1.0 - smoothstep((s.abs() - edge) / WINDOW);
    if chi == 0.0 {
        return 0.0;
    }
    chi / (VMIN + KAPPA * ((s * s + WIDTH * WIDTH).sqrt() - WIDTH))
}

pub fn design_admissible_tau(grid: &Grid, layout: &TauLayout) -> Result<ScalarField> {
    let TauLayout { tau_min, tau_max, centres, half_widths } = layout;
    if !(*tau_min > 0.0 && tau_min <= tau_max) || !tau_max.is_finite() {
        return Err(Error::InvalidLayout(format!("need 0 < τ_min ≤ τ_max (got {tau_min}, {tau_max})")));
    }
    let n = grid.len();
    if centres.is_empty() || tau_min == tau_max {
        return Ok(ScalarField::constant(n, *tau_max));
    }
    if centres.len() % 2 != 0 {
        return Err(Error::InvalidLayout("transitions must come in rising/falling pairs".into()));
    }
    let widths: Vec<f64> = match half_widths.len() {
        1 => vec![half_widths[0]; centres.len()],
        l if l == centres.len() => half_widths.clone(),
        l => return Err(Error::InvalidLayout(format!("{l} half-widths for {} transitions", centres.len()))),
    };
    let period = grid.period();
    let h = grid.spacing();
    if centres.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidLayout("transition centres must be strictly increasing".into()));
    }
    for (k, w) in widths.iter().enumerate() {
        if !(*w >= 8.0 * h) {
            return Err(Error::InvalidLayout(format!("transition {k} half-width {w} below 8 grid spacings")));
        }
    }
    for k in 0..centres.len() {
        let next = (k + 1) % centres.len();
        let mut gap = centres[next] - centres[k];
        if next == 0 {
            gap += period;
        }
        if gap < widths[k] + widths[next] {
            return Err(Error::InvalidLayout(format!("transitions {k} and {next} overlap")));
        }
    }
    let rise = (tau_max / tau_min).ln();
    let sref = hump_support();
    let mut u = vec![0.0; n];
    for (k, (&c, &w)) in centres.iter().zip(&widths).enumerate() {
        let prof: Vec<f64> = (0..n)
            .map(|i| {
                let s = (grid.x(i) - c + 0.5 * period).rem_euclid(period) - 0.5 * period;
                hump(s * sref / w)
            })
            .collect();
        let total: f64 = prof.iter().sum::<f64>() * h;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (ui, p) in u.iter_mut().zip(&prof) {
            *ui += sign * rise * p / total;
        }
    }
    let ell = integrate_periodic(&u, period);
    let top = ell.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalarField::from(ell.iter().map(|l| tau_max * (l - top).exp()).collect::<Vec<f64>>()))
}

/// Spectral antiderivative of a mean-zero periodic sample.
fn integrate_periodic(u: &[f64], period: f64) -> Vec<f64> {
    let n = u.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = u.iter().map(|x| Complex::new(*x, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            *b = Complex::new(0.0, 0.0);
        } else {
            let wave = 2.0 * PI * m / period;
            *b /= Complex::new(0.0, wave);
        }
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Order;

    #[test]
    fn hump_support_is_reference() {
        assert!((hump_support() - 1.494143402398993).abs() < 1e-12);
        assert_eq!(hump(1.5), 0.0);
        assert!(hump(0.0) > hump(0.5));
    }

    #[test]
    fn plateau_values() {
        let g = Grid::periodic(512, Order::Four).unwrap();
        let lay = TauLayout { tau_min: 0.1, tau_max: 0.9, centres: vec![PI / 2.0, 1.5 * PI], half_widths: vec![1.4] };
        let tau = design_admissible_tau(&g, &lay).unwrap();
        assert!((tau.max() - 0.9).abs() < 1e-12);
        assert!((tau.min() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn exp_cos_violated_designed_finite() {
        let seed = crate::fixtures::bundled_seed(512, Order::Four).unwrap();
        let g = &seed.geom;
        let bad = ScalarField::from(g.grid().sample(|x| (0.5 * x.cos()).exp()));
        assert!(compute_c(g, &bad, 0.1).unwrap().violated);
        let r = compute_c(g, &seed.tau, 0.1).unwrap();
        assert!(!r.violated && r.c_measured.is_finite());
        let scaled = ScalarField::from(seed.tau.values.iter().map(|t| t.powi(3)).collect::<Vec<f64>>());
        let r3 = compute_c(g, &scaled, 0.1).unwrap();
        assert!(!r3.violated);
        assert!((r3.c_measured * 3.0 - r.c_measured).abs() < 1e-9 * r.c_measured);
    }

    #[test]
    fn layout_errors() {
        let g = Grid::periodic(64, Order::Four).unwrap();
        let odd = TauLayout { tau_min: 0.1, tau_max: 0.9, centres: vec![1.0], half_widths: vec![0.5] };
        assert!(matches!(design_admissible_tau(&g, &odd), Err(Error::InvalidLayout(_))));
        let overlap = TauLayout { tau_min: 0.1, tau_max: 0.9, centres: vec![1.0, 2.0], half_widths: vec![0.8] };
        assert!(matches!(design_admissible_tau(&g, &overlap), Err(Error::InvalidLayout(_))));
        let narrow = TauLayout { tau_min: 0.1, tau_max: 0.9, centres: vec![1.0, 4.0], half_widths: vec![0.2] };
        assert!(matches!(design_admissible_tau(&g, &narrow), Err(Error::InvalidLayout(_))));
    }
}
