//! c_nΔφ + Rφ + ((n−1)/n)tτ²φ^{N−1} = w²φ^{−N−1} on Yamabe-positive geometries.

use crate::elliptic::{conformal_push, positivize, ConformalData, ConformalTransform};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{sup_abs, ScalarField};
use crate::geometry::{laplacian_apply, ReducedGeometry};
use crate::linalg::CyclicBanded;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct LichProblem {
    geom: Arc<ReducedGeometry>,
    tau: ScalarField,
    w_sq: ScalarField,
    t: f64,
}

impl LichProblem {
    pub fn new(geom: Arc<ReducedGeometry>, tau: ScalarField, w: &ScalarField, t: f64) -> Result<LichProblem> {
        let w_sq = w.map(|v| v * v);
        LichProblem::from_w_sq(geom, tau, w_sq, t)
    }

    /// Problem given w² directly (the coupled system assembles w² = |σ+LW|²+k²).
    pub fn from_w_sq(geom: Arc<ReducedGeometry>, tau: ScalarField, w_sq: ScalarField, t: f64) -> Result<LichProblem> {
        geom.grid().check_len(tau.len())?;
        geom.grid().check_len(w_sq.len())?;
        if !geom.curvature_positive() {
            return Err(Error::InvalidState(format!(
                "min R = {:.3e} ≤ 0; positivize the geometry first",
                geom.scalar_curvature().min()
            )));
        }
        if w_sq.min() < 0.0 || !(w_sq.max() > 0.0) {
            return Err(Error::InvalidState("w must be real and not identically zero".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidState(format!("t = {t} outside [0, 1]")));
        }
        Ok(LichProblem { geom, tau, w_sq, t })
    }

    pub fn geom(&self) -> &Arc<ReducedGeometry> {
        &self.geom
    }

    pub fn tau(&self) -> &ScalarField {
        &self.tau
    }

    pub fn w_sq(&self) -> &ScalarField {
        &self.w_sq
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_w_sq(&self, w_sq: ScalarField) -> Result<LichProblem> {
        LichProblem::from_w_sq(self.geom.clone(), self.tau.clone(), w_sq, self.t)
    }

    /// ((n−1)/n)·t·τ² pointwise.
    fn tau_coef(&self) -> Vec<f64> {
        let a = self.geom.alpha() * self.t;
        self.tau.values.iter().map(|x| a * x * x).collect()
    }

    /// Zero-order part f(x, φ) = Rφ + cτφ^{N−1} − w²φ^{−N−1} and ∂f/∂φ.
    fn local(&self, i: usize, phi: f64, ctau: &[f64]) -> (f64, f64) {
        let big_n = self.geom.n_exp();
        let r = self.geom.scalar_curvature()[i];
        let w2 = self.w_sq[i];
        let p1 = phi.powf(big_n - 2.0);
        let q = phi.powf(-big_n - 2.0);
        let f = r * phi + ctau[i] * p1 * phi - w2 * q * phi;
        let df = r + (big_n - 1.0) * ctau[i] * p1 + (big_n + 1.0) * w2 * q;
        (f, df)
    }
}

fn check_positive(phi: &ScalarField) -> Result<()> {
    if !(phi.min() > 0.0) {
        return Err(Error::InvalidState(format!("φ must be positive (min {:.3e})", phi.min())));
    }
    Ok(())
}

/// Residual c_nΔφ + Rφ + ((n−1)/n)tτ²φ^{N−1} − w²φ^{−N−1}.
pub fn residual(prob: &LichProblem, phi: &ScalarField) -> Result<ScalarField> {
    Ok(residual_parts(prob, phi)?.0)
}

/// Residual and the pointwise sum of the magnitudes of its four terms.
pub fn residual_parts(prob: &LichProblem, phi: &ScalarField) -> Result<(ScalarField, Vec<f64>)> {
    prob.geom.grid().check_len(phi.len())?;
    check_positive(phi)?;
    let lap = laplacian_apply(&prob.geom, phi)?;
    let c = prob.geom.c_n();
    let big_n = prob.geom.n_exp();
    let ctau = prob.tau_coef();
    let r = &prob.geom.scalar_curvature().values;
    let mut res = Vec::with_capacity(phi.len());
    let mut mag = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        let p = phi[i];
        let terms = [c * lap[i], r[i] * p, ctau[i] * p.powf(big_n - 1.0), -prob.w_sq[i] * p.powf(-big_n - 1.0)];
        res.push(terms.iter().sum());
        mag.push(terms.iter().map(|t| t.abs()).sum());
    }
    Ok((ScalarField::from(res), mag))
}

/// ‖residual‖_∞ / ‖Σ|terms|‖_∞.
pub fn relative_residual(prob: &LichProblem, phi: &ScalarField) -> Result<f64> {
    let (r, m) = residual_parts(prob, phi)?;
    let s = sup_abs(&m);
    Ok(if s > 0.0 { r.sup() / s } else { 0.0 })
}

/// Constant sub- and supersolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

fn constant_sign_ok(prob: &LichProblem, phi: f64, ctau: &[f64], want_nonneg: bool) -> bool {
    (0..prob.w_sq.len()).all(|i| {
        let (f, _) = prob.local(i, phi, ctau);
        let r = prob.geom.scalar_curvature()[i] * phi;
        let tol = 1e-12 * (r.abs() + prob.w_sq[i] * phi.powf(-prob.geom.n_exp() - 1.0));
        if want_nonneg {
            f >= -tol
        } else {
            f <= tol
        }
    })
}

pub fn bracket(prob: &LichProblem) -> Result<Bracket> {
    let big_n = prob.geom.n_exp();
    let r = prob.geom.scalar_curvature();
    let ctau = prob.tau_coef();
    let upper = (prob.w_sq.max() / r.min()).powf(1.0 / (big_n + 2.0)).max(1.0);
    if !constant_sign_ok(prob, upper, &ctau, true) {
        return Err(Error::NoBracket(format!("supersolution check failed at φ₊ = {upper:.6e}")));
    }
    let wmin = prob.w_sq.min();
    if !(wmin > 0.0) {
        return Err(Error::NoBracket("w vanishes somewhere; no positive constant subsolution".into()));
    }
    let cmax = ctau.iter().cloned().fold(0.0, f64::max);
    let base = (wmin / (r.max() + cmax * upper.powf(big_n - 2.0))).powf(1.0 / (big_n + 2.0));
    let mut lower = base;
    if !constant_sign_ok(prob, lower, &ctau, false) {
        lower = 0.9 * base;
        let mut tries = 0;
        while !constant_sign_ok(prob, lower, &ctau, false) {
            lower *= 0.9;
            tries += 1;
            if tries > 400 {
                return Err(Error::NoBracket("subsolution shrink exhausted".into()));
            }
        }
    }
    Ok(Bracket { lower: lower.min(upper), upper })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Tolerance on the relative residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    Monotone,
}

#[derive(Debug, Clone)]
pub struct LichSolution {
    pub phi: ScalarField,
    pub iterations: usize,
    /// Relative sup-norm residual.
    pub residual_norm: f64,
    pub method: Method,
    pub bracket: Bracket,
}

/// Jacobian c_nK + diag(vol·∂f/∂φ) in stiffness form and −vol·F.
fn newton_system(prob: &LichProblem, phi: &[f64], ctau: &[f64]) -> (CyclicBanded, Vec<f64>, f64) {
    let g = &prob.geom;
    let k = g.laplacian_stiffness();
    let c = g.c_n();
    let vol = &g.vol().values;
    let kphi = k.matvec(phi);
    let mut jac = CyclicBanded::zeros(k.dim(), k.lower(), k.upper());
    let mut rhs = vec![0.0; phi.len()];
    let mut fmax = 0.0f64;
    for i in 0..phi.len() {
        for (j, v) in k.row(i) {
            jac.add(i, j, c * v);
        }
        let (f, df) = prob.local(i, phi[i], ctau);
        jac.add(i, i, vol[i] * df);
        let full = c * kphi[i] / vol[i] + f;
        rhs[i] = -vol[i] * full;
        fmax = fmax.max(full.abs());
    }
    (jac, rhs, fmax)
}

fn sup_residual(prob: &LichProblem, phi: &[f64], ctau: &[f64]) -> f64 {
    let g = &prob.geom;
    let kphi = g.laplacian_stiffness().matvec(phi);
    let c = g.c_n();
    let vol = &g.vol().values;
    (0..phi.len()).fold(0.0f64, |m, i| m.max((c * kphi[i] / vol[i] + prob.local(i, phi[i], ctau).0).abs()))
}

/// Relative Newton correction treated as converged.
const ROUNDOFF_STEP: f64 = 1e-13;

fn newton(prob: &LichProblem, init: &[f64], br: Bracket, opts: SolveOptions) -> Result<(Vec<f64>, usize)> {
    let ctau = prob.tau_coef();
    let (lo, hi) = (0.5 * br.lower, 2.0 * br.upper);
    let mut phi: Vec<f64> = init.iter().map(|p| p.clamp(lo, hi)).collect();
    let mut history = Vec::new();
    for it in 0..opts.max_iter {
        let rel = relative_residual(prob, &ScalarField::from(phi.clone()))?;
        history.push(rel);
        if rel <= opts.tol {
            return Ok((phi, it));
        }
        let (jac, rhs, fnorm) = newton_system(prob, &phi, &ctau);
        let delta = jac.factor()?.solve_refined(&jac, &rhs);
        // Below the round-off floor of the residual, a negligible correction
        // is convergence.
        if sup_abs(&delta) <= ROUNDOFF_STEP * sup_abs(&phi) {
            return Ok((phi, it));
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| (p + step * d).clamp(lo, hi)).collect();
            let fn_trial = sup_residual(prob, &trial, &ctau);
            if fn_trial < fnorm || (fn_trial <= fnorm && step < 1.0) {
                phi = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Step made no progress: at round-off level the residual may
            // already be as small as it can get.
            let rel = relative_residual(prob, &ScalarField::from(phi.clone()))?;
            if rel <= opts.tol {
                return Ok((phi, it));
            }
            return Err(Error::solve("Newton line search stalled", history));
        }
    }
    Err(Error::solve("Newton reached max_iter", history))
}

/// Damped Newton with bracket clipping, falling back to monotone iteration.
/// Starts from φ₊ unless `init` is given.
pub fn solve(prob: &LichProblem, init: Option<&ScalarField>) -> Result<LichSolution> {
    solve_with(prob, init, SolveOptions::default())
}

pub fn solve_with(prob: &LichProblem, init: Option<&ScalarField>, opts: SolveOptions) -> Result<LichSolution> {
    let br = bracket(prob)?;
    let start: Vec<f64> = match init {
        Some(f) => {
            prob.geom.grid().check_len(f.len())?;
            check_positive(f)?;
            f.values.clone()
        }
        None => vec![br.upper; prob.w_sq.len()],
    };
    match newton(prob, &start, br, opts) {
        Ok((phi, iterations)) => {
            let phi = ScalarField::from(phi);
            let residual_norm = relative_residual(prob, &phi)?;
            Ok(LichSolution { phi, iterations, residual_norm, method: Method::Newton, bracket: br })
        }
        Err(newton_err) => match monotone_iterate_with(prob, &br, opts) {
            Ok(m) => {
                let residual_norm = relative_residual(prob, &m.phi)?;
                Ok(LichSolution { phi: m.phi, iterations: m.iterations, residual_norm, method: Method::Monotone, bracket: br })
            }
            Err(Error::SolveFailure { reason, mut history }) => {
                if let Error::SolveFailure { history: h, .. } = &newton_err {
                    history.splice(0..0, h.iter().cloned());
                }
                Err(Error::solve(format!("Newton and monotone iteration both failed: {reason}"), history))
            }
            Err(e) => Err(e),
        },
    }
}

/// Independent solves over a batch sharing one geometry, in input order.
pub fn solve_many(probs: &[LichProblem], opts: SolveOptions, exec: Execution) -> Vec<Result<LichSolution>> {
    exec.map(probs, |p| solve_with(p, None, opts))
}

#[derive(Debug, Clone)]
pub struct MonotoneResult {
    pub phi: ScalarField,
    pub iterations: usize,
    /// Relative residual of the upper sequence per sweep.
    pub history: Vec<f64>,
}

/// Monotone sub/supersolution iteration from the bracket.
///
/// Upper and lower sequences run together; the shift m(x) is the larger of
/// ∂f/∂φ at both current iterates, which bounds ∂f/∂φ over the shrinking
/// bracket because ∂f/∂φ is convex in φ.
pub fn monotone_iterate(prob: &LichProblem, from: &Bracket) -> Result<MonotoneResult> {
    monotone_iterate_with(prob, from, SolveOptions::default())
}

pub fn monotone_iterate_with(prob: &LichProblem, from: &Bracket, opts: SolveOptions) -> Result<MonotoneResult> {
    if !(from.lower > 0.0 && from.lower <= from.upper) {
        return Err(Error::InvalidState("bracket must satisfy 0 < φ₋ ≤ φ₊".into()));
    }
    let g = &prob.geom;
    let n = g.len();
    let ctau = prob.tau_coef();
    let k = g.laplacian_stiffness();
    let c = g.c_n();
    let vol = &g.vol().values;
    let mut up = vec![from.upper; n];
    let mut lo = vec![from.lower; n];
    let mut history = Vec::new();
    for it in 0..=opts.max_iter {
        let rel = relative_residual(prob, &ScalarField::from(up.clone()))?;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(MonotoneResult { phi: ScalarField::from(up), iterations: it, history });
        }
        if it == opts.max_iter {
            break;
        }
        let mut mat = CyclicBanded::zeros(n, k.lower(), k.upper());
        let mut rhs_up = vec![0.0; n];
        let mut rhs_lo = vec![0.0; n];
        for i in 0..n {
            for (j, v) in k.row(i) {
                mat.add(i, j, c * v);
            }
            let (fu, du) = prob.local(i, up[i], &ctau);
            let (fl, dl) = prob.local(i, lo[i], &ctau);
            let m = du.max(dl).max(0.0);
            mat.add(i, i, vol[i] * m);
            rhs_up[i] = vol[i] * (m * up[i] - fu);
            rhs_lo[i] = vol[i] * (m * lo[i] - fl);
        }
        let lu = mat.factor()?;
        let new_up = lu.solve_refined(&mat, &rhs_up);
        let new_lo = lu.solve_refined(&mat, &rhs_lo);
        let scale = sup_abs(&up);
        for i in 0..n {
            if new_up[i] > up[i] + 1e-12 * scale || new_lo[i] < lo[i] - 1e-12 * scale {
                return Err(Error::solve(format!("monotonicity violated at index {i} in sweep {it}"), history));
            }
        }
        // Keep the pair ordered against round-off.
        up = new_up.iter().zip(&up).map(|(a, b)| a.min(*b)).collect();
        lo = new_lo.iter().zip(&lo).zip(&up).map(|((a, b), u)| a.max(*b).min(*u)).collect();
    }
    Err(Error::solve("monotone iteration reached max_iter", history))
}

/// Solves on any Yamabe-positive geometry, positivizing first when min R ≤ 0
/// and mapping back with φ = θφ̂. Residual, iterations and bracket are those
/// of the solve in the positivized frame.
pub fn solve_on(
    geom: Arc<ReducedGeometry>,
    tau: &ScalarField,
    w_sq: &ScalarField,
    t: f64,
    opts: SolveOptions,
) -> Result<LichSolution> {
    if geom.curvature_positive() {
        let prob = LichProblem::from_w_sq(geom, tau.clone(), w_sq.clone(), t)?;
        return solve_with(&prob, None, opts);
    }
    let pos = positivize(&geom)?;
    let th = pos.theta.theta().clone();
    let w = w_sq.map(f64::sqrt);
    let pushed = conformal_push(&ConformalData { w, tau: tau.clone(), sigma: None }, &pos.theta, geom.dim())?;
    let prob = LichProblem::new(Arc::new(pos.geom_hat), pushed.tau, &pushed.w, t)?;
    let mut sol = solve_with(&prob, None, opts)?;
    sol.phi = sol.phi.zip_map(&th, |a, b| a * b);
    Ok(sol)
}

#[derive(Debug, Clone)]
pub struct DerivativeReport {
    pub eps: Vec<f64>,
    /// Central differences per ε.
    pub differences: Vec<Vec<f64>>,
    /// ‖D_{ε_k} − D_{ε_{k+1}}‖_∞.
    pub successive: Vec<f64>,
    /// Fitted slope of log(successive) against log ε.
    pub slope: f64,
    /// Richardson extrapolation from the two smallest ε.
    pub limit: Vec<f64>,
    /// Linearized (implicit-function) derivative J⁻¹·2wδwφ^{−N−1}.
    pub linearized: Vec<f64>,
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Central-difference study of w ↦ φ along δw.
pub fn solution_map_derivative_check(prob: &LichProblem, dw: &ScalarField, eps: &[f64]) -> Result<DerivativeReport> {
    let g = &prob.geom;
    g.grid().check_len(dw.len())?;
    let opts = SolveOptions { tol: 1e-14, max_iter: 200 };
    let w = prob.w_sq.map(f64::sqrt);
    let base = solve_with(prob, None, opts)?.phi;
    let mut diffs = Vec::with_capacity(eps.len());
    for &e in eps {
        let plus = w.zip_map(dw, |a, b| a + e * b);
        let minus = w.zip_map(dw, |a, b| a - e * b);
        let pp = solve_with(&prob.with_w_sq(plus.map(|v| v * v))?, Some(&base), opts)?.phi;
        let pm = solve_with(&prob.with_w_sq(minus.map(|v| v * v))?, Some(&base), opts)?.phi;
        diffs.push(pp.zip_map(&pm, |a, b| (a - b) / (2.0 * e)).values);
    }
    let successive: Vec<f64> =
        diffs.windows(2).map(|p| p[0].iter().zip(&p[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))).collect();
    let slope = fit_slope(&eps[..successive.len()], &successive);
    let limit = if eps.len() >= 2 {
        let (i, j) = ordered_smallest(eps);
        let (e1, e2) = (eps[i] * eps[i], eps[j] * eps[j]);
        diffs[i].iter().zip(&diffs[j]).map(|(d1, d2)| (e2 * d1 - e1 * d2) / (e2 - e1)).collect()
    } else {
        diffs.first().cloned().unwrap_or_default()
    };
    let ctau = prob.tau_coef();
    let (jac, _, _) = newton_system(prob, &base.values, &ctau);
    let big_n = g.n_exp();
    let vol = &g.vol().values;
    let rhs: Vec<f64> =
        (0..g.len()).map(|i| vol[i] * 2.0 * w[i] * dw[i] * base[i].powf(-big_n - 1.0)).collect();
    let linearized = jac.factor()?.solve_refined(&jac, &rhs);
    Ok(DerivativeReport { eps: eps.to_vec(), differences: diffs, successive, slope, limit, linearized })
}

fn ordered_smallest(eps: &[f64]) -> (usize, usize) {
    let mut idx: Vec<usize> = (0..eps.len()).collect();
    idx.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]));
    (idx[0], idx[1])
}

#[derive(Debug, Clone)]
pub struct CovarianceReport {
    pub phi: ScalarField,
    pub phi_hat: ScalarField,
    /// ‖φ̂ − θ⁻¹φ‖_∞ / ‖θ⁻¹φ‖_∞.
    pub relative_error: f64,
}

/// Solves, pushes (g, w, τ) by θ, solves again and compares φ̂ with θ⁻¹φ.
pub fn conformal_covariance_check(prob: &LichProblem, theta: &ConformalTransform) -> Result<CovarianceReport> {
    let opts = SolveOptions { tol: 1e-13, max_iter: 200 };
    let phi = solve_with(prob, None, opts)?.phi;
    let geom_hat = Arc::new(prob.geom.conformal(theta.theta())?);
    let w = prob.w_sq.map(f64::sqrt);
    let pushed = conformal_push(&ConformalData { w, tau: prob.tau.clone(), sigma: None }, theta, prob.geom.dim())?;
    let phi_hat = solve_on(geom_hat, &pushed.tau, &pushed.w.map(|v| v * v), prob.t, opts)?.phi;
    let expect = phi.zip_map(theta.theta(), |a, b| a / b);
    let err = phi_hat.zip_map(&expect, |a, b| a - b).sup() / expect.sup();
    Ok(CovarianceReport { phi, phi_hat, relative_error: err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Fibre;
    use crate::grid::{Grid, Order};

    fn r_one(n: usize) -> Arc<ReducedGeometry> {
        let grid = Grid::periodic(n, Order::Four).unwrap();
        Arc::new(
            ReducedGeometry::new(
                grid,
                ScalarField::constant(n, 1.0),
                vec![Fibre::sphere(2, ScalarField::constant(n, 2f64.sqrt()))],
            )
            .unwrap(),
        )
    }

    #[test]
    fn trivial_constants() {
        let g = r_one(32);
        let p = LichProblem::new(g, ScalarField::zeros(32), &ScalarField::constant(32, 1.0), 1.0).unwrap();
        let res = residual(&p, &ScalarField::constant(32, 1.0)).unwrap();
        assert!(res.sup() < 1e-14);
        let b = bracket(&p).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        let s = solve(&p, None).unwrap();
        assert!(s.phi.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let m = monotone_iterate(&p, &b).unwrap();
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn supersolution_equality() {
        let g = r_one(32);
        let w2 = 2f64.powf(8.0);
        let p = LichProblem::from_w_sq(g, ScalarField::zeros(32), ScalarField::constant(32, w2), 1.0).unwrap();
        let b = bracket(&p).unwrap();
        assert!((b.upper - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let g = r_one(32);
        assert!(LichProblem::new(g.clone(), ScalarField::zeros(32), &ScalarField::zeros(32), 1.0).is_err());
        let p = LichProblem::new(g, ScalarField::zeros(32), &ScalarField::constant(32, 1.0), 1.0).unwrap();
        let mut phi = ScalarField::constant(32, 1.0);
        phi.values[3] = -1.0;
        assert!(matches!(residual(&p, &phi), Err(Error::InvalidState(_))));
    }
}
