use super::{
    certify, compute_c, interleave, signed_sqrt, split, Branch, CoupledOptions, CoupledState, CoupledSystem,
    Residuals, SeedData, SolveReport,
};
use crate::error::{Error, Result};
use crate::field::{sup_diff, ScalarField};
use crate::linalg::DenseLu;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Initial pseudo-arclength step, per √(unknown) in scaled coordinates.
    pub ds0: f64,
    pub ds_max: f64,
    pub ds_min: f64,
    pub max_steps: usize,
    /// Corrector tolerance on the relative residuals.
    pub tol: f64,
    pub max_corrector: usize,
    /// Consecutive natural-step failures before switching to arclength.
    pub switch_after: usize,
    /// Largest accepted sup|φ − predictor| / sup(predictor) for a natural step.
    pub max_jump: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            ds0: 3e-3,
            ds_max: 1.9e-2,
            ds_min: 1e-11,
            max_steps: 6000,
            tol: 1e-10,
            max_corrector: 30,
            switch_after: 2,
            max_jump: 0.2,
        }
    }
}

impl ContinuationOptions {
    /// k₀ followed by k₀ + 10^{j/4}, j = −4..=48.
    pub fn default_k_grid(k0: f64) -> Vec<f64> {
        let mut g = vec![k0];
        g.extend((-4..=48).map(|j| k0 + 10f64.powf(j as f64 / 4.0)));
        g
    }
}

#[derive(Debug, Clone)]
pub struct TracePoint {
    pub k: f64,
    pub kappa: f64,
    pub sup_phi: f64,
    pub res_lich: f64,
    pub res_vector: f64,
    pub iterations: usize,
    pub branch: Branch,
    pub state: CoupledState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fold {
    /// Index of the trace point with the largest κ.
    pub index: usize,
    pub k: f64,
    pub kappa: f64,
    pub sup_phi: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ContinuationTrace {
    pub points: Vec<TracePoint>,
    pub fold: Option<Fold>,
    /// Whether the branch came back past its starting k after the fold.
    pub returned: bool,
    /// Non-fatal step failures, in order.
    pub failures: Vec<String>,
    /// Index of the first arclength point, if the sweep switched.
    pub arclength_from: Option<usize>,
}

impl ContinuationTrace {
    pub fn max_sup_phi(&self) -> f64 {
        self.points.iter().map(|p| p.sup_phi).fold(0.0, f64::max)
    }

    pub fn returned_point(&self) -> Option<&TracePoint> {
        self.points.iter().rev().find(|p| p.branch == Branch::Large)
    }
}

fn point(sys: &CoupledSystem, state: CoupledState, kappa: f64, iterations: usize, branch: Branch) -> TracePoint {
    let r = sys.report(state, kappa, iterations, branch);
    TracePoint {
        k: r.k,
        kappa,
        sup_phi: r.sup_phi,
        res_lich: r.res_lich,
        res_vector: r.res_vector,
        iterations,
        branch,
        state: CoupledState { phi: r.phi, w: r.w },
    }
}

/// Picard from φ ≡ 1 with a Newton polish; Newton alone as fallback.
fn initial_solution(sys: &CoupledSystem, kappa: f64) -> Result<(CoupledState, usize)> {
    let n = sys.len();
    let one = ScalarField::constant(n, 1.0);
    let tol = sys.opts.newton_tol;
    match sys.picard(&one, kappa) {
        Ok((s, it)) => match sys.newton(&s, kappa, tol, sys.opts.max_newton) {
            Ok((s2, it2)) => Ok((s2, it + it2)),
            Err(_) => Ok((s, it)),
        },
        Err(e) => {
            let w = sys.solve_w(&one.values);
            let start = CoupledState { phi: one, w: w.into() };
            sys.newton(&start, kappa, tol, sys.opts.max_newton).map_err(|_| e)
        }
    }
}

/// Natural continuation over `k_grid` from the solution at k_grid[0], switching
/// to pseudo-arclength in κ = k² when the k-steps fail near a fold.
pub fn k_sweep(seed: &SeedData, k_grid: &[f64]) -> Result<ContinuationTrace> {
    let sys = CoupledSystem::new(seed, CoupledOptions::default())?;
    let k0 = *k_grid.first().ok_or_else(|| Error::InvalidState("empty k grid".into()))?;
    let (start, it) = initial_solution(&sys, k0 * k0)?;
    k_sweep_from(&sys, start, it, k_grid, ContinuationOptions::default())
}

pub fn k_sweep_from(
    sys: &CoupledSystem,
    start: CoupledState,
    start_iterations: usize,
    k_grid: &[f64],
    opts: ContinuationOptions,
) -> Result<ContinuationTrace> {
    if k_grid.is_empty() {
        return Err(Error::InvalidState("empty k grid".into()));
    }
    if k_grid.windows(2).any(|w| !(w[0] < w[1])) || k_grid[0] < 0.0 {
        return Err(Error::InvalidState("k grid must be nonnegative and strictly increasing".into()));
    }
    let k0 = k_grid[0];
    let kappa0 = k0 * k0;
    let k_end = *k_grid.last().unwrap();
    let mut trace = ContinuationTrace::default();
    let branch0 = if k0 == 0.0 { Branch::Small } else { Branch::Deformed(k0) };
    trace.points.push(point(sys, start, kappa0, start_iterations, branch0));
    let tol = opts.tol;
    let mut idx = 1;
    let mut step = k_grid.get(1).map_or(0.0, |k| k - k0);
    let mut fails = 0;
    let mut k_cur = k0;
    while idx < k_grid.len() {
        let target = k_grid[idx];
        let kn = (k_cur + step).min(target);
        let pred = predictor(&trace, kn);
        // A corrector that lands far from its predictor has jumped branches.
        let jumped = |s: &CoupledState| sup_diff(&s.phi.values, &pred.phi.values) > opts.max_jump * pred.phi.sup();
        match sys.newton(&pred, kn * kn, tol, sys.opts.max_newton) {
            Ok((s, _)) if jumped(&s) => {
                trace.failures.push(format!("natural step to k = {kn:.6e} left the branch"));
                fails += 1;
                step *= 0.5;
                if fails >= opts.switch_after {
                    break;
                }
            }
            Ok((s, it)) => {
                trace.points.push(point(sys, s, kn * kn, it, Branch::Deformed(kn)));
                k_cur = kn;
                fails = 0;
                if kn >= target {
                    idx += 1;
                    if let Some(next) = k_grid.get(idx) {
                        step = next - k_cur;
                    }
                } else {
                    step = (2.0 * step).min(target - k_cur);
                }
            }
            Err(e) => {
                trace.failures.push(format!("natural step to k = {kn:.6e}: {e}"));
                fails += 1;
                step *= 0.5;
                if fails >= opts.switch_after {
                    break;
                }
            }
        }
    }
    if idx >= k_grid.len() {
        return Ok(trace);
    }
    arclength_phase(sys, &mut trace, kappa0, k_end * k_end, opts)?;
    Ok(trace)
}

/// Secant predictor in k from the last two trace points, falling back to
/// the last point if the extrapolation leaves φ > 0.
fn predictor(trace: &ContinuationTrace, k: f64) -> CoupledState {
    let last = trace.points.last().unwrap();
    if trace.points.len() >= 2 {
        let prev = &trace.points[trace.points.len() - 2];
        if last.k > prev.k {
            let s = (k - last.k) / (last.k - prev.k);
            let phi: Vec<f64> =
                last.state.phi.values.iter().zip(&prev.state.phi.values).map(|(a, b)| a + s * (a - b)).collect();
            if phi.iter().all(|p| *p > 0.0) {
                let w: Vec<f64> =
                    last.state.w.values.iter().zip(&prev.state.w.values).map(|(a, b)| a + s * (a - b)).collect();
                return CoupledState { phi: phi.into(), w: w.into() };
            }
        }
    }
    last.state.clone()
}

/// Per-unknown scales for the arclength metric: sup φ, sup|W| + 1 and
/// |κ| + (sup φ)^{2N} (κ enters F1 against φ^{−N−1}).
fn scales(sys: &CoupledSystem, y: &[f64], kappa: f64) -> (Vec<f64>, f64) {
    let (phi, w) = split(y);
    let sp = phi.iter().cloned().fold(0.0, f64::max);
    let sw = w.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let dy: Vec<f64> = (0..y.len()).map(|i| if i % 2 == 0 { sp } else { sw }).collect();
    let big_n = sys.geom().n_exp();
    (dy, kappa.abs() + sp.powf(2.0 * big_n))
}

/// Solves [J·D_y, F_κ·D_κ; tᵀ] q = [r; ρ] and returns dz = (D_y q_y, D_κ q_κ).
#[allow(clippy::too_many_arguments)]
fn bordered_solve(
    sys: &CoupledSystem,
    y: &[f64],
    kappa: f64,
    dy_scale: &[f64],
    dk_scale: f64,
    tan: &[f64],
    r: &[f64],
    rho: f64,
) -> Result<(Vec<f64>, f64)> {
    let (jac, fk) = sys.jacobian(y, kappa);
    let m = y.len();
    let ty = &tan[..m];
    let tk = tan[m];
    match jac.factor() {
        Ok(lu) => {
            let neg_fk: Vec<f64> = fk.iter().map(|v| -v).collect();
            let b = lu.solve_refined(&jac, &neg_fk);
            let elim = |r: &[f64], rho: f64| -> (Vec<f64>, f64) {
                let a = lu.solve_refined(&jac, r);
                let ta: f64 = (0..m).map(|i| ty[i] * a[i] / dy_scale[i]).sum();
                let tb: f64 = (0..m).map(|i| ty[i] * b[i] / dy_scale[i]).sum();
                let qk = (rho - ta) / (dk_scale * tb + tk);
                let dk = dk_scale * qk;
                ((0..m).map(|i| a[i] + dk * b[i]).collect(), dk)
            };
            let (mut dy, mut dk) = elim(r, rho);
            // One refinement pass on the full bordered system.
            let jd = jac.matvec(&dy);
            let r1: Vec<f64> = (0..m).map(|i| r[i] - jd[i] - fk[i] * dk).collect();
            let rho1 = rho - (0..m).map(|i| ty[i] * dy[i] / dy_scale[i]).sum::<f64>() - tk * dk / dk_scale;
            let (cy, ck) = elim(&r1, rho1);
            for (a, c) in dy.iter_mut().zip(&cy) {
                *a += c;
            }
            dk += ck;
            Ok((dy, dk))
        }
        Err(_) => {
            let dim = m + 1;
            let mut a = vec![0.0; dim * dim];
            let dense = jac.to_dense();
            for i in 0..m {
                for j in 0..m {
                    a[i * dim + j] = dense[i * m + j] * dy_scale[j];
                }
                a[i * dim + m] = fk[i] * dk_scale;
            }
            a[m * dim..m * dim + m].copy_from_slice(ty);
            a[m * dim + m] = tk;
            let lu = DenseLu::factor(dim, &a, 1e-15)?;
            let mut rhs = r.to_vec();
            rhs.push(rho);
            let q = lu.solve(&rhs);
            Ok(((0..m).map(|i| q[i] * dy_scale[i]).collect(), q[m] * dk_scale))
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

fn arclength_phase(
    sys: &CoupledSystem,
    trace: &mut ContinuationTrace,
    kappa_return: f64,
    kappa_end: f64,
    opts: ContinuationOptions,
) -> Result<()> {
    let last = trace.points.last().unwrap().clone();
    let mut z_y = interleave(&last.state.phi.values, &last.state.w.values);
    let mut z_k = last.kappa;
    let m = z_y.len();
    let root = ((m + 1) as f64).sqrt();
    let (dy, dk) = scales(sys, &z_y, z_k);
    // Initial tangent: dy/dκ from J b = −F_κ, oriented toward increasing κ.
    let mut tan = {
        let (jac, fk) = sys.jacobian(&z_y, z_k);
        let lu = jac.factor()?;
        let neg: Vec<f64> = fk.iter().map(|v| -v).collect();
        let b = lu.solve_refined(&jac, &neg);
        let mut t: Vec<f64> = (0..m).map(|i| b[i] / dy[i]).collect();
        t.push(1.0 / dk);
        normalize(&mut t);
        t
    };
    trace.arclength_from = Some(trace.points.len());
    let mut ds = opts.ds0 * root;
    let ds_max = opts.ds_max * root;
    let ds_min = opts.ds_min * root;
    let mut best = trace.points.len() - 1;
    let mut passed_fold = false;
    for _ in 0..opts.max_steps {
        let (dy, dk) = scales(sys, &z_y, z_k);
        let mut y: Vec<f64> = (0..m).map(|i| z_y[i] + ds * tan[i] * dy[i]).collect();
        let mut kap = z_k + ds * tan[m] * dk;
        let mut ok = false;
        let mut iters = 0;
        for it in 0..opts.max_corrector {
            iters = it;
            if (0..m).step_by(2).any(|i| !(y[i] > 0.0)) {
                break;
            }
            let f = sys.eval(&y, kap);
            let fa = (0..m).map(|i| (y[i] - z_y[i]) / dy[i] * tan[i]).sum::<f64>() + (kap - z_k) / dk * tan[m] - ds;
            let (phi, w) = split(&y);
            let res = sys.residuals(&phi, &w, kap);
            if res.max() <= opts.tol && fa.abs() <= 1e-9 * ds.max(1e-3) {
                ok = true;
                break;
            }
            if !res.max().is_finite() {
                break;
            }
            let r: Vec<f64> = f.iter().map(|v| -v).collect();
            let (cy, ck) = match bordered_solve(sys, &y, kap, &dy, dk, &tan, &r, -fa) {
                Ok(v) => v,
                Err(_) => break,
            };
            for (a, c) in y.iter_mut().zip(&cy) {
                *a += c;
            }
            kap += ck;
        }
        if !ok {
            ds *= 0.5;
            if ds < ds_min {
                trace.failures.push(format!("arclength stalled at κ = {z_k:.6e}"));
                break;
            }
            continue;
        }
        // New tangent from the bordered system with the old tangent row.
        let zero = vec![0.0; m];
        let (ty, tk) = bordered_solve(sys, &y, kap, &dy, dk, &tan, &zero, 1.0)?;
        let mut t: Vec<f64> = (0..m).map(|i| ty[i] / dy[i]).collect();
        t.push(tk / dk);
        normalize(&mut t);
        tan = t;
        let decreasing = kap < z_k;
        z_y = y;
        z_k = kap;
        let (phi, w) = split(&z_y);
        let state = CoupledState { phi: phi.into(), w: w.into() };
        trace.points.push(point(sys, state, z_k, iters, Branch::Deformed(signed_sqrt(z_k))));
        let idx = trace.points.len() - 1;
        if trace.points[idx].kappa > trace.points[best].kappa {
            best = idx;
        }
        if decreasing && !passed_fold {
            passed_fold = true;
        }
        if passed_fold && z_k < kappa_return {
            trace.fold = fold_at(trace, best);
            finish_return(sys, trace, kappa_return, opts)?;
            return Ok(());
        }
        if !passed_fold && z_k > kappa_end {
            break;
        }
        if iters < 4 {
            ds = (1.5 * ds).min(ds_max);
        }
    }
    if passed_fold {
        trace.fold = fold_at(trace, best);
    }
    Ok(())
}

fn fold_at(trace: &ContinuationTrace, best: usize) -> Option<Fold> {
    let p = &trace.points[best];
    Some(Fold { index: best, k: p.k, kappa: p.kappa, sup_phi: p.sup_phi })
}

/// Newton at κ = κ_return from the interpolation of the two points that
/// straddle it.
fn finish_return(
    sys: &CoupledSystem,
    trace: &mut ContinuationTrace,
    kappa_return: f64,
    opts: ContinuationOptions,
) -> Result<()> {
    let n = trace.points.len();
    let (a, b) = (&trace.points[n - 2], &trace.points[n - 1]);
    let s = (kappa_return - a.kappa) / (b.kappa - a.kappa);
    let mix = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + s * (q - p)).collect() };
    let interp = CoupledState {
        phi: mix(&a.state.phi.values, &b.state.phi.values).into(),
        w: mix(&a.state.w.values, &b.state.w.values).into(),
    };
    let tol = sys.opts.newton_tol.min(opts.tol);
    let attempt = sys
        .newton(&interp, kappa_return, tol, sys.opts.max_newton)
        .or_else(|_| sys.newton(&a.state, kappa_return, tol, sys.opts.max_newton));
    match attempt {
        Ok((st, it)) => {
            trace.points.push(point(sys, st, kappa_return, it, Branch::Large));
            trace.returned = true;
        }
        Err(e) => trace.failures.push(format!("polish at the return point failed: {e}")),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    /// A(a): sup over k of the (a, k)-family at the seed's exponent.
    A,
    /// A(t): the same supremum read as a function of the scale t.
    T,
}

#[derive(Debug, Clone)]
pub struct AEstimate {
    pub value: f64,
    pub mode: EstimateMode,
    /// Set when the exponent does not exceed the admissibility threshold.
    pub warning: Option<String>,
    pub trace: ContinuationTrace,
}

/// Empirical A as the largest sup φ seen along a k-sweep, fold included.
pub fn estimate_a(seed: &SeedData, mode: EstimateMode, k_grid: &[f64]) -> Result<AEstimate> {
    let rep = compute_c(&seed.geom, &seed.tau, 0.1)?;
    let warning = if rep.violated {
        Some("admissibility condition violated for τ; A may be infinite".to_string())
    } else if !(seed.a > rep.a_min) {
        Some(format!("a = {} does not exceed a_min = {:.6}", seed.a, rep.a_min))
    } else {
        None
    };
    let trace = k_sweep(seed, k_grid)?;
    Ok(AEstimate { value: trace.max_sup_phi(), mode, warning, trace })
}

#[derive(Debug, Clone)]
pub struct TwoSolutions {
    pub small: SolveReport,
    pub large: SolveReport,
    /// ‖φ_large − φ_small‖_∞ / ‖φ_small‖_∞.
    pub gap: f64,
    pub certified_small: Residuals,
    pub certified_large: Residuals,
    pub trace: ContinuationTrace,
}

/// Small solution from φ ≡ 1, large one by continuing in k through the fold
/// and back to the seed's k.
pub fn find_two_solutions(
    seed: &SeedData,
    k_grid: Option<&[f64]>,
    copts: CoupledOptions,
    opts: ContinuationOptions,
) -> Result<TwoSolutions> {
    if seed.sigma.is_zero() {
        return Err(Error::Precondition("σ ≡ 0: the search needs nonzero TT data".into()));
    }
    let rep = compute_c(&seed.geom, &seed.tau, 0.1)?;
    if rep.violated {
        return Err(Error::Precondition("τ violates the admissibility condition".into()));
    }
    if !(seed.a > rep.a_min) {
        return Err(Error::Precondition(format!("a = {} must exceed a_min = {:.6}", seed.a, rep.a_min)));
    }
    let sys = CoupledSystem::new(seed, copts)?;
    let kappa0 = seed.k * seed.k;
    let (small_state, it) = initial_solution(&sys, kappa0)?;
    let small = sys.report(small_state.clone(), kappa0, it, Branch::Small);
    let grid = match k_grid {
        Some(g) => g.to_vec(),
        None => ContinuationOptions::default_k_grid(seed.k),
    };
    let trace = k_sweep_from(&sys, small_state, it, &grid, opts)?;
    let Some(ret) = trace.returned_point() else {
        return Err(Error::NotFound(format!(
            "no second solution: {} trace points, fold {}, last failure: {}",
            trace.points.len(),
            trace.fold.map_or("not found".to_string(), |f| format!("at k = {:.6e}", f.k)),
            trace.failures.last().map_or("none", |s| s.as_str())
        )));
    };
    let large = sys.report(ret.state.clone(), kappa0, ret.iterations, Branch::Large);
    let gap = sup_diff(&large.phi.values, &small.phi.values) / small.sup_phi;
    if !(gap >= 0.1) {
        return Err(Error::NotFound(format!("return point coincides with the small solution (gap {gap:.3e})")));
    }
    let certified_small = certify(seed, &small.phi, &small.w)?;
    let certified_large = certify(seed, &large.phi, &large.w)?;
    for (name, r, c) in [("small", &small, certified_small), ("large", &large, certified_large)] {
        if r.res_lich.max(r.res_vector) > copts.tol || c.max() > 2.0 * copts.tol {
            return Err(Error::NotFound(format!(
                "{name} solution fails certification (assembled {:.3e}, independent {:.3e})",
                r.res_lich.max(r.res_vector),
                c.max()
            )));
        }
    }
    Ok(TwoSolutions { small, large, gap, certified_small, certified_large, trace })
}
