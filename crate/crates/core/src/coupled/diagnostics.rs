use super::{compute_c, CoupledOptions, SeedData, VectorSolver};
use crate::error::{Error, Result};
use crate::field::{sup_abs, ReducedVector, ScalarField};
use crate::geometry::{half_vector_laplacian, l_frame, multiplicities, norms_and_integrals, ReducedGeometry};
use crate::lichnerowicz::{self, LichProblem, SolveOptions};
use std::sync::Arc;

/// Pointwise |σ + LW| (collocated L).
fn sigma_lw_norm(seed: &SeedData, w: &[f64]) -> Vec<f64> {
    let g = &seed.geom;
    let frame = seed.sigma.frame(g);
    let lam = l_frame(g, w);
    let mult = multiplicities(g);
    (0..w.len())
        .map(|i| {
            let mut s = mult[0] * (frame.u[i] + lam[0][i]).powi(2);
            for (j, v) in frame.v.iter().enumerate() {
                s += mult[j + 1] * (v[i] + lam[j + 1][i]).powi(2);
            }
            for o in frame.off.iter().flatten() {
                s += 2.0 * o[i] * o[i];
            }
            s.sqrt()
        })
        .collect()
}

/// Blow-up profile φ = (√((n−1)/n)(|σ+LW| + k)/(tτ^a))^{1/N}, floored at 1e−6.
pub fn blowup_init(seed: &SeedData, w_guess: &ReducedVector, k: f64) -> Result<ScalarField> {
    let g = &seed.geom;
    g.grid().check_len(w_guess.len())?;
    let norm = sigma_lw_norm(seed, &w_guess.values);
    let m = seed.mean_curvature();
    let c = g.alpha().sqrt();
    let big_n = g.n_exp();
    Ok(ScalarField::from(
        (0..norm.len())
            .map(|i| {
                let num = c * (norm[i] + k);
                if num > 0.0 {
                    (num / m[i]).powf(1.0 / big_n).max(1e-6)
                } else {
                    1e-6
                }
            })
            .collect::<Vec<f64>>(),
    ))
}

/// ‖d(tτ^a)‖_{L^p}^{N+2} ‖σ‖_{L²}^{N−2}.
pub fn smallness_functional(seed: &SeedData) -> Result<f64> {
    let g = &seed.geom;
    let m = seed.mean_curvature();
    let dm = g.grid().diff(&m.values);
    let a = &g.profile_a().values;
    let dnorm: Vec<f64> = dm.iter().zip(a).map(|(d, a)| d.abs() / a).collect();
    let sig: Vec<f64> = seed.sigma.tensor().norm_sq(g).iter().map(|v| v.sqrt()).collect();
    let big_n = g.n_exp();
    let lp = norms_and_integrals(g, &dnorm, seed.p_sobolev)?.lp_norm;
    let l2 = norms_and_integrals(g, &sig, 2.0)?.l2_norm;
    Ok(lp.powf(big_n + 2.0) * l2.powf(big_n - 2.0))
}

/// Limit equation −½L*LW = a√((n−1)/n)(|LW|+k)dτ/τ and the integrated chain
/// obtained by pairing it with dτ/τ.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    /// Sup over x of the metric norm of the equation's covector residual.
    pub residual: f64,
    /// a√((n−1)/n)∫(|LW|+k)|dτ/τ|² dv.
    pub lhs: f64,
    /// −½∫⟨LW, L(dτ/τ)♯⟩ dv.
    pub pairing: f64,
    /// ½∫|LW||L(dτ/τ)♯| dv.
    pub cauchy_schwarz: f64,
    /// (c/2)∫|LW||dτ/τ|² dv with the measured c (∞ if violated).
    pub condition_bound: f64,
}

pub fn limit_equation_residual(
    geom: &ReducedGeometry,
    tau: &ScalarField,
    a: f64,
    w: &ReducedVector,
    k: f64,
) -> Result<LimitReport> {
    let grid = geom.grid();
    grid.check_len(tau.len())?;
    grid.check_len(w.len())?;
    if !(tau.min() > 0.0) {
        return Err(Error::InvalidState("τ must be strictly positive".into()));
    }
    let n = geom.len();
    let av = &geom.profile_a().values;
    let mult = multiplicities(geom);
    let ln_tau: Vec<f64> = tau.values.iter().map(|t| t.ln()).collect();
    let om = grid.diff(&ln_tau);
    let lw = l_frame(geom, &w.values);
    let lw_norm: Vec<f64> = (0..n).map(|i| (0..mult.len()).map(|j| mult[j] * lw[j][i].powi(2)).sum::<f64>().sqrt()).collect();
    let hv = half_vector_laplacian(geom, w)?;
    let coef = a * geom.alpha().sqrt();
    let residual =
        (0..n).map(|i| (-hv[i] - coef * (lw_norm[i] + k) * om[i]).abs() / av[i]).fold(0.0f64, f64::max);
    let sharp: Vec<f64> = om.iter().zip(av).map(|(u, a)| u / (a * a)).collect();
    let lom = l_frame(geom, &sharp);
    let om_sq: Vec<f64> = om.iter().zip(av).map(|(u, a)| (u / a).powi(2)).collect();
    let integral = |f: Vec<f64>| -> Result<f64> { Ok(norms_and_integrals(geom, &f, 1.0)?.integral) };
    let lhs = integral((0..n).map(|i| coef * (lw_norm[i] + k) * om_sq[i]).collect())?;
    let pairing =
        integral((0..n).map(|i| -0.5 * (0..mult.len()).map(|j| mult[j] * lw[j][i] * lom[j][i]).sum::<f64>()).collect())?;
    let lom_norm: Vec<f64> =
        (0..n).map(|i| (0..mult.len()).map(|j| mult[j] * lom[j][i].powi(2)).sum::<f64>().sqrt()).collect();
    let cauchy_schwarz = integral((0..n).map(|i| 0.5 * lw_norm[i] * lom_norm[i]).collect())?;
    let c = compute_c(geom, tau, 0.1)?.c_measured;
    let base = integral((0..n).map(|i| lw_norm[i] * om_sq[i]).collect())?;
    let condition_bound = if base == 0.0 { 0.0 } else { 0.5 * c * base };
    Ok(LimitReport { residual, lhs, pairing, cauchy_schwarz, condition_bound })
}

/// Anchor triple (φ₀, W₀, k₀) of the deformed operator.
#[derive(Debug, Clone)]
pub struct Anchors {
    pub phi0: ScalarField,
    pub w0: ReducedVector,
    pub k0: f64,
}

/// Parameter dependence of the deformed operator T(t, φ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeformMode {
    /// Mean curvature τ^{a₀/t}, vector source t^{−N}φ^N dτ^{a₀/t}; needs max τ < 1.
    Exponent { a0: f64 },
    /// Mean curvature t^N t₀ τ^a in the scalar equation, vector source t₀φ^N dτ^a.
    Scale { t0: f64 },
}

/// ψ = T(t, φ): the Lichnerowicz solution with source
/// |σ+LW_{t,φ}|² + (2max{‖φ₀‖_∞, 2} − ‖φ‖_∞)₊(‖σ+LW₀‖²_∞ + k₀²).
pub fn deformed_t_apply(
    seed: &SeedData,
    mode: DeformMode,
    t: f64,
    phi: &ScalarField,
    anchors: &Anchors,
) -> Result<ScalarField> {
    let g: &Arc<ReducedGeometry> = &seed.geom;
    g.grid().check_len(phi.len())?;
    g.grid().check_len(anchors.phi0.len())?;
    g.grid().check_len(anchors.w0.len())?;
    if !(phi.min() > 0.0) {
        return Err(Error::InvalidState("φ must be positive".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidState(format!("t = {t} outside [0, 1]")));
    }
    let big_n = g.n_exp();
    let alpha = g.alpha();
    let (lich_m, vec_dm): (Vec<f64>, Option<Vec<f64>>) = match mode {
        DeformMode::Exponent { a0 } => {
            if !(seed.tau.max() < 1.0) {
                return Err(Error::Precondition("exponent deformation needs max τ < 1".into()));
            }
            if t == 0.0 {
                (vec![0.0; phi.len()], None)
            } else {
                let m: Vec<f64> = seed.tau.values.iter().map(|x| x.powf(a0 / t)).collect();
                let dm: Vec<f64> = g.grid().diff(&m).iter().map(|d| d * t.powf(-big_n)).collect();
                (m, Some(dm))
            }
        }
        DeformMode::Scale { t0 } => {
            let ta: Vec<f64> = seed.tau.values.iter().map(|x| x.powf(seed.a)).collect();
            let m: Vec<f64> = ta.iter().map(|x| t.powf(big_n) * t0 * x).collect();
            let dm: Vec<f64> = g.grid().diff(&ta).iter().map(|d| t0 * d).collect();
            (m, Some(dm))
        }
    };
    let w: Vec<f64> = match &vec_dm {
        Some(dm) => {
            let vs = VectorSolver::new(g.clone(), CoupledOptions::default().kernel_tol)?;
            let rhs: Vec<f64> = phi.values.iter().zip(dm).map(|(p, d)| alpha * p.powf(big_n) * d).collect();
            vs.solve(&rhs)
        }
        None => vec![0.0; phi.len()],
    };
    let base: Vec<f64> = sigma_lw_norm(seed, &w).iter().map(|v| v * v).collect();
    let anchor = sup_abs(&sigma_lw_norm(seed, &anchors.w0.values)).powi(2) + anchors.k0 * anchors.k0;
    let weight = (2.0 * anchors.phi0.sup().max(2.0) - phi.sup()).max(0.0);
    let w2: Vec<f64> = base.iter().map(|b| b + weight * anchor).collect();
    let prob = LichProblem::from_w_sq(g.clone(), ScalarField::from(lich_m), ScalarField::from(w2), 1.0)?;
    Ok(lichnerowicz::solve_with(&prob, None, SolveOptions { tol: 1e-12, max_iter: 200 })?.phi)
}
