//! The coupled conformal system
//!
//! c_nΔφ + Rφ + ((n−1)/n)m²φ^{N−1} = (|σ+LW|² + k²)φ^{−N−1},
//! −½L*LW = ((n−1)/n)φ^N dm,
//!
//! with mean curvature m = tτ^a, plus the continuation and diagnostic
//! machinery around it.

mod continuation;
mod diagnostics;
pub mod report;
mod tau;

pub use continuation::{
    estimate_a, find_two_solutions, k_sweep, k_sweep_from, AEstimate, ContinuationOptions, ContinuationTrace,
    EstimateMode, Fold, TracePoint, TwoSolutions,
};
pub use diagnostics::{
    blowup_init, deformed_t_apply, limit_equation_residual, smallness_functional, Anchors, DeformMode,
    LimitReport,
};
pub use tau::{admissibility_threshold, compute_c, design_admissible_tau, AdmissibilityReport, TauLayout};

use crate::error::{Error, Result};
use crate::field::{sup_abs, ReducedVector, ScalarField};
use crate::geometry::{l_frame, multiplicities, ReducedGeometry, ReducedTT};
use crate::lichnerowicz::{self, LichProblem, SolveOptions};
use crate::linalg::{CyclicBanded, CyclicLu};
use std::fmt;
use std::sync::Arc;

/// One instance of the (t, k)-conformal equations.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub geom: Arc<ReducedGeometry>,
    pub tau: ScalarField,
    pub sigma: ReducedTT,
    pub a: f64,
    pub t: f64,
    pub k: f64,
    pub p_sobolev: f64,
}

impl SeedData {
    pub fn new(geom: Arc<ReducedGeometry>, tau: ScalarField, sigma: ReducedTT, a: f64, t: f64, k: f64) -> Result<SeedData> {
        let p = 2.0 * geom.dim() as f64;
        let seed = SeedData { geom, tau, sigma, a, t, k, p_sobolev: p };
        seed.validate()?;
        Ok(seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.geom.grid().check_len(self.tau.len())?;
        if !(self.tau.min() > 0.0) {
            return Err(Error::InvalidState(format!("τ must be strictly positive (min {:.3e})", self.tau.min())));
        }
        if !(self.a >= 1.0) {
            return Err(Error::InvalidState(format!("exponent a = {} < 1", self.a)));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidState(format!("t = {} outside (0, 1]", self.t)));
        }
        if !(self.k >= 0.0) {
            return Err(Error::InvalidState(format!("k = {} < 0", self.k)));
        }
        if !(self.p_sobolev > self.geom.dim() as f64) {
            return Err(Error::InvalidState(format!("p = {} must exceed n = {}", self.p_sobolev, self.geom.dim())));
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Result<SeedData> {
        let s = SeedData { t, ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    pub fn with_k(&self, k: f64) -> Result<SeedData> {
        let s = SeedData { k, ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    /// Effective mean curvature tτ^a.
    pub fn mean_curvature(&self) -> ScalarField {
        self.tau.map(|x| self.t * x.powf(self.a))
    }
}

/// Which solution a report belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    Small,
    Large,
    Deformed(f64),
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::Small => "small",
            Branch::Large => "large",
            Branch::Deformed(_) => "deformed",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Deformed(k) => write!(f, "deformed(k={k:.6e})"),
            b => f.write_str(b.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub phi: ScalarField,
    pub w: ReducedVector,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub phi: ScalarField,
    pub w: ReducedVector,
    pub res_lich: f64,
    pub res_vector: f64,
    pub iterations: usize,
    pub branch: Branch,
    pub sup_phi: f64,
    pub k: f64,
}

impl SolveReport {
    pub fn state(&self) -> CoupledState {
        CoupledState { phi: self.phi.clone(), w: self.w.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOptions {
    /// Acceptance tolerance on both relative residuals.
    pub tol: f64,
    /// Newton polishing target.
    pub newton_tol: f64,
    pub max_picard: usize,
    pub max_newton: usize,
    /// Geometric damping weight θ_d.
    pub damping: f64,
    /// Relative kernel threshold for ½L*L.
    pub kernel_tol: f64,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions { tol: 1e-8, newton_tol: 1e-10, max_picard: 500, max_newton: 60, damping: 0.7, kernel_tol: 1e-8 }
    }
}

/// Smallest generalized eigenvalue of ½L*L against the mass vol·A².
#[derive(Debug, Clone)]
pub struct KernelReport {
    pub sigma_min: f64,
    /// Largest diagonal ratio S_ii/(vol A²)_i, a proxy for the top of the spectrum.
    pub scale: f64,
    pub threshold: f64,
    /// Sup-normalized eigenvector.
    pub direction: Vec<f64>,
    pub iterations: usize,
}

impl KernelReport {
    pub fn has_kernel(&self) -> bool {
        !(self.sigma_min >= self.threshold)
    }
}

/// Shifted inverse iteration for the bottom of the ½L*L spectrum.
pub fn kernel_check(geom: &ReducedGeometry, kernel_tol: f64) -> Result<KernelReport> {
    let s = geom.vector_stiffness();
    let n = geom.len();
    let mass: Vec<f64> = geom.vol().values.iter().zip(&geom.profile_a().values).map(|(v, a)| v * a * a).collect();
    let scale = (0..n).map(|i| s.get(i, i) / mass[i]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut shifted = s.clone();
    shifted.add_diagonal(&mass.iter().map(|m| 1e-9 * scale * m).collect::<Vec<f64>>());
    let lu = shifted.factor()?;
    let rq = |v: &[f64]| {
        let sv = s.matvec(v);
        let num: f64 = sv.iter().zip(v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().zip(&mass).map(|(a, m)| a * a * m).sum();
        num / den
    };
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (geom.grid().x(i)).sin() + 0.25 * (3.0 * geom.grid().x(i)).cos()).collect();
    let mut lambda = rq(&v);
    let mut iterations = 0;
    for it in 1..=300 {
        let b: Vec<f64> = v.iter().zip(&mass).map(|(a, m)| a * m).collect();
        let mut next = lu.solve_refined(&shifted, &b);
        crate::linalg::normalize_sup(&mut next);
        v = next;
        let l = rq(&v);
        let change = (l - lambda).abs();
        lambda = l;
        iterations = it;
        if it >= 3 && change <= 1e-13 * scale {
            break;
        }
    }
    Ok(KernelReport { sigma_min: lambda.max(0.0), scale, threshold: kernel_tol * scale, direction: v, iterations })
}

/// Factored ½L*L on a geometry certified free of conformal Killing fields.
#[derive(Debug, Clone)]
pub struct VectorSolver {
    geom: Arc<ReducedGeometry>,
    lu: CyclicLu,
    pub kernel: KernelReport,
}

impl VectorSolver {
    pub fn new(geom: Arc<ReducedGeometry>, kernel_tol: f64) -> Result<VectorSolver> {
        let kernel = kernel_check(&geom, kernel_tol)?;
        if kernel.has_kernel() {
            return Err(Error::ConformalKillingKernel {
                sigma_min: kernel.sigma_min,
                threshold: kernel.threshold,
                direction: kernel.direction,
            });
        }
        let lu = geom.vector_stiffness().factor()?;
        Ok(VectorSolver { geom, lu, kernel })
    }

    /// W with −½L*LW = rhs (rhs is the x-covector component).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b: Vec<f64> = rhs.iter().zip(&self.geom.vol().values).map(|(r, v)| -r * v).collect();
        self.lu.solve_refined(self.geom.vector_stiffness(), &b)
    }
}

/// Solves −½L*LW = rhs after the kernel check.
pub fn vector_solve(geom: &Arc<ReducedGeometry>, rhs: &ReducedVector) -> Result<ReducedVector> {
    geom.grid().check_len(rhs.len())?;
    let vs = VectorSolver::new(geom.clone(), CoupledOptions::default().kernel_tol)?;
    Ok(ReducedVector::from(vs.solve(&rhs.values)))
}

/// Residual norms of a candidate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub lich: f64,
    pub vector: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.lich.max(self.vector)
    }
}

/// Precomputed discrete coupled system for one seed.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    seed: SeedData,
    m: Vec<f64>,
    dm: Vec<f64>,
    /// Frame components of σ: x first, then one per fibre group.
    sigma: Vec<Vec<f64>>,
    /// 2Σ(off-diagonal frame components)².
    sigma_off_sq: Vec<f64>,
    l_alpha: Vec<f64>,
    l_beta: Vec<Vec<f64>>,
    mult: Vec<f64>,
    vs: VectorSolver,
    pub opts: CoupledOptions,
}

impl CoupledSystem {
    pub fn new(seed: &SeedData, opts: CoupledOptions) -> Result<CoupledSystem> {
        seed.validate()?;
        let geom = &seed.geom;
        let vs = VectorSolver::new(geom.clone(), opts.kernel_tol)?;
        if !geom.curvature_positive() {
            return Err(Error::InvalidState(format!(
                "coupled solves need min R > 0 (got {:.3e})",
                geom.scalar_curvature().min()
            )));
        }
        let m = seed.mean_curvature().values;
        let dm = geom.grid().diff(&m);
        let frame = seed.sigma.frame(geom);
        let mut sigma = vec![frame.u.clone()];
        sigma.extend(frame.v.iter().cloned());
        let n = geom.len();
        let sigma_off_sq =
            (0..n).map(|i| frame.off.iter().flatten().map(|o| 2.0 * o[i] * o[i]).sum::<f64>()).collect();
        let d = geom.derived();
        let (l_alpha, l_beta) = crate::geometry::l_coefficients(geom, &d.dln_a, &d.dln_b);
        Ok(CoupledSystem { seed: seed.clone(), m, dm, sigma, sigma_off_sq, l_alpha, l_beta, mult: multiplicities(geom), vs, opts })
    }

    pub fn seed(&self) -> &SeedData {
        &self.seed
    }

    pub fn geom(&self) -> &Arc<ReducedGeometry> {
        &self.seed.geom
    }

    pub fn mean_curvature(&self) -> &[f64] {
        &self.m
    }

    pub fn vector_solver(&self) -> &VectorSolver {
        &self.vs
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// |σ+LW|² pointwise (collocated L).
    pub fn w_sq(&self, w: &[f64]) -> Vec<f64> {
        let lam = l_frame(&self.seed.geom, w);
        (0..w.len())
            .map(|i| {
                self.sigma_off_sq[i]
                    + (0..self.mult.len()).map(|a| self.mult[a] * (self.sigma[a][i] + lam[a][i]).powi(2)).sum::<f64>()
            })
            .collect()
    }

    /// W solving the vector equation for the given φ.
    pub fn solve_w(&self, phi: &[f64]) -> Vec<f64> {
        let alpha = self.seed.geom.alpha();
        let big_n = self.seed.geom.n_exp();
        let rhs: Vec<f64> = phi.iter().zip(&self.dm).map(|(p, d)| alpha * p.powf(big_n) * d).collect();
        self.vs.solve(&rhs)
    }

    /// Pointwise residuals (divided by vol) and their scales.
    fn pointwise(&self, phi: &[f64], w: &[f64], kappa: f64) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let g = &self.seed.geom;
        let n = phi.len();
        let c = g.c_n();
        let big_n = g.n_exp();
        let alpha = g.alpha();
        let vol = &g.vol().values;
        let r = &g.scalar_curvature().values;
        let kphi = g.laplacian_stiffness().matvec(phi);
        let sw = g.vector_stiffness().matvec(w);
        let w2 = self.w_sq(w);
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; n];
        let (mut s1, mut s2a, mut s2b) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            let p = phi[i];
            let t = [
                c * kphi[i] / vol[i],
                r[i] * p,
                alpha * self.m[i] * self.m[i] * p.powf(big_n - 1.0),
                -(w2[i] + kappa) * p.powf(-big_n - 1.0),
            ];
            f1[i] = t.iter().sum();
            s1 = s1.max(t.iter().map(|x| x.abs()).sum());
            let lhs = sw[i] / vol[i];
            let src = alpha * p.powf(big_n) * self.dm[i];
            f2[i] = lhs + src;
            s2a = s2a.max(lhs.abs());
            s2b = s2b.max(src.abs());
        }
        (f1, f2, s1, s2a + s2b)
    }

    /// Relative sup-norm residuals of both equations at w² = |σ+LW|² + κ.
    pub fn residuals(&self, phi: &[f64], w: &[f64], kappa: f64) -> Residuals {
        let (f1, f2, s1, s2) = self.pointwise(phi, w, kappa);
        let rel = |f: &[f64], s: f64| if s > 0.0 { sup_abs(f) / s } else { sup_abs(f) };
        Residuals { lich: rel(&f1, s1), vector: rel(&f2, s2) }
    }

    /// Interleaved (φ_0, W_0, φ_1, W_1, …) vol-weighted residual.
    pub(crate) fn eval(&self, y: &[f64], kappa: f64) -> Vec<f64> {
        let (phi, w) = split(y);
        let (f1, f2, _, _) = self.pointwise(&phi, &w, kappa);
        let vol = &self.seed.geom.vol().values;
        let mut out = vec![0.0; y.len()];
        for i in 0..phi.len() {
            out[2 * i] = f1[i] * vol[i];
            out[2 * i + 1] = f2[i] * vol[i];
        }
        out
    }

    /// Scaled merit max(‖F1‖/s1, ‖F2‖/s2) with fixed scales.
    fn merit(&self, y: &[f64], kappa: f64, s1: f64, s2: f64) -> f64 {
        let (phi, w) = split(y);
        let (f1, f2, _, _) = self.pointwise(&phi, &w, kappa);
        (sup_abs(&f1) / s1).max(sup_abs(&f2) / s2)
    }

    fn scales(&self, y: &[f64], kappa: f64) -> (f64, f64) {
        let (phi, w) = split(y);
        let (_, _, s1, s2) = self.pointwise(&phi, &w, kappa);
        (s1.max(f64::MIN_POSITIVE), if s2 > 0.0 { s2 } else { 1.0 })
    }

    /// Interleaved Jacobian of `eval` and ∂/∂κ.
    pub(crate) fn jacobian(&self, y: &[f64], kappa: f64) -> (CyclicBanded, Vec<f64>) {
        let g = &self.seed.geom;
        let grid = g.grid();
        let (phi, w) = split(y);
        let n = phi.len();
        let k = g.laplacian_stiffness();
        let s = g.vector_stiffness();
        let stencil = grid.centered_stencil();
        let hd = stencil.iter().map(|(o, _)| o.unsigned_abs()).max().unwrap_or(1);
        let hb = (2 * k.lower()).max(2 * s.lower()).max(2 * hd + 1);
        let mut jac = CyclicBanded::zeros(2 * n, hb, hb);
        let c = g.c_n();
        let big_n = g.n_exp();
        let alpha = g.alpha();
        let vol = &g.vol().values;
        let r = &g.scalar_curvature().values;
        let h = grid.spacing();
        let w2 = self.w_sq(&w);
        let lam = l_frame(g, &w);
        let mut fk = vec![0.0; 2 * n];
        for i in 0..n {
            let p = phi[i];
            for (j, v) in k.row(i) {
                jac.add(2 * i, 2 * j, c * v);
            }
            let q = p.powf(-big_n - 2.0);
            jac.add(
                2 * i,
                2 * i,
                vol[i] * (r[i] + alpha * (big_n - 1.0) * self.m[i] * self.m[i] * p.powf(big_n - 2.0) + (big_n + 1.0) * (w2[i] + kappa) * q),
            );
            let pre = -vol[i] * p.powf(-big_n - 1.0);
            fk[2 * i] = pre;
            // ∂w²_i/∂W_j = Σ_a 2 mult_a (σ_a+λ_a)_i (α_a D_ij + β_a,i δ_ij)
            let mut diag = 0.0;
            let mut dcoef = 0.0;
            for a in 0..self.mult.len() {
                let e = 2.0 * self.mult[a] * (self.sigma[a][i] + lam[a][i]);
                diag += e * self.l_beta[a][i];
                dcoef += e * self.l_alpha[a];
            }
            jac.add(2 * i, 2 * i + 1, pre * diag);
            for &(o, cf) in stencil {
                let j = grid.wrap(i, o);
                jac.add(2 * i, 2 * j + 1, pre * dcoef * cf / h);
            }
            jac.add(2 * i + 1, 2 * i, vol[i] * alpha * big_n * p.powf(big_n - 1.0) * self.dm[i]);
            for (j, v) in s.row(i) {
                jac.add(2 * i + 1, 2 * j + 1, v);
            }
        }
        (jac, fk)
    }

    /// Damped Newton on the coupled system at fixed κ = k².
    pub fn newton(&self, start: &CoupledState, kappa: f64, tol: f64, max_iter: usize) -> Result<(CoupledState, usize)> {
        let mut y = interleave(&start.phi.values, &start.w.values);
        let mut history = Vec::new();
        for it in 0..=max_iter {
            let (phi, w) = split(&y);
            let res = self.residuals(&phi, &w, kappa).max();
            history.push(res);
            if res <= tol {
                return Ok((CoupledState { phi: phi.into(), w: w.into() }, it));
            }
            if it == max_iter || !res.is_finite() {
                break;
            }
            let (s1, s2) = self.scales(&y, kappa);
            let m0 = self.merit(&y, kappa, s1, s2);
            let f = self.eval(&y, kappa);
            let (jac, _) = self.jacobian(&y, kappa);
            let lu = jac.factor()?;
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let dy = lu.solve_refined(&jac, &rhs);
            let mut lam = 1.0;
            let mut accepted = false;
            while lam >= 1e-8 {
                let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + lam * b).collect();
                if (0..trial.len()).step_by(2).all(|i| trial[i] > 0.0) {
                    let mt = self.merit(&trial, kappa, s1, s2);
                    if mt < (1.0 - 1e-4 * lam) * m0 {
                        y = trial;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                return Err(Error::solve(format!("coupled Newton line search stalled at κ = {kappa:.6e}"), history));
            }
        }
        Err(Error::solve(format!("coupled Newton did not converge at κ = {kappa:.6e}"), history))
    }

    /// Alternating vector/Lichnerowicz iteration with geometric damping.
    pub fn picard(&self, phi_init: &ScalarField, kappa: f64) -> Result<(CoupledState, usize)> {
        let g = &self.seed.geom;
        g.grid().check_len(phi_init.len())?;
        if !(phi_init.min() > 0.0) {
            return Err(Error::InvalidState("φ_init must be positive".into()));
        }
        let theta = self.opts.damping;
        let mut phi = phi_init.values.clone();
        let mut history = Vec::new();
        let m = ScalarField::from(self.m.clone());
        for it in 0..=self.opts.max_picard {
            let w = self.solve_w(&phi);
            let res = self.residuals(&phi, &w, kappa);
            history.push(res.max());
            if res.max() <= self.opts.tol {
                return Ok((CoupledState { phi: phi.into(), w: w.into() }, it));
            }
            if it == self.opts.max_picard || !res.max().is_finite() {
                break;
            }
            let w2: Vec<f64> = self.w_sq(&w).iter().map(|v| v + kappa).collect();
            let prob = LichProblem::from_w_sq(g.clone(), m.clone(), ScalarField::from(w2), 1.0)?;
            let sol = lichnerowicz::solve_with(
                &prob,
                Some(&ScalarField::from(phi.clone())),
                SolveOptions { tol: 1e-13, max_iter: 200 },
            )
            .map_err(|e| match e {
                Error::SolveFailure { reason, .. } => Error::solve(format!("inner Lichnerowicz solve: {reason}"), history.clone()),
                e => e,
            })?;
            for (p, q) in phi.iter_mut().zip(&sol.phi.values) {
                *p = p.powf(1.0 - theta) * q.powf(theta);
            }
        }
        Err(Error::solve("Picard iteration did not converge", history))
    }

    pub fn report(&self, state: CoupledState, kappa: f64, iterations: usize, branch: Branch) -> SolveReport {
        let res = self.residuals(&state.phi.values, &state.w.values, kappa);
        SolveReport {
            sup_phi: state.phi.sup(),
            phi: state.phi,
            w: state.w,
            res_lich: res.lich,
            res_vector: res.vector,
            iterations,
            branch,
            k: signed_sqrt(kappa),
        }
    }
}

/// k with sign(κ)√|κ|, so returns past k = 0 stay visible.
pub(crate) fn signed_sqrt(kappa: f64) -> f64 {
    kappa.signum() * kappa.abs().sqrt()
}

pub(crate) fn interleave(phi: &[f64], w: &[f64]) -> Vec<f64> {
    phi.iter().zip(w).flat_map(|(p, w)| [*p, *w]).collect()
}

pub(crate) fn split(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (y.iter().step_by(2).cloned().collect(), y.iter().skip(1).step_by(2).cloned().collect())
}

/// Picard from `phi_init` followed by a Newton polish.
pub fn picard_solve(seed: &SeedData, phi_init: &ScalarField) -> Result<SolveReport> {
    picard_solve_with(seed, phi_init, CoupledOptions::default())
}

pub fn picard_solve_with(seed: &SeedData, phi_init: &ScalarField, opts: CoupledOptions) -> Result<SolveReport> {
    let sys = CoupledSystem::new(seed, opts)?;
    let kappa = seed.k * seed.k;
    let (state, it) = sys.picard(phi_init, kappa)?;
    let (state, it2) = match sys.newton(&state, kappa, opts.newton_tol, opts.max_newton) {
        Ok(r) => r,
        Err(_) => (state, 0),
    };
    let branch = if seed.k > 0.0 { Branch::Deformed(seed.k) } else { Branch::Small };
    Ok(sys.report(state, kappa, it + it2, branch))
}

/// Residuals recomputed through the matrix-free operators and the
/// covariant tensor norm, independent of the assembled system.
pub fn certify(seed: &SeedData, phi: &ScalarField, w: &ReducedVector) -> Result<Residuals> {
    use crate::geometry::{apply_l, half_vector_laplacian, laplacian_apply};
    let g = &seed.geom;
    g.grid().check_len(phi.len())?;
    g.grid().check_len(w.len())?;
    let lap = laplacian_apply(g, phi)?;
    let lw = apply_l(g, w)?;
    let total = {
        let s = seed.sigma.tensor();
        let mut t = lw.clone();
        for (a, b) in t.xx.iter_mut().zip(&s.xx) {
            *a += b;
        }
        for (f, sf) in t.fibre.iter_mut().zip(&s.fibre) {
            for (a, b) in f.iter_mut().zip(sf) {
                *a += b;
            }
        }
        for (o, so) in t.off.iter_mut().zip(&s.off) {
            if let (Some(o), Some(so)) = (o.as_mut(), so.as_ref()) {
                for (a, b) in o.iter_mut().zip(so) {
                    *a += b;
                }
            }
        }
        t
    };
    let w2 = total.norm_sq(g);
    let hv = half_vector_laplacian(g, w)?;
    let mc = seed.mean_curvature();
    let dm = g.grid().diff(&mc.values);
    let (c, big_n, alpha) = (g.c_n(), g.n_exp(), g.alpha());
    let r = g.scalar_curvature();
    let kappa = seed.k * seed.k;
    let (mut e1, mut s1, mut e2, mut s2a, mut s2b) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..phi.len() {
        let p = phi[i];
        let t = [c * lap[i], r[i] * p, alpha * mc[i] * mc[i] * p.powf(big_n - 1.0), -(w2[i] + kappa) / p.powf(big_n + 1.0)];
        e1 = e1.max(t.iter().sum::<f64>().abs());
        s1 = s1.max(t.iter().map(|x| x.abs()).sum());
        let src = alpha * p.powf(big_n) * dm[i];
        e2 = e2.max((hv[i] + src).abs());
        s2a = s2a.max(hv[i].abs());
        s2b = s2b.max(src.abs());
    }
    let s2 = s2a + s2b;
    Ok(Residuals { lich: e1 / s1, vector: if s2 > 0.0 { e2 / s2 } else { e2 } })
}
