//! Finite-dimensional fixed-point dichotomy: S-map, T-associations, the
//! critical-tuple search and sampled half-continuity witnesses.

mod gallery;

pub use gallery::{gallery, gallery_names, linear, quadratic, schaefer, step_map, GalleryEntry};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::DenseLu;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

pub type MapFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// Row-major d × (1 + d) Jacobian of T with respect to (t, x).
pub type JacobianFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
pub type ConstraintFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// T : [0,1] × ℝ^d → ℝ^d.
#[derive(Clone)]
pub struct ParamMap {
    pub dim: usize,
    eval: MapFn,
    jacobian: Option<JacobianFn>,
}

impl fmt::Debug for ParamMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamMap").field("dim", &self.dim).field("jacobian", &self.jacobian.is_some()).finish()
    }
}

impl ParamMap {
    pub fn new(dim: usize, eval: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        ParamMap { dim, eval: Arc::new(eval), jacobian: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (self.eval)(t, x)
    }

    /// ∂T/∂(t, x), analytic when supplied, else forward differences.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> Vec<f64> {
        if let Some(j) = &self.jacobian {
            return j(t, x);
        }
        let d = self.dim;
        let base = self.eval(t, x);
        let mut jac = vec![0.0; d * (d + 1)];
        let ht = fd_step(t);
        let col = self.eval(t + ht, x);
        for r in 0..d {
            jac[r * (d + 1)] = (col[r] - base[r]) / ht;
        }
        let mut xp = x.to_vec();
        for c in 0..d {
            let h = fd_step(x[c]);
            xp[c] = x[c] + h;
            let col = self.eval(t, &xp);
            xp[c] = x[c];
            for r in 0..d {
                jac[r * (d + 1) + c + 1] = (col[r] - base[r]) / h;
            }
        }
        jac
    }
}

fn fd_step(v: f64) -> f64 {
    1e-7 * (1.0 + v.abs())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A map T with constraints F_1..F_l and the probe settings used to certify
/// boundedness of T over {F_i ≤ 0}.
#[derive(Clone)]
pub struct TAssociation {
    pub map: ParamMap,
    pub constraints: Vec<ConstraintFn>,
    /// Half-width of the smallest probe box in x.
    pub probe_radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl fmt::Debug for TAssociation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TAssociation")
            .field("map", &self.map)
            .field("constraints", &self.constraints.len())
            .field("probe_radius", &self.probe_radius)
            .field("samples", &self.samples)
            .field("seed", &self.seed)
            .finish()
    }
}

impl TAssociation {
    pub fn new(map: ParamMap, probe_radius: f64) -> Self {
        TAssociation { map, constraints: Vec::new(), probe_radius, samples: 20_000, seed: 0 }
    }

    pub fn constraint(mut self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.constraints.push(Arc::new(f));
        self
    }

    pub fn with_samples(mut self, samples: usize, seed: u64) -> Self {
        self.samples = samples;
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.map.dim
    }

    pub fn constraint_values(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|f| f(t, x)).collect()
    }

    fn feasible(&self, t: f64, x: &[f64]) -> bool {
        self.constraints.iter().all(|f| f(t, x) <= 0.0)
    }
}

/// S(t, x) = (1, T(t, x)) if every F_i(t, x) ≤ 0, else (0, 0).
pub fn smap_eval(assoc: &TAssociation, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
    if assoc.feasible(t, x) {
        (1.0, assoc.map.eval(t, x))
    } else {
        (0.0, vec![0.0; assoc.dim()])
    }
}

/// Sampled boundedness certificate: sup ‖T‖ over the sublevel set per box.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Bound C on ‖T(t, x)‖ over {F_i ≤ 0}.
    pub bound: f64,
    /// Box half-widths probed, smallest first.
    pub radii: Vec<f64>,
    /// Sup ‖T‖ seen inside each box.
    pub sups: Vec<f64>,
    pub samples: usize,
    pub feasible_samples: usize,
}

const PROBE_LEVELS: usize = 4;
const GROWTH: f64 = 1.5;
const MIN_SAMPLES: usize = 10_000;

/// Verifies F_i(0,0) < 0 and probes boundedness over nested boxes of doubling
/// radius; the near-boundary samples are refined by bisection along rays.
pub fn check_association(assoc: &TAssociation) -> Result<Certificate> {
    check_association_with(assoc, Execution::default())
}

pub fn check_association_with(assoc: &TAssociation, exec: Execution) -> Result<Certificate> {
    let d = assoc.dim();
    if assoc.samples < MIN_SAMPLES {
        return Err(Error::InvalidState(format!("probe budget {} below {MIN_SAMPLES}", assoc.samples)));
    }
    if !(assoc.probe_radius > 0.0) {
        return Err(Error::InvalidState("probe radius must be positive".into()));
    }
    let origin = vec![0.0; d];
    for (i, f) in assoc.constraints.iter().enumerate() {
        let v = f(0.0, &origin);
        if !(v < 0.0) {
            return Err(Error::NotAssociation {
                reason: format!("F_{} (0, 0) = {v} is not negative", i + 1),
                witness: Some((0.0, origin)),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(assoc.seed);
    let per_level = assoc.samples / PROBE_LEVELS;
    let mut radii = Vec::new();
    let mut sups = Vec::new();
    let mut feasible_total = 0;
    let mut witness = (0.0, origin.clone());
    for level in 0..PROBE_LEVELS {
        let r = assoc.probe_radius * 2f64.powi(level as i32);
        let pts: Vec<(f64, Vec<f64>)> =
            (0..per_level).map(|_| (rng.gen::<f64>(), (0..d).map(|_| rng.gen_range(-r..=r)).collect())).collect();
        let vals: Vec<Option<f64>> = exec.map(&pts, |(t, x)| assoc.feasible(*t, x).then(|| norm(&assoc.map.eval(*t, x))));
        let mut sup = norm(&assoc.map.eval(0.0, &origin));
        let mut best = (0.0, origin.clone());
        let mut ranked: Vec<(f64, usize)> = Vec::new();
        for (k, v) in vals.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::NotAssociation {
                        reason: "T is not finite on the sublevel set".into(),
                        witness: Some(pts[k].clone()),
                    });
                }
                feasible_total += 1;
                ranked.push((*v, k));
                if *v > sup {
                    sup = *v;
                    best = pts[k].clone();
                }
            }
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let top: Vec<usize> = ranked.iter().take(16).map(|p| p.1).collect();
        let refined: Vec<Option<(f64, Vec<f64>, f64)>> = exec.map(&top, |&k| ray_refine(assoc, &pts[k], r));
        for (t, x, v) in refined.into_iter().flatten() {
            if v > sup {
                sup = v;
                best = (t, x);
            }
        }
        radii.push(r);
        sups.push(sup);
        witness = best;
    }
    let n = sups.len();
    if sups[n - 1] > GROWTH * sups[n - 2] {
        return Err(Error::NotAssociation {
            reason: format!("sup ‖T‖ grows from {:.6e} to {:.6e} across nested boxes", sups[n - 2], sups[n - 1]),
            witness: Some(witness),
        });
    }
    // The boxes are nested, so every level samples the same sublevel set.
    let bound = sups.iter().cloned().fold(0.0, f64::max);
    Ok(Certificate { bound, radii, sups, samples: per_level * PROBE_LEVELS, feasible_samples: feasible_total })
}

/// Pushes a feasible sample outward along its ray to the sublevel boundary
/// or the box edge and returns the point with ‖T‖ there.
fn ray_refine(assoc: &TAssociation, p: &(f64, Vec<f64>), r: f64) -> Option<(f64, Vec<f64>, f64)> {
    let (t, x) = p;
    let s0 = norm(x);
    if s0 == 0.0 {
        return None;
    }
    let u: Vec<f64> = x.iter().map(|v| v / s0).collect();
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s_box = r / umax;
    let at = |s: f64| -> Vec<f64> { u.iter().map(|v| v * s).collect() };
    let s = if assoc.feasible(*t, &at(s_box)) {
        s_box
    } else {
        let (mut lo, mut hi) = (s0, s_box);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if assoc.feasible(*t, &at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let xs = at(s);
    let v = norm(&assoc.map.eval(*t, &xs));
    v.is_finite().then_some((*t, xs, v))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// x* = T(1, x*).
    FixedPoint(Vec<f64>),
    /// x = tT(t, x) with F_active(t, x) = 0.
    CriticalTuple { t: f64, x: Vec<f64>, active: usize },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyResult {
    pub outcome: Outcome,
    /// ‖T(1,x*) − x*‖ or ‖x − tT(t,x)‖; NaN when inconclusive.
    pub residual: f64,
    /// F_i at the returned point.
    pub constraint_values: Vec<f64>,
    /// 1 or 2, whichever phase produced the outcome (0 if inconclusive).
    pub phase: u8,
    pub starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub tol: f64,
    pub starts: usize,
    pub max_newton: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { tol: 1e-8, starts: 64, max_newton: 60, seed: 0, exec: Execution::default() }
    }
}

/// Damped Newton on G(z) = 0 with a dense Jacobian; returns z and ‖G(z)‖.
fn newton(
    g: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    jac: &dyn Fn(&[f64]) -> Vec<f64>,
    mut z: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<(Vec<f64>, f64)> {
    let m = z.len();
    let mut r = g(&z)?;
    let mut rn = norm(&r);
    for _ in 0..max_iter {
        if rn <= 0.1 * tol {
            break;
        }
        let j = jac(&z);
        let lu = DenseLu::factor(m, &j, 1e-14).ok()?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dz = lu.solve(&neg);
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let zn: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + lam * b).collect();
            if let Some(rr) = g(&zn) {
                let nn = norm(&rr);
                if nn.is_finite() && nn < rn {
                    z = zn;
                    r = rr;
                    rn = nn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (rn <= tol).then_some((z, rn))
}

fn pick_best<T>(found: Vec<Option<(f64, T)>>) -> Option<(usize, f64, T)> {
    let mut best: Option<(usize, f64, T)> = None;
    for (i, f) in found.into_iter().enumerate() {
        if let Some((res, v)) = f {
            if best.as_ref().map_or(true, |b| res < b.1) {
                best = Some((i, res, v));
            }
        }
    }
    best
}

/// Phase 1: a fixed point of T(1, ·) by multistart Newton over the
/// certificate ball. Phase 2, only if that fails: x = tT(t, x) paired with
/// each F_i = 0, keeping t ∈ [0,1] and every F_j ≤ tol.
pub fn dichotomy_search(assoc: &TAssociation, cert: &Certificate, opts: SearchOptions) -> DichotomyResult {
    let d = assoc.dim();
    let radius = cert.bound.max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = opts.starts.max(2);
    let mut x_starts: Vec<Vec<f64>> = vec![vec![0.0; d], assoc.map.eval(1.0, &vec![0.0; d])];
    while x_starts.len() < starts {
        x_starts.push((0..d).map(|_| rng.gen_range(-radius..=radius)).collect());
    }
    let map = &assoc.map;
    let g1 = |x: &[f64]| -> Option<Vec<f64>> {
        let tx = map.eval(1.0, x);
        let r: Vec<f64> = x.iter().zip(&tx).map(|(a, b)| a - b).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let j1 = |x: &[f64]| -> Vec<f64> {
        let jt = map.jacobian(1.0, x);
        let mut j = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                j[r * d + c] = if r == c { 1.0 } else { 0.0 } - jt[r * (d + 1) + c + 1];
            }
        }
        j
    };
    let found = opts.exec.map(&x_starts, |x0| newton(&g1, &j1, x0.clone(), opts.tol, opts.max_newton).map(|(x, r)| (r, x)));
    if let Some((_, res, x)) = pick_best(found) {
        return DichotomyResult {
            constraint_values: assoc.constraint_values(1.0, &x),
            outcome: Outcome::FixedPoint(x),
            residual: res,
            phase: 1,
            starts,
        };
    }
    let mut z_starts: Vec<(usize, Vec<f64>)> = Vec::new();
    for i in 0..assoc.constraints.len() {
        for k in 0..starts {
            let mut z = vec![(k as f64 + 0.5) / starts as f64];
            z.extend((0..d).map(|_| rng.gen_range(-radius..=radius)));
            z_starts.push((i, z));
        }
    }
    let found = opts.exec.map(&z_starts, |(i, z0)| {
        let f = &assoc.constraints[*i];
        let g2 = |z: &[f64]| -> Option<Vec<f64>> {
            let (t, x) = (z[0], &z[1..]);
            let tx = map.eval(t, x);
            let mut r: Vec<f64> = x.iter().zip(&tx).map(|(a, b)| a - t * b).collect();
            r.push(f(t, x));
            r.iter().all(|v| v.is_finite()).then_some(r)
        };
        let j2 = |z: &[f64]| -> Vec<f64> {
            let (t, x) = (z[0], &z[1..]);
            let m = d + 1;
            let tx = map.eval(t, x);
            let jt = map.jacobian(t, x);
            let mut j = vec![0.0; m * m];
            // Unknown order (t, x_1..x_d); rows x − tT then F.
            for r in 0..d {
                j[r * m] = -tx[r] - t * jt[r * m];
                for c in 0..d {
                    j[r * m + c + 1] = if r == c { 1.0 } else { 0.0 } - t * jt[r * m + c + 1];
                }
            }
            let f0 = f(t, x);
            let ht = fd_step(t);
            j[d * m] = (f(t + ht, x) - f0) / ht;
            let mut xp = x.to_vec();
            for c in 0..d {
                let h = fd_step(x[c]);
                xp[c] = x[c] + h;
                j[d * m + c + 1] = (f(t, &xp) - f0) / h;
                xp[c] = x[c];
            }
            j
        };
        let (z, _) = newton(&g2, &j2, z0.clone(), opts.tol, opts.max_newton)?;
        let (t, x) = (z[0], z[1..].to_vec());
        if !(0.0..=1.0).contains(&t) {
            return None;
        }
        let fv = assoc.constraint_values(t, &x);
        if fv.iter().any(|v| *v > opts.tol) || fv[*i].abs() > opts.tol {
            return None;
        }
        let tx = map.eval(t, &x);
        let res = norm(&x.iter().zip(&tx).map(|(a, b)| a - t * b).collect::<Vec<f64>>());
        (res <= opts.tol).then_some((res, (t, x, *i, fv)))
    });
    match pick_best(found) {
        Some((_, res, (t, x, active, fv))) => DichotomyResult {
            outcome: Outcome::CriticalTuple { t, x, active },
            residual: res,
            constraint_values: fv,
            phase: 2,
            starts: z_starts.len(),
        },
        None => DichotomyResult {
            outcome: Outcome::Inconclusive,
            residual: f64::NAN,
            constraint_values: Vec::new(),
            phase: 0,
            starts: starts + z_starts.len(),
        },
    }
}

/// Direction p and cube half-width r with ⟨p, f(y) − y⟩ > 0 at every sampled
/// non-fixed y in the cube around x.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub p: Vec<f64>,
    pub radius: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessOptions {
    pub samples: usize,
    pub random_directions: usize,
    pub radius: f64,
    pub halvings: usize,
    pub seed: u64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions { samples: 2000, random_directions: 16, radius: 0.5, halvings: 20, seed: 0 }
    }
}

pub fn half_continuity_witness(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    opts: WitnessOptions,
) -> Result<Witness> {
    let d = x.len();
    let fx = f(x);
    let disp: Vec<f64> = fx.iter().zip(x).map(|(a, b)| a - b).collect();
    let dn = norm(&disp);
    if dn == 0.0 {
        return Err(Error::Precondition("x is a fixed point of f".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dirs: Vec<Vec<f64>> = vec![disp.iter().map(|v| v / dn).collect()];
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            dirs.push(e);
        }
    }
    while dirs.len() < 1 + 2 * d + opts.random_directions {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 {
            dirs.push(v.iter().map(|c| c / n).collect());
        }
    }
    let mut r = opts.radius;
    for _ in 0..=opts.halvings {
        let mut ys: Vec<Vec<f64>> = vec![x.to_vec()];
        while ys.len() < opts.samples {
            ys.push(x.iter().map(|c| c + rng.gen_range(-r..=r)).collect());
        }
        let moves: Vec<Vec<f64>> = ys
            .iter()
            .map(|y| f(y).iter().zip(y).map(|(a, b)| a - b).collect())
            .filter(|m: &Vec<f64>| m.iter().any(|v| *v != 0.0))
            .collect();
        for p in &dirs {
            if moves.iter().all(|m| m.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() > 0.0) {
                return Ok(Witness { p: p.clone(), radius: r, samples: ys.len() });
            }
        }
        r *= 0.5;
    }
    Err(Error::NoWitness)
}
