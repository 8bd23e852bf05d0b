//! One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.

use conflab::coupled::*;
use conflab::elliptic::ConformalTransform;
use conflab::exec::Execution;
use conflab::fixtures::{bundled_geometry, bundled_seed};
use conflab::geometry::{apply_l, half_vector_laplacian, Fibre};
use conflab::halfcont::*;
use conflab::lichnerowicz::{self, LichProblem, SolveOptions};
use conflab::{Error, Grid, Order, ReducedGeometry, ReducedVector, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<T>(r: conflab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// S¹ × S²(√2): n = 3 with R ≡ 1.
fn r_one(n: usize, order: Order) -> Arc<ReducedGeometry> {
    let grid = Grid::periodic(n, order).unwrap();
    Arc::new(
        ReducedGeometry::new(grid, ScalarField::constant(n, 1.0), vec![Fibre::sphere(2, ScalarField::constant(n, 2f64.sqrt()))])
            .unwrap(),
    )
}

/// Positive trigonometric field with a few random modes.
fn random_positive(grid: &Grid, rng: &mut ChaCha8Rng, mean: f64, amp: f64) -> ScalarField {
    let modes: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let v = grid.sample(|x| {
        let s: f64 =
            modes.iter().enumerate().map(|(m, (a, b))| (a * ((m + 1) as f64 * x).cos() + b * ((m + 1) as f64 * x).sin()) / (m + 1) as f64).sum();
        mean * (amp * s / 2.1).exp()
    });
    ScalarField::from(v)
}

fn slope(ns: &[usize], errs: &[f64]) -> f64 {
    let m = ns.len();
    ((errs[0] / errs[m - 1]).ln()) / ((ns[m - 1] as f64 / ns[0] as f64).ln())
}

/// Scalar root of φ + cφ⁵ − φ⁻⁷ by bisection.
fn scalar_root(c: f64) -> f64 {
    let f = |p: f64| p + c * p.powi(5) - p.powi(-7);
    let (mut lo, mut hi) = (0.1, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1() -> Verdict {
    let n = 256;
    let g = r_one(n, Order::Four);
    let mut worst = 0.0f64;
    let start = Instant::now();
    for c in [0.0f64, 1.0] {
        // (n−1)/n·τ²t = c with t = 1.
        let tau = (1.5 * c).sqrt();
        let p = e2s(LichProblem::new(g.clone(), ScalarField::constant(n, tau), &ScalarField::constant(n, 1.0), 1.0))?;
        let s = e2s(lichnerowicz::solve(&p, None))?;
        let root = scalar_root(c);
        worst = worst.max(s.phi.values.iter().fold(0.0f64, |m, v| m.max((v - root).abs())));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-10, format!("sup error {worst:.3e} > 1e-10"))?;
    ensure(secs < 1.0, format!("runtime {secs:.3} s"))?;
    Ok(format!("sup error {worst:.2e}, {secs:.3} s"))
}

fn covariance_error(n: usize, order: Order) -> Result<f64, String> {
    let g = r_one(n, order);
    let grid = g.grid().clone();
    let tau = ScalarField::from(grid.sample(|x| 0.6 + 0.2 * x.sin()));
    let w = ScalarField::from(grid.sample(|x| 1.0 + 0.3 * (2.0 * x).cos()));
    let p = e2s(LichProblem::new(g, tau, &w, 1.0))?;
    let th = e2s(ConformalTransform::new(ScalarField::from(grid.sample(|x| 1.0 + 0.3 * x.cos()))))?;
    Ok(e2s(lichnerowicz::conformal_covariance_check(&p, &th))?.relative_error)
}

fn c2() -> Verdict {
    let e256 = covariance_error(256, Order::Four)?;
    ensure(e256 <= 1e-6, format!("error {e256:.3e} at 256"))?;
    let mut notes = vec![format!("error {e256:.2e} at 256")];
    for order in [Order::Two, Order::Four] {
        let ns = [32, 64, 128];
        let errs: Vec<f64> = ns.iter().map(|&n| covariance_error(n, order)).collect::<Result<_, _>>()?;
        let s = slope(&ns, &errs);
        let need = order.as_int() as f64 - 0.2;
        ensure(s >= need, format!("order {} slope {s:.2} < {need}", order.as_int()))?;
        notes.push(format!("slope {s:.2} (order {})", order.as_int()));
    }
    Ok(notes.join(", "))
}

fn c3() -> Verdict {
    let g = Arc::new(e2s(bundled_geometry(128, Order::Four))?);
    let grid = g.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = Vec::new();
    for k in 0..100 {
        let tau = random_positive(&grid, &mut rng, 0.5, 1.0);
        let w0 = random_positive(&grid, &mut rng, 1.0, 1.5);
        let bump = random_positive(&grid, &mut rng, 0.3, 2.0);
        let strict = k % 2 == 1;
        let w0_sq = w0.map(|v| v * v);
        // Nonnegative increment that vanishes where the bump is below its mean.
        let inc = bump.map(|b| (b - 0.3).max(0.0));
        let w1_sq = w0_sq.zip_map(&inc, |a, b| a + b + if strict { 0.1 } else { 0.0 });
        cases.push((tau, w0_sq, w1_sq, strict));
    }
    let opts = SolveOptions { tol: 1e-12, max_iter: 200 };
    let results: Vec<Result<(f64, bool), String>> = Execution::Parallel.map(&cases, |(tau, w0, w1, strict)| {
        let p0 = e2s(LichProblem::from_w_sq(g.clone(), tau.clone(), w0.clone(), 1.0))?;
        let p1 = e2s(p0.with_w_sq(w1.clone()))?;
        let f0 = e2s(lichnerowicz::solve_with(&p0, None, opts))?.phi;
        let f1 = e2s(lichnerowicz::solve_with(&p1, None, opts))?.phi;
        let gap = f1.zip_map(&f0, |a, b| a - b).min();
        Ok((gap, *strict))
    });
    let mut worst_weak = f64::INFINITY;
    let mut worst_strict = f64::INFINITY;
    for r in results {
        let (gap, strict) = r?;
        if strict {
            worst_strict = worst_strict.min(gap);
        } else {
            worst_weak = worst_weak.min(gap);
        }
    }
    ensure(worst_weak >= -1e-10, format!("min(φ₁−φ₀) = {worst_weak:.3e}"))?;
    ensure(worst_strict > 0.0, format!("strict min(φ₁−φ₀) = {worst_strict:.3e}"))?;
    Ok(format!("100 pairs, weak min gap {worst_weak:.2e}, strict min gap {worst_strict:.2e}"))
}

fn c4() -> Verdict {
    let g = Arc::new(e2s(bundled_geometry(128, Order::Four))?);
    let grid = g.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut jobs = Vec::new();
    for _ in 0..20 {
        let tau = random_positive(&grid, &mut rng, 0.6, 1.2);
        let w = random_positive(&grid, &mut rng, 1.0, 1.5);
        let t = rng.gen_range(0.1..=1.0);
        let inits: Vec<ScalarField> =
            (0..10)
                .map(|_| {
                    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
                    random_positive(&grid, &mut rng, scale, 2.0)
                })
                .collect();
        jobs.push((tau, w, t, inits));
    }
    let opts = SolveOptions { tol: 1e-12, max_iter: 200 };
    let dists: Vec<Result<f64, String>> = Execution::Parallel.map(&jobs, |(tau, w, t, inits)| {
        let p = e2s(LichProblem::new(g.clone(), tau.clone(), w, *t))?;
        let sols: Vec<ScalarField> =
            inits.iter().map(|i| e2s(lichnerowicz::solve_with(&p, Some(i), opts)).map(|s| s.phi)).collect::<Result<_, _>>()?;
        let mut d = 0.0f64;
        for a in &sols {
            for b in &sols {
                d = d.max(a.zip_map(b, |x, y| x - y).sup());
            }
        }
        Ok(d)
    });
    let mut worst = 0.0f64;
    for d in dists {
        worst = worst.max(d?);
    }
    ensure(worst <= 1e-8, format!("pairwise sup distance {worst:.3e}"))?;
    Ok(format!("20 problems x 10 starts, max pairwise distance {worst:.2e}"))
}

fn c5() -> Verdict {
    let mut notes = Vec::new();
    for (name, g) in [("flat", ReducedGeometry::flat_torus(Grid::periodic(96, Order::Four).unwrap(), 3)), ("bundled", bundled_geometry(96, Order::Four))] {
        let g = e2s(g)?;
        let s = g.vector_stiffness().to_dense();
        let n = g.len();
        let big = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((s[i * n + j] - s[j * n + i]).abs());
            }
        }
        ensure(asym <= 1e-12 * big, format!("{name}: asymmetry {asym:.3e}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mass: Vec<f64> = g.vol().values.iter().zip(&g.profile_a().values).map(|(v, a)| v * a * a).collect();
        let mut min_rq = f64::INFINITY;
        for _ in 0..200 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sv = g.vector_stiffness().matvec(&v);
            let num: f64 = sv.iter().zip(&v).map(|(a, b)| a * b).sum();
            let den: f64 = v.iter().zip(&mass).map(|(a, m)| a * a * m).sum();
            min_rq = min_rq.min(num / den);
        }
        ensure(min_rq >= -1e-10, format!("{name}: Rayleigh quotient {min_rq:.3e}"))?;
        notes.push(format!("{name} asym {:.1e}", asym / big));
    }
    for order in [Order::Two, Order::Four] {
        let ns = [32, 64, 128];
        let mut e_norm = Vec::new();
        let mut e_lap = Vec::new();
        for &n in &ns {
            let grid = Grid::periodic(n, order).unwrap();
            let g = e2s(ReducedGeometry::flat_torus(grid.clone(), 3))?;
            let w = ReducedVector::from(grid.sample(f64::sin));
            let lw = e2s(apply_l(&g, &w))?;
            let nsq = lw.norm_sq(&g);
            let k = 4.0 * (1.0 - 1.0 / 3.0);
            e_norm.push((0..n).fold(0.0f64, |m, i| m.max((nsq[i] - k * grid.x(i).cos().powi(2)).abs())));
            let hv = e2s(half_vector_laplacian(&g, &w))?;
            // ½L*LW = −2(1−1/n)W″ = (4/3) sin x.
            e_lap.push((0..n).fold(0.0f64, |m, i| m.max((hv[i] - 2.0 * (1.0 - 1.0 / 3.0) * grid.x(i).sin()).abs())));
        }
        let need = order.as_int() as f64 - 0.2;
        let (s1, s2) = (slope(&ns, &e_norm), slope(&ns, &e_lap));
        ensure(s1 >= need && s2 >= need, format!("order {}: slopes {s1:.2}, {s2:.2}", order.as_int()))?;
        notes.push(format!("order {} slopes {s1:.2}/{s2:.2}", order.as_int()));
    }
    Ok(notes.join(", "))
}

fn c6() -> Verdict {
    let n = 64;
    let g = r_one(n, Order::Four);
    let p = e2s(LichProblem::new(g, ScalarField::constant(n, 1.5f64.sqrt()), &ScalarField::constant(n, 1.0), 1.0))?;
    let eps = [0.2, 0.1, 0.05, 0.025];
    let r = e2s(lichnerowicz::solution_map_derivative_check(&p, &ScalarField::constant(n, 1.0), &eps))?;
    let phi = scalar_root(1.0);
    let exact = 2.0 * phi.powi(-7) / (1.0 + 5.0 * phi.powi(4) + 7.0 * phi.powi(-8));
    let err = r.limit.iter().fold(0.0f64, |m, v| m.max((v - exact).abs()));
    ensure((r.slope - 2.0).abs() <= 0.3, format!("slope {:.3}", r.slope))?;
    ensure(err <= 1e-6, format!("limit error {err:.3e}"))?;
    Ok(format!("slope {:.3}, limit error {err:.2e}", r.slope))
}

fn c7() -> Verdict {
    let flat = e2s(ReducedGeometry::flat_torus(Grid::periodic(512, Order::Four).unwrap(), 3))?;
    let bad = ScalarField::from(flat.grid().sample(|x| (0.5 * x.cos()).exp()));
    let rf = e2s(compute_c(&flat, &bad, 0.1))?;
    ensure(rf.violated && rf.c_measured.is_infinite(), "exp(0.5 cos x) not VIOLATED on the flat reduction")?;
    let mut cs = Vec::new();
    for n in [512, 1024] {
        let seed = e2s(bundled_seed(n, Order::Four))?;
        let bad = ScalarField::from(seed.geom.grid().sample(|x| (0.5 * x.cos()).exp()));
        ensure(e2s(compute_c(&seed.geom, &bad, 0.1))?.violated, format!("exp(0.5 cos x) not VIOLATED at {n}"))?;
        let r = e2s(compute_c(&seed.geom, &seed.tau, 0.1))?;
        ensure(!r.violated && r.c_measured.is_finite(), format!("bundled τ not admissible at {n}"))?;
        let nd = r.n as f64;
        ensure(r.a_min == 0.5 * r.c_measured * (nd / (nd - 1.0)).sqrt(), "a_min does not recompute")?;
        cs.push(r.c_measured);
    }
    let rel = (cs[0] - cs[1]).abs() / cs[1];
    ensure(rel <= 0.05, format!("c moves {rel:.3e} between 512 and 1024"))?;
    Ok(format!("c = {:.5} / {:.5} (512/1024), relative change {rel:.1e}", cs[0], cs[1]))
}

fn c8() -> Verdict {
    let start = Instant::now();
    let seed = e2s(bundled_seed(256, Order::Four))?;
    let copts = CoupledOptions::default();
    let two = e2s(find_two_solutions(&seed, None, copts, ContinuationOptions::default()))?;
    let secs = start.elapsed().as_secs_f64();
    let fold = two.trace.fold.ok_or("no fold in the k-sweep")?;
    ensure(fold.k.is_finite() && fold.k > 0.0, "fold location not finite")?;
    for (name, r) in [("small", &two.small), ("large", &two.large)] {
        ensure(r.res_lich <= 1e-8 && r.res_vector <= 1e-8, format!("{name} residuals {:.2e}, {:.2e}", r.res_lich, r.res_vector))?;
    }
    ensure(two.certified_small.max() <= 2e-8 && two.certified_large.max() <= 2e-8, "independent residual check failed")?;
    ensure(two.gap >= 0.1, format!("gap {:.3e}", two.gap))?;
    ensure(secs < 300.0, format!("runtime {secs:.1} s"))?;
    Ok(format!(
        "fold at k* = {:.4e}, sup φ small {:.4} / large {:.4}, gap {:.2}, {secs:.1} s",
        fold.k, two.small.sup_phi, two.large.sup_phi, two.gap
    ))
}

fn c9() -> Verdict {
    let q = quadratic();
    let c = e2s(check_association(&q))?;
    let r = dichotomy_search(&q, &c, SearchOptions::default());
    match r.outcome {
        Outcome::CriticalTuple { t, ref x, .. } => {
            ensure((t - 0.4).abs() <= 1e-8 && (x[0] - 2.0).abs() <= 1e-8, format!("quadratic tuple ({t}, {})", x[0]))?
        }
        ref o => return Err(format!("quadratic: {o:?}")),
    }
    let l = linear();
    let c = e2s(check_association(&l))?;
    match dichotomy_search(&l, &c, SearchOptions::default()).outcome {
        Outcome::FixedPoint(x) => ensure((x[0] - 1.0).abs() <= 1e-10, format!("linear fixed point {}", x[0]))?,
        o => return Err(format!("linear: {o:?}")),
    }
    let mut worst = 0.0f64;
    for (a, d) in [(0.5, 1), (1.0, 2), (2.0, 3), (3.5, 2)] {
        let s = e2s(schaefer(a, d))?;
        let c = e2s(check_association(&s))?;
        match dichotomy_search(&s, &c, SearchOptions::default()).outcome {
            Outcome::CriticalTuple { x, .. } => worst = worst.max((x.iter().map(|v| v * v).sum::<f64>().sqrt() - a).abs()),
            o => return Err(format!("Schaefer a = {a}: {o:?}")),
        }
    }
    ensure(worst <= 1e-8, format!("Schaefer norm error {worst:.3e}"))?;
    let w = e2s(half_continuity_witness(&step_map, &[1.0], WitnessOptions::default()))?;
    ensure(w.p == vec![1.0], format!("step witness p = {:?}", w.p))?;
    Ok(format!("quadratic (0.4, 2), linear 1, Schaefer norm error {worst:.1e}, step witness p = +1 r = {}", w.radius))
}

fn c10() -> Verdict {
    let flat = Arc::new(e2s(ReducedGeometry::flat_torus(Grid::periodic(128, Order::Four).unwrap(), 3))?);
    let dev = match VectorSolver::new(flat, CoupledOptions::default().kernel_tol) {
        Err(Error::ConformalKillingKernel { direction, .. }) => {
            let s = direction.iter().sum::<f64>().signum();
            let big = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            direction.iter().fold(0.0f64, |m, v| m.max((s * v / big - 1.0).abs()))
        }
        Err(e) => return Err(format!("flat: unexpected error {e}")),
        Ok(_) => return Err("flat geometry passed the kernel check".into()),
    };
    ensure(dev <= 1e-6, format!("kernel direction deviates {dev:.3e} from constant"))?;
    let g = e2s(bundled_geometry(256, Order::Four))?;
    let k = e2s(kernel_check(&g, CoupledOptions::default().kernel_tol))?;
    ensure(!k.has_kernel(), format!("bundled σ_min {:.3e} below {:.3e}", k.sigma_min, k.threshold))?;
    Ok(format!("flat direction deviation {dev:.1e}; bundled σ_min {:.3e} vs threshold {:.3e}", k.sigma_min, k.threshold))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("constant-data exactness", c1),
        ("conformal covariance", c2),
        ("maximum principle", c3),
        ("uniqueness", c4),
        ("operator algebra", c5),
        ("solution-map smoothness", c6),
        ("admissibility diagnostics", c7),
        ("nonuniqueness regression", c8),
        ("half-continuity dichotomy", c9),
        ("kernel detection", c10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("criterion {:>2} PASS {name}: {msg} [{secs:.2} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {msg} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
