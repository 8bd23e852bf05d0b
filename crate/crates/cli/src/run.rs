//! Builds seed data from a [`RunConfig`] and runs one experiment.

use crate::config::{Family, Mode, RunConfig, SigmaKind, TauKind};
use crate::error::CliError;
use conflab::coupled::report::{fmt_num, trace_rows, write_rows, Row};
use conflab::coupled::{
    compute_c, design_admissible_tau, estimate_a, find_two_solutions, kernel_check, picard_solve_with,
    ContinuationOptions, CoupledOptions, EstimateMode, SeedData, TauLayout,
};
use conflab::elliptic::conformal_laplacian_eigen;
use conflab::exec::{with_threads, Execution};
use conflab::geometry::profile::Profile;
use conflab::geometry::{make_tt_tensor, norms_and_integrals, ReducedTT, TTSpec};
use conflab::halfcont::{
    check_association_with, dichotomy_search, gallery, gallery_names, half_continuity_witness, GalleryEntry, Outcome,
    SearchOptions, WitnessOptions,
};
use conflab::lichnerowicz::{self, LichProblem, SolveOptions};
use conflab::{Fibre, Grid, Order, ReducedGeometry, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

/// Experiment selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Experiment(Mode),
    GeomCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Experiment(m) => m.name(),
            Command::GeomCheck => "geom-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named results for summary.txt plus CSV files by name.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub results: Vec<(String, String)>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl RunOutput {
    fn put(&mut self, key: &str, value: impl fmt::Display) {
        self.results.push((key.to_string(), value.to_string()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.put(key, fmt_num(value));
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn report_csv(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(buf)
}

fn profile_field(cfg: &RunConfig, spec: &str, grid: &Grid) -> Result<ScalarField, CliError> {
    Ok(Profile::parse(spec)?.with_base(&cfg.base_dir).sample(grid)?)
}

pub fn build_geometry(cfg: &RunConfig) -> Result<Arc<ReducedGeometry>, CliError> {
    let g = &cfg.geometry;
    let order = Order::from_int(g.order).ok_or_else(|| CliError::range("geometry.order", "must be 2 or 4"))?;
    let geom = match g.family {
        Family::Bundled => conflab::fixtures::bundled_geometry(g.num_points, order)?,
        Family::Flat => ReducedGeometry::flat_torus(Grid::periodic(g.num_points, order)?, g.dim)?,
        Family::Warped => {
            let grid = Grid::periodic(g.num_points, order)?;
            let a = profile_field(cfg, &g.a_profile, &grid)?;
            let fibres = g
                .fibres
                .iter()
                .zip(&g.warps)
                .map(|(f, w)| {
                    let warp = profile_field(cfg, w, &grid)?;
                    Ok(if f.sphere { Fibre::sphere(f.dim, warp) } else { Fibre::torus(f.dim, warp) })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            ReducedGeometry::new(grid, a, fibres)?
        }
    };
    Ok(Arc::new(geom))
}

pub fn build_tau(cfg: &RunConfig, geom: &ReducedGeometry) -> Result<ScalarField, CliError> {
    let t = &cfg.tau;
    Ok(match t.kind {
        TauKind::Constant => ScalarField::constant(geom.len(), t.value),
        TauKind::Profile => profile_field(cfg, &t.profile, geom.grid())?,
        TauKind::Designed => design_admissible_tau(
            geom.grid(),
            &TauLayout {
                tau_min: t.tau_min,
                tau_max: t.tau_max,
                centres: t.centres.clone(),
                half_widths: t.half_widths.clone(),
            },
        )?,
    })
}

pub fn build_sigma(cfg: &RunConfig, geom: &ReducedGeometry) -> Result<ReducedTT, CliError> {
    let s = &cfg.sigma;
    if s.kind == SigmaKind::Zero {
        return Ok(ReducedTT::zero(geom));
    }
    let free = s
        .free
        .iter()
        .map(|f| f.as_deref().map(|p| profile_field(cfg, p, geom.grid())).transpose())
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(make_tt_tensor(geom, &TTSpec { s0: s.s0, free, off: s.off.clone(), balance: s.balance })?)
}

pub fn build_seed(cfg: &RunConfig) -> Result<SeedData, CliError> {
    let geom = build_geometry(cfg)?;
    let tau = build_tau(cfg, &geom)?;
    let sigma = build_sigma(cfg, &geom)?;
    let x = &cfg.experiment;
    Ok(SeedData::new(geom, tau, sigma, x.a, x.t, x.k)?)
}

fn coupled_options(cfg: &RunConfig) -> CoupledOptions {
    let x = &cfg.experiment;
    CoupledOptions { tol: x.tol_coupled, kernel_tol: x.kernel_tol, ..CoupledOptions::default() }
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.experiment.parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// geom-check accepts any mode; the experiments must match it.
pub fn check_mode(cfg: &RunConfig, cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Experiment(m) if m != cfg.experiment.mode => Err(CliError::range(
            "experiment.mode",
            format!("config is for `{}` but the subcommand is `{}`", cfg.experiment.mode.name(), m.name()),
        )),
        _ => Ok(()),
    }
}

/// Runs `cmd` inside a pool sized by `experiment.threads`.
pub fn run(cfg: &RunConfig, cmd: Command) -> Result<RunOutput, CliError> {
    check_mode(cfg, cmd)?;
    with_threads(cfg.experiment.threads, || match cmd {
        Command::GeomCheck => geom_check(cfg),
        Command::Experiment(Mode::Lichnerowicz) => lichnerowicz_run(cfg),
        Command::Experiment(Mode::Coupled) => coupled_run(cfg),
        Command::Experiment(Mode::KSweep) => k_sweep_run(cfg),
        Command::Experiment(Mode::TwoSolutions) => two_solutions_run(cfg),
        Command::Experiment(Mode::TauAdmissibility) => tau_run(cfg),
        Command::Experiment(Mode::HalfcontDemo) => halfcont_run(cfg),
    })
}

fn geom_check(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let geom = build_geometry(cfg)?;
    let mut out = RunOutput::default();
    let r = geom.scalar_curvature();
    out.put("n", geom.dim());
    out.num("N", geom.n_exp());
    out.num("c_n", geom.c_n());
    out.num("R_min", r.min());
    out.num("R_max", r.max());
    let total = norms_and_integrals(&geom, &vec![1.0; geom.len()], 1.0)?.integral;
    out.num("volume", total);
    match conformal_laplacian_eigen(&geom) {
        Ok(e) => {
            out.num("lambda1", e.lambda1);
            out.num("eigen_residual", e.residual);
            out.put("yamabe_positive_proxy", e.lambda1 > 1e-10);
        }
        Err(e) => out.put("lambda1", format!("failed: {e}")),
    }
    let k = kernel_check(&geom, cfg.experiment.kernel_tol)?;
    out.num("kernel_sigma_min", k.sigma_min);
    out.num("kernel_threshold", k.threshold);
    out.put("conformal_killing_kernel", k.has_kernel());
    match build_sigma(cfg, &geom) {
        Ok(s) => {
            let res = conflab::geometry::tt_residual(&geom, s.tensor())?;
            out.num("sigma_tt_residual", res.max());
        }
        Err(e) => out.put("sigma_tt_residual", format!("failed: {e}")),
    }
    if cfg.output.csv {
        let vol = geom.vol();
        let a = geom.profile_a();
        let rows: Vec<Vec<String>> = (0..geom.len())
            .map(|i| vec![fmt_num(geom.grid().x(i)), fmt_num(a[i]), fmt_num(vol[i]), fmt_num(r[i])])
            .collect();
        out.files.push(("geometry.csv".into(), csv_bytes(&["x", "A", "vol", "R"], &rows)?));
    }
    Ok(out)
}

fn lichnerowicz_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let geom = build_geometry(cfg)?;
    let tau = build_tau(cfg, &geom)?;
    let x = &cfg.experiment;
    let w = profile_field(cfg, &x.w, geom.grid())?;
    let opts = SolveOptions { tol: x.tol_lich, ..SolveOptions::default() };
    let mut out = RunOutput::default();
    let mut rows = Vec::new();
    let r_min = geom.scalar_curvature().min();
    out.num("R_min", r_min);
    if geom.curvature_positive() {
        let prob = LichProblem::new(geom.clone(), tau, &w, x.t)?;
        let br = lichnerowicz::bracket(&prob)?;
        out.num("bracket_lower", br.lower);
        out.num("bracket_upper", br.upper);
        // Start 0 is the solver's own initial guess; the rest are random.
        let mut rng = ChaCha8Rng::seed_from_u64(x.seed);
        let inits: Vec<Option<ScalarField>> = (0..x.starts)
            .map(|s| {
                (s > 0).then(|| {
                    ScalarField::from((0..geom.len()).map(|_| (rng.gen_range(-2.0f64..2.0)).exp()).collect::<Vec<f64>>())
                })
            })
            .collect();
        let sols = execution(cfg).map(&inits, |i| lichnerowicz::solve_with(&prob, i.as_ref(), opts));
        let sols = sols.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mut spread = 0.0f64;
        for (s, sol) in sols.iter().enumerate() {
            spread = spread.max(conflab::field::sup_diff(&sol.phi.values, &sols[0].phi.values));
            rows.push(Row {
                parameter: s as f64,
                sup_phi: sol.phi.sup(),
                res_lich: sol.residual_norm,
                res_vector: 0.0,
                iterations: sol.iterations,
                branch: "unique".into(),
            });
        }
        out.num("sup_phi", sols[0].phi.sup());
        out.num("min_phi", sols[0].phi.min());
        out.num("max_start_distance", spread);
    } else {
        let sol = lichnerowicz::solve_on(geom.clone(), &tau, &w.map(|v| v * v), x.t, opts)?;
        let phi = sol.phi;
        out.put("positivized", true);
        out.num("sup_phi", phi.sup());
        out.num("min_phi", phi.min());
        rows.push(Row {
            parameter: 0.0,
            sup_phi: phi.sup(),
            res_lich: sol.residual_norm,
            res_vector: 0.0,
            iterations: sol.iterations,
            branch: "positivized".into(),
        });
    }
    if cfg.output.csv {
        out.files.push(("results.csv".into(), report_csv(&rows)?));
    }
    Ok(out)
}

fn coupled_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let seed = build_seed(cfg)?;
    let rep = picard_solve_with(&seed, &ScalarField::constant(seed.geom.len(), 1.0), coupled_options(cfg))?;
    let cert = conflab::coupled::certify(&seed, &rep.phi, &rep.w)?;
    let mut out = RunOutput::default();
    out.num("sup_phi", rep.sup_phi);
    out.num("res_lich", rep.res_lich);
    out.num("res_vector", rep.res_vector);
    out.num("certified_lich", cert.lich);
    out.num("certified_vector", cert.vector);
    out.put("iterations", rep.iterations);
    out.put("branch", rep.branch);
    if cfg.output.csv {
        out.files.push(("results.csv".into(), report_csv(&[Row::from_report(seed.k, &rep)])?));
    }
    Ok(out)
}

fn k_grid(cfg: &RunConfig) -> Vec<f64> {
    cfg.experiment.k_grid.clone().unwrap_or_else(|| ContinuationOptions::default_k_grid(cfg.experiment.k))
}

fn k_sweep_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let seed = build_seed(cfg)?;
    let est = estimate_a(&seed, EstimateMode::A, &k_grid(cfg))?;
    let mut out = RunOutput::default();
    out.num("A_estimate", est.value);
    out.put("points", est.trace.points.len());
    match est.trace.fold {
        Some(f) => {
            out.num("fold_k", f.k);
            out.num("fold_sup_phi", f.sup_phi);
        }
        None => out.put("fold_k", "none"),
    }
    out.put("returned", est.trace.returned);
    out.put("step_failures", est.trace.failures.len());
    if let Some(w) = &est.warning {
        out.put("warning", w);
    }
    if cfg.output.csv {
        out.files.push(("results.csv".into(), report_csv(&trace_rows(&est.trace))?));
    }
    Ok(out)
}

fn two_solutions_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let seed = build_seed(cfg)?;
    let grid = cfg.experiment.k_grid.clone();
    let two = find_two_solutions(&seed, grid.as_deref(), coupled_options(cfg), ContinuationOptions::default())?;
    let mut out = RunOutput::default();
    out.num("sup_phi_small", two.small.sup_phi);
    out.num("sup_phi_large", two.large.sup_phi);
    out.num("gap", two.gap);
    out.num("certified_small", two.certified_small.max());
    out.num("certified_large", two.certified_large.max());
    if let Some(f) = two.trace.fold {
        out.num("fold_k", f.k);
        out.num("fold_sup_phi", f.sup_phi);
    }
    out.put("trace_points", two.trace.points.len());
    if cfg.output.csv {
        let rows = [Row::from_report(seed.k, &two.small), Row::from_report(seed.k, &two.large)];
        out.files.push(("results.csv".into(), report_csv(&rows)?));
        out.files.push(("trace.csv".into(), report_csv(&trace_rows(&two.trace))?));
    }
    Ok(out)
}

fn tau_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let geom = build_geometry(cfg)?;
    let tau = build_tau(cfg, &geom)?;
    let rep = compute_c(&geom, &tau, cfg.tau.cutoff)?;
    let mut out = RunOutput::default();
    let verdict = if rep.cmc {
        "CMC"
    } else if rep.violated {
        "VIOLATED"
    } else {
        "finite"
    };
    out.put("verdict", verdict);
    out.num("c", rep.c_measured);
    out.num("a_min", rep.a_min);
    out.num("excluded_fraction", rep.excluded_fraction);
    out.num("excluded_l_ratio", rep.excluded_l_ratio);
    out.num("cutoff", rep.cutoff);
    out.num("tau_min", tau.min());
    out.num("tau_max", tau.max());
    out.put("a_exceeds_a_min", cfg.experiment.a > rep.a_min);
    if cfg.output.csv {
        let rows: Vec<Vec<String>> = (0..geom.len()).map(|i| vec![fmt_num(geom.grid().x(i)), fmt_num(tau[i])]).collect();
        out.files.push(("tau.csv".into(), csv_bytes(&["x", "tau"], &rows)?));
    }
    Ok(out)
}

fn halfcont_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let x = &cfg.experiment;
    let exec = execution(cfg);
    let names: Vec<&str> = if x.example == "all" { gallery_names().to_vec() } else { vec![x.example.as_str()] };
    let mut out = RunOutput::default();
    let mut rows = Vec::new();
    let join = |v: &[f64]| v.iter().map(|c| fmt_num(*c)).collect::<Vec<_>>().join(";");
    for name in names {
        match gallery(name, x.schaefer_a, x.schaefer_d)? {
            GalleryEntry::Association(assoc) => {
                let assoc = assoc.with_samples(x.samples, x.seed);
                let cert = check_association_with(&assoc, exec)?;
                let res = dichotomy_search(&assoc, &cert, SearchOptions { seed: x.seed, exec, ..SearchOptions::default() });
                let (kind, t, pt, detail) = match &res.outcome {
                    Outcome::FixedPoint(p) => ("fixed-point", 1.0, p.clone(), String::new()),
                    Outcome::CriticalTuple { t, x, active } => ("critical-tuple", *t, x.clone(), format!("active={active}")),
                    Outcome::Inconclusive => ("inconclusive", f64::NAN, vec![], String::new()),
                };
                out.put(&format!("{name}.certificate"), fmt_num(cert.bound));
                out.put(&format!("{name}.outcome"), kind);
                rows.push(vec![
                    name.to_string(),
                    kind.to_string(),
                    fmt_num(t),
                    join(&pt),
                    fmt_num(res.residual),
                    res.phase.to_string(),
                    detail,
                ]);
            }
            GalleryEntry::Witness { f, x: at } => {
                let opts = WitnessOptions { seed: x.seed, ..WitnessOptions::default() };
                let w = half_continuity_witness(&*f, &at, opts)?;
                out.put(&format!("{name}.outcome"), "witness");
                out.put(&format!("{name}.radius"), fmt_num(w.radius));
                rows.push(vec![
                    name.to_string(),
                    "witness".into(),
                    String::new(),
                    join(&at),
                    String::new(),
                    String::new(),
                    format!("p={} r={} samples={}", join(&w.p), fmt_num(w.radius), w.samples),
                ]);
            }
        }
    }
    if cfg.output.csv {
        let header = ["example", "outcome", "t", "x", "residual", "phase", "detail"];
        out.files.push(("halfcont.csv".into(), csv_bytes(&header, &rows)?));
    }
    Ok(out)
}
