//! `key = value` run configuration with `[section]` headers and `#` comments.
//!
//! Every key has a default except `experiment.mode`. [`RunConfig::to_text`]
//! writes the fully resolved configuration back in the same syntax, so a
//! run can be repeated from its summary.

use crate::error::CliError;
use conflab::fixtures;
use conflab::geometry::profile::Profile;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SECTIONS: [&str; 5] = ["geometry", "tau", "sigma", "experiment", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lichnerowicz,
    Coupled,
    KSweep,
    TwoSolutions,
    TauAdmissibility,
    HalfcontDemo,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Lichnerowicz,
        Mode::Coupled,
        Mode::KSweep,
        Mode::TwoSolutions,
        Mode::TauAdmissibility,
        Mode::HalfcontDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Lichnerowicz => "lichnerowicz",
            Mode::Coupled => "coupled",
            Mode::KSweep => "k-sweep",
            Mode::TwoSolutions => "two-solutions",
            Mode::TauAdmissibility => "tau-admissibility",
            Mode::HalfcontDemo => "halfcont-demo",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bundled,
    Flat,
    Warped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FibreKind {
    pub dim: usize,
    pub sphere: bool,
}

impl FibreKind {
    fn parse(s: &str) -> Option<FibreKind> {
        let (name, dim) = match s.split_once(':') {
            Some((n, d)) => (n.trim(), d.trim().parse::<usize>().ok()?),
            None => (s.trim(), 1),
        };
        match name {
            "circle" if dim == 1 => Some(FibreKind { dim: 1, sphere: false }),
            "torus" if dim >= 1 => Some(FibreKind { dim, sphere: false }),
            "sphere" if dim >= 2 => Some(FibreKind { dim, sphere: true }),
            _ => None,
        }
    }

    fn label(&self) -> String {
        match (self.sphere, self.dim) {
            (false, 1) => "circle".into(),
            (false, d) => format!("torus:{d}"),
            (true, d) => format!("sphere:{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub family: Family,
    /// Total dimension of the flat family.
    pub dim: usize,
    pub num_points: usize,
    pub order: usize,
    pub a_profile: String,
    pub fibres: Vec<FibreKind>,
    /// One profile per fibre group of the warped family.
    pub warps: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauKind {
    Designed,
    Constant,
    Profile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauConfig {
    pub kind: TauKind,
    pub value: f64,
    pub profile: String,
    pub tau_min: f64,
    pub tau_max: f64,
    pub centres: Vec<f64>,
    pub half_widths: Vec<f64>,
    /// Critical-set cutoff relative to ‖dτ/τ‖∞.
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Spec,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaConfig {
    pub kind: SigmaKind,
    pub s0: f64,
    pub off: Vec<f64>,
    pub free: Vec<Option<String>>,
    pub balance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub a: f64,
    pub t: f64,
    pub k: f64,
    /// `None` means the default logarithmic grid above k.
    pub k_grid: Option<Vec<f64>>,
    pub w: String,
    pub starts: usize,
    pub tol_lich: f64,
    pub tol_coupled: f64,
    pub kernel_tol: f64,
    pub seed: u64,
    pub threads: usize,
    pub parallel: bool,
    pub example: String,
    pub schaefer_a: f64,
    pub schaefer_d: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    pub csv: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub tau: TauConfig,
    pub sigma: SigmaConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
    /// Relative paths (profiles, output directory) resolve against this.
    pub base_dir: PathBuf,
}

pub const EXAMPLES: [&str; 5] = ["all", "quadratic", "linear", "step-function", "schaefer"];

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            family: Family::Bundled,
            dim: 3,
            num_points: 256,
            order: 4,
            a_profile: "const:1".into(),
            fibres: vec![FibreKind { dim: 1, sphere: false }, FibreKind { dim: 2, sphere: true }],
            warps: vec!["exp_sin:1,0.3".into(), "exp_cos:0.7,0.1".into()],
        }
    }
}

impl Default for TauConfig {
    fn default() -> Self {
        let l = fixtures::bundled_layout();
        TauConfig {
            kind: TauKind::Designed,
            value: 0.5,
            profile: "exp_cos:1,0.5".into(),
            tau_min: l.tau_min,
            tau_max: l.tau_max,
            centres: vec![0.5 * PI, 1.5 * PI],
            half_widths: l.half_widths,
            cutoff: 0.1,
        }
    }
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig {
            kind: SigmaKind::Spec,
            s0: fixtures::SIGMA_S0,
            off: vec![fixtures::SIGMA_OFF],
            free: vec![None],
            balance: false,
        }
    }
}

impl ExperimentConfig {
    fn with_mode(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            a: fixtures::EXPONENT,
            t: fixtures::SCALE_T,
            k: 0.0,
            k_grid: None,
            w: "const:1".into(),
            starts: 10,
            tol_lich: 1e-10,
            tol_coupled: 1e-8,
            kernel_tol: 1e-8,
            seed: 0,
            threads: 0,
            parallel: true,
            example: "all".into(),
            schaefer_a: 1.5,
            schaefer_d: 2,
            samples: 20_000,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: "out".into(), csv: true }
    }
}

struct Entry {
    value: String,
    line: usize,
}

type Sections = HashMap<&'static str, HashMap<String, Entry>>;

fn lex(text: &str) -> Result<Sections, CliError> {
    let mut out: Sections = SECTIONS.iter().map(|s| (*s, HashMap::new())).collect();
    let mut current: Option<&'static str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::Parse { line, msg: format!("malformed section header `{body}`") })?
                .trim();
            current = Some(
                SECTIONS
                    .iter()
                    .copied()
                    .find(|s| *s == name)
                    .ok_or_else(|| CliError::Parse { line, msg: format!("unknown section [{name}]") })?,
            );
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| CliError::Parse { line, msg: format!("expected `key = value`, found `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(CliError::Parse { line, msg: format!("malformed key `{key}`") });
        }
        let section = current.ok_or_else(|| CliError::Parse { line, msg: format!("`{key}` appears before any [section]") })?;
        let map = out.get_mut(section).expect("known section");
        if let Some(prev) = map.get(key) {
            return Err(CliError::Parse {
                line,
                msg: format!("duplicate key `{key}` in [{section}] (lines {} and {line})", prev.line),
            });
        }
        map.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(out)
}

fn num(e: &Entry) -> Result<f64, CliError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Parse { line: e.line, msg: format!("expected a number, found `{}`", e.value) })
}

fn int(e: &Entry) -> Result<u64, CliError> {
    e.value
        .parse::<u64>()
        .map_err(|_| CliError::Parse { line: e.line, msg: format!("expected a non-negative integer, found `{}`", e.value) })
}

fn boolean(e: &Entry) -> Result<bool, CliError> {
    match e.value.as_str() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        v => Err(CliError::Parse { line: e.line, msg: format!("expected true or false, found `{v}`") }),
    }
}

fn list(e: &Entry) -> Result<Vec<f64>, CliError> {
    if e.value.is_empty() {
        return Ok(vec![]);
    }
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Parse { line: e.line, msg: format!("bad list entry `{}`", s.trim()) })
        })
        .collect()
}

fn profile(e: &Entry) -> Result<String, CliError> {
    Profile::parse(&e.value).map_err(|err| CliError::Parse { line: e.line, msg: err.to_string() })?;
    Ok(e.value.clone())
}

fn check(ok: bool, key: &str, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::range(key, msg))
    }
}

fn warp_index(key: &str) -> Option<usize> {
    key.strip_prefix("warp")?.parse::<usize>().ok().filter(|i| *i >= 1)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, CliError> {
        let mut s = lex(text)?;
        let unknown = |section: &str, key: &str, e: &Entry| CliError::UnknownKey {
            section: section.to_string(),
            key: key.to_string(),
            line: e.line,
        };

        let mut sorted = |name: &'static str| {
            let mut v: Vec<(String, Entry)> = s.remove(name).unwrap_or_default().into_iter().collect();
            v.sort_by_key(|(_, e)| e.line);
            v
        };

        let mut geometry = GeometryConfig::default();
        let mut warps: Vec<(usize, String)> = Vec::new();
        let mut fibres_set = false;
        for (key, e) in sorted("geometry") {
            match key.as_str() {
                "family" => {
                    geometry.family = match e.value.as_str() {
                        "bundled" => Family::Bundled,
                        "flat" => Family::Flat,
                        "warped" => Family::Warped,
                        v => {
                            return Err(CliError::Parse {
                                line: e.line,
                                msg: format!("family must be bundled, flat or warped, found `{v}`"),
                            })
                        }
                    }
                }
                "dim" => {
                    let v = int(&e)?;
                    check((3..=64).contains(&v), "geometry.dim", "must lie in 3..=64")?;
                    geometry.dim = v as usize;
                }
                "num_points" => {
                    let v = int(&e)?;
                    check((16..=1 << 20).contains(&v), "geometry.num_points", "must lie in 16..=1048576")?;
                    geometry.num_points = v as usize;
                }
                "order" => {
                    let v = int(&e)?;
                    check(v == 2 || v == 4, "geometry.order", "must be 2 or 4")?;
                    geometry.order = v as usize;
                }
                "a_profile" => geometry.a_profile = profile(&e)?,
                "fibres" => {
                    geometry.fibres = e
                        .value
                        .split(',')
                        .map(|f| {
                            FibreKind::parse(f).ok_or_else(|| CliError::Parse {
                                line: e.line,
                                msg: format!("bad fibre `{}` (circle, torus:D or sphere:D)", f.trim()),
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    fibres_set = true;
                }
                k => match warp_index(k) {
                    Some(i) => warps.push((i, profile(&e)?)),
                    None => return Err(unknown("geometry", k, &e)),
                },
            }
        }
        if fibres_set || !warps.is_empty() {
            let m = geometry.fibres.len();
            let mut w = if fibres_set { vec!["const:1".to_string(); m] } else { geometry.warps.clone() };
            for (i, p) in warps {
                check(i <= m, "geometry.warp", &format!("warp{i} given for {m} fibre groups"))?;
                w[i - 1] = p;
            }
            geometry.warps = w;
        }
        if geometry.family == Family::Warped {
            let n = 1 + geometry.fibres.iter().map(|f| f.dim).sum::<usize>();
            check(n >= 3, "geometry.fibres", "total dimension must be at least 3")?;
        }

        let mut tau = TauConfig::default();
        for (key, e) in sorted("tau") {
            match key.as_str() {
                "kind" => {
                    tau.kind = match e.value.as_str() {
                        "designed" => TauKind::Designed,
                        "constant" => TauKind::Constant,
                        "profile" => TauKind::Profile,
                        v => {
                            return Err(CliError::Parse {
                                line: e.line,
                                msg: format!("kind must be designed, constant or profile, found `{v}`"),
                            })
                        }
                    }
                }
                "value" => {
                    tau.value = num(&e)?;
                    check(tau.value > 0.0, "tau.value", "must be positive")?;
                }
                "profile" => tau.profile = profile(&e)?,
                "tau_min" => {
                    tau.tau_min = num(&e)?;
                    check(tau.tau_min > 0.0, "tau.tau_min", "must be positive")?;
                }
                "tau_max" => {
                    tau.tau_max = num(&e)?;
                    check(tau.tau_max > 0.0, "tau.tau_max", "must be positive")?;
                }
                "centres" => tau.centres = list(&e)?,
                "half_widths" => {
                    tau.half_widths = list(&e)?;
                    check(tau.half_widths.iter().all(|w| *w > 0.0), "tau.half_widths", "must be positive")?;
                }
                "cutoff" => {
                    tau.cutoff = num(&e)?;
                    check(tau.cutoff > 0.0 && tau.cutoff < 1.0, "tau.cutoff", "must lie in (0, 1)")?;
                }
                k => return Err(unknown("tau", k, &e)),
            }
        }
        check(tau.tau_min <= tau.tau_max, "tau.tau_min", "must not exceed tau_max")?;

        let mut sigma = SigmaConfig::default();
        for (key, e) in sorted("sigma") {
            match key.as_str() {
                "kind" => {
                    sigma.kind = match e.value.as_str() {
                        "spec" => SigmaKind::Spec,
                        "zero" => SigmaKind::Zero,
                        v => {
                            return Err(CliError::Parse { line: e.line, msg: format!("kind must be spec or zero, found `{v}`") })
                        }
                    }
                }
                "s0" => sigma.s0 = num(&e)?,
                "off" => sigma.off = list(&e)?,
                "free" => {
                    sigma.free = e
                        .value
                        .split(';')
                        .map(|p| {
                            let p = p.trim();
                            if p == "none" || p.is_empty() {
                                Ok(None)
                            } else {
                                profile(&Entry { value: p.to_string(), line: e.line }).map(Some)
                            }
                        })
                        .collect::<Result<_, _>>()?;
                }
                "balance" => sigma.balance = boolean(&e)?,
                k => return Err(unknown("sigma", k, &e)),
            }
        }

        let mut exp_entries = sorted("experiment");
        let mode_pos = exp_entries.iter().position(|(k, _)| k == "mode");
        let mode = match mode_pos {
            Some(i) => {
                let (_, e) = exp_entries.remove(i);
                Mode::parse(&e.value).ok_or_else(|| CliError::Parse {
                    line: e.line,
                    msg: format!(
                        "mode must be one of {}, found `{}`",
                        Mode::ALL.map(Mode::name).join(", "),
                        e.value
                    ),
                })?
            }
            None => return Err(CliError::Missing { section: "experiment".into(), key: "mode".into() }),
        };
        let mut experiment = ExperimentConfig::with_mode(mode);
        let tol = |e: &Entry, key: &str| -> Result<f64, CliError> {
            let v = num(e)?;
            check(v > 0.0 && v < 1.0, key, "must lie in (0, 1)")?;
            Ok(v)
        };
        for (key, e) in exp_entries {
            let x = &mut experiment;
            match key.as_str() {
                "a" => {
                    x.a = num(&e)?;
                    check((1.0..=100.0).contains(&x.a), "experiment.a", "must lie in [1, 100]")?;
                }
                "t" => {
                    x.t = num(&e)?;
                    check(x.t > 0.0 && x.t <= 1.0, "experiment.t", "must lie in (0, 1]")?;
                }
                "k" => {
                    x.k = num(&e)?;
                    check(x.k >= 0.0, "experiment.k", "must be non-negative")?;
                }
                "k_grid" => {
                    x.k_grid = if e.value == "default" {
                        None
                    } else {
                        let g = list(&e)?;
                        check(!g.is_empty(), "experiment.k_grid", "must not be empty")?;
                        check(g[0] >= 0.0, "experiment.k_grid", "must be non-negative")?;
                        check(g.windows(2).all(|p| p[1] > p[0]), "experiment.k_grid", "must be strictly increasing")?;
                        Some(g)
                    }
                }
                "w" => x.w = profile(&e)?,
                "starts" => {
                    let v = int(&e)?;
                    check((1..=10_000).contains(&v), "experiment.starts", "must lie in 1..=10000")?;
                    x.starts = v as usize;
                }
                "tol_lich" => x.tol_lich = tol(&e, "experiment.tol_lich")?,
                "tol_coupled" => x.tol_coupled = tol(&e, "experiment.tol_coupled")?,
                "kernel_tol" => x.kernel_tol = tol(&e, "experiment.kernel_tol")?,
                "seed" => x.seed = int(&e)?,
                "threads" => {
                    let v = int(&e)?;
                    check(v <= 4096, "experiment.threads", "must lie in 0..=4096 (0 = auto)")?;
                    x.threads = v as usize;
                }
                "parallel" => x.parallel = boolean(&e)?,
                "example" => {
                    check(
                        EXAMPLES.contains(&e.value.as_str()),
                        "experiment.example",
                        &format!("must be one of {}", EXAMPLES.join(", ")),
                    )?;
                    x.example = e.value.clone();
                }
                "schaefer_a" => {
                    x.schaefer_a = num(&e)?;
                    check(x.schaefer_a > 0.0, "experiment.schaefer_a", "must be positive")?;
                }
                "schaefer_d" => {
                    let v = int(&e)?;
                    check((1..=64).contains(&v), "experiment.schaefer_d", "must lie in 1..=64")?;
                    x.schaefer_d = v as usize;
                }
                "samples" => {
                    let v = int(&e)?;
                    check((10_000..=10_000_000).contains(&v), "experiment.samples", "must lie in 10000..=10000000")?;
                    x.samples = v as usize;
                }
                k => return Err(unknown("experiment", k, &e)),
            }
        }

        let mut output = OutputConfig::default();
        for (key, e) in sorted("output") {
            match key.as_str() {
                "directory" => {
                    check(!e.value.is_empty(), "output.directory", "must not be empty")?;
                    output.directory = e.value.clone();
                }
                "csv" => output.csv = boolean(&e)?,
                k => return Err(unknown("output", k, &e)),
            }
        }

        Ok(RunConfig { geometry, tau, sigma, experiment, output, base_dir: base_dir.to_path_buf() })
    }

    pub fn output_dir(&self) -> PathBuf {
        let d = Path::new(&self.output.directory);
        if d.is_relative() {
            self.base_dir.join(d)
        } else {
            d.to_path_buf()
        }
    }

    /// The resolved configuration, defaults included, in parseable form.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let g = &self.geometry;
        let family = match g.family {
            Family::Bundled => "bundled",
            Family::Flat => "flat",
            Family::Warped => "warped",
        };
        let _ = writeln!(s, "[geometry]");
        let _ = writeln!(s, "family = {family}");
        let _ = writeln!(s, "dim = {}", g.dim);
        let _ = writeln!(s, "num_points = {}", g.num_points);
        let _ = writeln!(s, "order = {}", g.order);
        let _ = writeln!(s, "a_profile = {}", g.a_profile);
        let _ = writeln!(s, "fibres = {}", g.fibres.iter().map(FibreKind::label).collect::<Vec<_>>().join(", "));
        for (i, w) in g.warps.iter().enumerate() {
            let _ = writeln!(s, "warp{} = {w}", i + 1);
        }
        let t = &self.tau;
        let kind = match t.kind {
            TauKind::Designed => "designed",
            TauKind::Constant => "constant",
            TauKind::Profile => "profile",
        };
        let _ = writeln!(s, "\n[tau]");
        let _ = writeln!(s, "kind = {kind}");
        let _ = writeln!(s, "value = {}", t.value);
        let _ = writeln!(s, "profile = {}", t.profile);
        let _ = writeln!(s, "tau_min = {}", t.tau_min);
        let _ = writeln!(s, "tau_max = {}", t.tau_max);
        let _ = writeln!(s, "centres = {}", join(&t.centres));
        let _ = writeln!(s, "half_widths = {}", join(&t.half_widths));
        let _ = writeln!(s, "cutoff = {}", t.cutoff);
        let sg = &self.sigma;
        let _ = writeln!(s, "\n[sigma]");
        let _ = writeln!(s, "kind = {}", if sg.kind == SigmaKind::Spec { "spec" } else { "zero" });
        let _ = writeln!(s, "s0 = {}", sg.s0);
        let _ = writeln!(s, "off = {}", join(&sg.off));
        let free: Vec<&str> = sg.free.iter().map(|f| f.as_deref().unwrap_or("none")).collect();
        let _ = writeln!(s, "free = {}", free.join("; "));
        let _ = writeln!(s, "balance = {}", sg.balance);
        let x = &self.experiment;
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "mode = {}", x.mode.name());
        let _ = writeln!(s, "a = {}", x.a);
        let _ = writeln!(s, "t = {}", x.t);
        let _ = writeln!(s, "k = {}", x.k);
        let _ = writeln!(s, "k_grid = {}", x.k_grid.as_deref().map_or("default".to_string(), join));
        let _ = writeln!(s, "w = {}", x.w);
        let _ = writeln!(s, "starts = {}", x.starts);
        let _ = writeln!(s, "tol_lich = {:e}", x.tol_lich);
        let _ = writeln!(s, "tol_coupled = {:e}", x.tol_coupled);
        let _ = writeln!(s, "kernel_tol = {:e}", x.kernel_tol);
        let _ = writeln!(s, "seed = {}", x.seed);
        let _ = writeln!(s, "threads = {}", x.threads);
        let _ = writeln!(s, "parallel = {}", x.parallel);
        let _ = writeln!(s, "example = {}", x.example);
        let _ = writeln!(s, "schaefer_a = {}", x.schaefer_a);
        let _ = writeln!(s, "schaefer_d = {}", x.schaefer_d);
        let _ = writeln!(s, "samples = {}", x.samples);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "directory = {}", self.output.directory);
        let _ = writeln!(s, "csv = {}", self.output.csv);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn mode_is_required() {
        let e = parse("[experiment]\n").unwrap_err();
        assert!(matches!(e, CliError::Missing { ref key, .. } if key == "mode"), "{e}");
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("[experiment]\nmode = coupled\n").unwrap();
        assert_eq!(c.geometry, GeometryConfig::default());
        assert_eq!(c.experiment.a, 2.0);
        assert_eq!(c.experiment.k_grid, None);
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let e = parse("[experiment]\nmode = coupled\n# note\na = 2\na = 3\n").unwrap_err();
        match e {
            CliError::Parse { line, msg } => {
                assert_eq!(line, 5);
                assert!(msg.contains("lines 4 and 5"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn error_classes() {
        assert!(matches!(parse("[experiment]\nmode = coupled\nbogus = 1\n"), Err(CliError::UnknownKey { line: 3, .. })));
        assert!(matches!(parse("[experiment]\nmode = coupled\nt = 1.5\n"), Err(CliError::Range { .. })));
        assert!(matches!(parse("[experiment]\nmode = coupled\nt = abc\n"), Err(CliError::Parse { line: 3, .. })));
        assert!(matches!(parse("mode = coupled\n"), Err(CliError::Parse { line: 1, .. })));
        assert!(matches!(parse("[nowhere]\n"), Err(CliError::Parse { line: 1, .. })));
        assert!(matches!(parse("[experiment]\nmode coupled\n"), Err(CliError::Parse { line: 2, .. })));
        assert!(matches!(parse("[experiment]\nmode = fly\n"), Err(CliError::Parse { line: 2, .. })));
        assert!(matches!(parse("[geometry]\nwarp3 = const:1\n[experiment]\nmode = coupled\n"), Err(CliError::Range { .. })));
        assert!(matches!(parse("[geometry]\nwarpx = const:1\n[experiment]\nmode = coupled\n"), Err(CliError::UnknownKey { .. })));
    }

    #[test]
    fn comments_and_whitespace() {
        let c = parse("  # header\n[experiment]   \n  mode=k-sweep # trailing\nk_grid = 0, 1,2\n").unwrap();
        assert_eq!(c.experiment.mode, Mode::KSweep);
        assert_eq!(c.experiment.k_grid, Some(vec![0.0, 1.0, 2.0]));
    }

    #[test]
    fn warps_follow_fibres() {
        let c = parse("[geometry]\nfamily = warped\nfibres = circle, sphere:3\nwarp2 = exp_cos:1,0.2\n[experiment]\nmode = coupled\n")
            .unwrap();
        assert_eq!(c.geometry.fibres, vec![FibreKind { dim: 1, sphere: false }, FibreKind { dim: 3, sphere: true }]);
        assert_eq!(c.geometry.warps, vec!["const:1".to_string(), "exp_cos:1,0.2".to_string()]);
    }

    #[test]
    fn echo_reparses_to_same_config() {
        let text = "[tau]\nkind = profile\nprofile = exp_cos:1,0.5\n[sigma]\nfree = sin:0,0.1\noff = 0.5, 0.25\n\
                    [experiment]\nmode = halfcont-demo\nexample = schaefer\nk_grid = 0, 10\n[output]\ncsv = false\n";
        let c = parse(text).unwrap();
        let again = parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }
}
