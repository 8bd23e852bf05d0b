use clap::{Args, Parser, Subcommand};
use conflab_cli::config::{Mode, RunConfig};
use conflab_cli::run::Command;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conflab", version, about = "Conformal constraint equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (key = value with [sections]).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Sub {
    /// Scalar Lichnerowicz solve with random restarts.
    Lichnerowicz(ConfigArg),
    /// One coupled solve from φ ≡ 1.
    Coupled(ConfigArg),
    /// Continuation in k with fold detection.
    KSweep(ConfigArg),
    /// Small and large solution for the same seed.
    TwoSolutions(ConfigArg),
    /// Admissibility constant c of the mean curvature.
    TauAdmissibility(ConfigArg),
    /// Fixed-point dichotomy gallery.
    HalfcontDemo(ConfigArg),
    /// Curvature, eigenvalue and kernel diagnostics of the geometry.
    GeomCheck(ConfigArg),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, arg) = match cli.command {
        Sub::Lichnerowicz(a) => (Command::Experiment(Mode::Lichnerowicz), a),
        Sub::Coupled(a) => (Command::Experiment(Mode::Coupled), a),
        Sub::KSweep(a) => (Command::Experiment(Mode::KSweep), a),
        Sub::TwoSolutions(a) => (Command::Experiment(Mode::TwoSolutions), a),
        Sub::TauAdmissibility(a) => (Command::Experiment(Mode::TauAdmissibility), a),
        Sub::HalfcontDemo(a) => (Command::Experiment(Mode::HalfcontDemo), a),
        Sub::GeomCheck(a) => (Command::GeomCheck, a),
    };
    let code = RunConfig::load(&arg.config).and_then(|cfg| conflab_cli::execute(&cfg, cmd)).unwrap_or_else(|e| {
        eprintln!("conflab {cmd}: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
