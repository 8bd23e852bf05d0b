//! Configuration, orchestration and report files for the `conflab` binary.

pub mod config;
pub mod error;
pub mod run;

use config::RunConfig;
use error::CliError;
use run::{Command, RunOutput};
use std::fmt::Write as _;

/// summary.txt: the resolved configuration followed by commented results,
/// so the file itself parses as a config for the same run.
pub fn summary_text(cfg: &RunConfig, cmd: Command, result: &Result<RunOutput, CliError>) -> String {
    let mut s = format!("# conflab {cmd}\n");
    match result {
        Ok(_) => s.push_str("# status = ok\n"),
        Err(e) => {
            let _ = writeln!(s, "# status = error (exit {}): {e}", e.exit_code());
        }
    }
    s.push('\n');
    s.push_str(&cfg.to_text());
    if let Ok(out) = result {
        s.push_str("\n# results\n");
        for (k, v) in &out.results {
            let _ = writeln!(s, "# {k} = {v}");
        }
    }
    s
}

/// Runs `cmd`, writes summary.txt and any CSV files, and returns the exit code.
pub fn execute(cfg: &RunConfig, cmd: Command) -> Result<i32, CliError> {
    run::check_mode(cfg, cmd)?;
    let result = run::run(cfg, cmd);
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    };
    write("summary.txt", summary_text(cfg, cmd, &result).as_bytes())?;
    match result {
        Ok(out) => {
            for (name, bytes) in &out.files {
                write(name, bytes)?;
            }
            for (k, v) in &out.results {
                println!("{k} = {v}");
            }
            Ok(0)
        }
        Err(e) => {
            eprintln!("conflab {cmd}: {e}");
            Ok(e.exit_code())
        }
    }
}
