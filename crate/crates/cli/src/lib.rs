//! Command-line front end.
//!
//! Every subcommand reads a JSON system file and prints a JSON report on
//! stdout. Exit codes: 0 success, 2 malformed input, 3 numerical failure,
//! 4 a verification check failed.

pub mod commands;
pub mod schema;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use poset_mobius::simulate::{DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_TAPS};

use commands::{Failure, Report, SimulateArgs, YoulaArgs};
use schema::SystemSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "poset-mobius", version, about = "Controller synthesis for poset-causal linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal local gains and the separation report.
    Synth { system: PathBuf },
    /// Closed-loop trajectory as CSV.
    Simulate {
        system: PathBuf,
        /// Initial state, comma separated, in listed element order. Random from `--seed` if omitted.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; the trace goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invariant suite; exits 4 if any check fails.
    Verify {
        system: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Block-diagonal form of the lifted plant at random frequencies.
    Blockdiag {
        system: PathBuf,
        #[arg(long, default_value_t = 10)]
        freqs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Discrete disturbance-feedback run with exact disturbance reconstruction.
    Youla {
        system: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_TAPS)]
        taps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale of the random filter taps.
        #[arg(long, default_value_t = 0.3)]
        scale: f64,
        /// Treat A, B as discrete-time; otherwise they are mapped by forward Euler.
        #[arg(long)]
        discrete: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop H2 cost against the column-decoupled oracle.
    H2 { system: PathBuf },
}

impl Command {
    fn system(&self) -> &PathBuf {
        match self {
            Command::Synth { system }
            | Command::Simulate { system, .. }
            | Command::Verify { system, .. }
            | Command::Blockdiag { system, .. }
            | Command::Youla { system, .. }
            | Command::H2 { system } => system,
        }
    }
}

/// Runs with the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    let path = cli.command.system();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "cannot read {}: {e}", path.display());
            return EXIT_SCHEMA;
        }
    };
    let sys = match SystemSpec::parse(&text).and_then(|spec| spec.build()) {
        Ok(sys) => sys,
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", path.display());
            return EXIT_SCHEMA;
        }
    };

    let result: Result<Option<Report>, Failure> = match &cli.command {
        Command::Synth { .. } => commands::synth(&sys).map(Some),
        Command::H2 { .. } => commands::h2(&sys).map(Some),
        Command::Verify { seed, samples, .. } => commands::verify(&sys, *seed, *samples).map(Some),
        Command::Blockdiag { freqs, seed, .. } => commands::blockdiag(&sys, *freqs, *seed).map(Some),
        Command::Simulate { x0, horizon, dt, seed, out: path, .. } => {
            let args = SimulateArgs { x0: x0.clone(), horizon: *horizon, dt: *dt, seed: *seed, out: path.as_deref() };
            commands::simulate(&sys, &args, out)
        }
        Command::Youla { steps, taps, seed, scale, discrete, out: path, .. } => {
            let args = YoulaArgs {
                steps: *steps,
                taps: *taps,
                seed: *seed,
                scale: *scale,
                discrete: *discrete,
                out: path.as_deref(),
            };
            commands::youla(&sys, &args).map(Some)
        }
    };

    finish(result, out, err)
}

fn finish(result: Result<Option<Report>, Failure>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match result {
        Ok(None) => EXIT_OK,
        Ok(Some(report)) => {
            let text = serde_json::to_string_pretty(&report.json).expect("report serializes");
            if writeln!(out, "{text}").is_err() {
                return EXIT_NUMERICAL;
            }
            if report.passed {
                EXIT_OK
            } else {
                EXIT_VERIFY
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "invalid arguments: {msg}");
            EXIT_SCHEMA
        }
        Err(Failure::Io(msg)) => {
            let _ = writeln!(err, "i/o error: {msg}");
            EXIT_NUMERICAL
        }
        Err(Failure::Numerical(e)) => {
            let _ = writeln!(err, "{e}");
            EXIT_NUMERICAL
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use poset_mobius::Error;
    use serde_json::json;

    fn code(result: Result<Option<Report>, Failure>) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = finish(result, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_codes() {
        let failed = Report { json: json!({"passed": false}), passed: false };
        let (c, out, _) = code(Ok(Some(failed)));
        assert_eq!(c, EXIT_VERIFY);
        assert!(out.contains("\"passed\": false"));
        assert_eq!(code(Ok(None)).0, EXIT_OK);
        assert_eq!(code(Err(Failure::Usage("x".into()))).0, EXIT_SCHEMA);
        let (c, _, err) = code(Err(Failure::Numerical(Error::Numerical("stalled".into()))));
        assert_eq!(c, EXIT_NUMERICAL);
        assert!(err.contains("stalled"));
    }
}
