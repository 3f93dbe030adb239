use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Parser, Subcommand};
use delayline::config::{Experiment, RunConfig};
use delayline::experiments::{self, Outcome};
use delayline::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(name = "delayline", version, about = "Delayed quantum feedback through a ring of auxiliary oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file and write its artifacts.
    Run {
        config: PathBuf,
        /// Directory for the output files (default: next to the config's `output` prefix).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
    /// Print the available experiments.
    ListExperiments,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::FeedbackPhase { .. } => EXIT_CONFIG,
        Error::Unstable(_)
        | Error::BondDimension { .. }
        | Error::NotCompletelyPositive { .. }
        | Error::NotTracePreserving { .. }
        | Error::InvalidState(_)
        | Error::Linalg(_) => EXIT_NUMERIC,
        Error::Io(_) => EXIT_FAILURE,
    }
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn series_csv(out: &Outcome) -> String {
    let mut s = String::from("time,name,value\n");
    for ts in &out.series {
        for (t, v) in ts.times.iter().zip(&ts.values) {
            let _ = writeln!(s, "{t},{},{v}", ts.name);
        }
    }
    s
}

fn manifest(cfg: &RunConfig, out: &Outcome) -> String {
    let mut s = String::new();
    for (k, v) in cfg.manifest() {
        let _ = writeln!(s, "{k}={v}");
    }
    for (k, v) in &out.derived {
        let _ = writeln!(s, "derived.{k}={v}");
    }
    let _ = writeln!(s, "units.time=delta_t units of the config (kappa, omega in 1/time)");
    let _ = writeln!(s, "git_describe={}", git_describe());
    let _ = writeln!(s, "wall_time_s={:.3}", out.wall_seconds);
    let _ = writeln!(s, "status={}", if out.passed() { "PASS" } else { "FAIL" });
    s
}

fn report(cfg: &RunConfig, out: &Outcome) -> String {
    let mut s = format!("experiment {}\n", cfg.experiment);
    for c in &out.checks {
        let _ = writeln!(
            s,
            "{} {} value={:e} required {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.condition
        );
    }
    let _ = writeln!(s, "overall {}", if out.passed() { "PASS" } else { "FAIL" });
    s
}

fn write_artifacts(prefix: &Path, cfg: &RunConfig, out: &Outcome) -> std::io::Result<()> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let with = |suffix: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(suffix);
        PathBuf::from(p)
    };
    fs::write(with("_series.csv"), series_csv(out))?;
    fs::write(with("_meta.txt"), manifest(cfg, out))?;
    fs::write(with("_report.txt"), report(cfg, out))?;
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::from_path(path).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<15} {}", e.name(), e.description());
            }
            ExitCode::SUCCESS
        }
        Cmd::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}: ok (experiment {})", config.display(), cfg.experiment);
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Cmd::Run { config, out_dir } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let out = match experiments::run(&cfg) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code(&e));
                }
            };
            let prefix = match out_dir {
                Some(d) => d.join(&cfg.output),
                None => PathBuf::from(&cfg.output),
            };
            if let Err(e) = write_artifacts(&prefix, &cfg, &out) {
                eprintln!("cannot write artifacts: {e}");
                return ExitCode::from(EXIT_FAILURE);
            }
            print!("{}", report(&cfg, &out));
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_THRESHOLD)
            }
        }
    }
}
